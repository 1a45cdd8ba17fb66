#include "leakdetect/metrics/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::metrics {

namespace {

void check_class(int k)
{
    if (k < 0 || k >= kClasses) throw Error(ErrorCode::label, "class index " + std::to_string(k) + " out of range");
}

double ratio(std::int64_t num, std::int64_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

std::int64_t ConfusionMatrix3::total() const noexcept
{
    std::int64_t n = 0;
    for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::int64_t{0});
    return n;
}

std::int64_t ConfusionMatrix3::row_sum(int k) const noexcept
{
    const auto& row = counts[static_cast<std::size_t>(k)];
    return std::accumulate(row.begin(), row.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix3::column_sum(int k) const noexcept
{
    std::int64_t n = 0;
    for (const auto& row : counts) n += row[static_cast<std::size_t>(k)];
    return n;
}

ConfusionMatrix3 confusion(std::span<const int> truth, std::span<const int> predicted)
{
    if (truth.size() != predicted.size())
        throw Error(ErrorCode::dimension, "truth and prediction lengths differ");
    ConfusionMatrix3 cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        check_class(truth[i]);
        check_class(predicted[i]);
        ++cm.counts[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    return cm;
}

ClassMetrics class_metrics(const ConfusionMatrix3& cm, int k)
{
    check_class(k);
    for (const auto& row : cm.counts)
        for (auto c : row)
            if (c < 0) throw Error(ErrorCode::data, "confusion matrix has a negative count");
    const auto tp = cm.counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    ClassMetrics m;
    m.precision = ratio(tp, cm.column_sum(k));
    m.recall = ratio(tp, cm.row_sum(k));
    const double s = m.precision + m.recall;
    m.f1 = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
    return m;
}

double accuracy(const ConfusionMatrix3& cm)
{
    const auto n = cm.total();
    if (n <= 0) throw Error(ErrorCode::degenerate_data, "accuracy of an empty confusion matrix");
    std::int64_t diag = 0;
    for (int k = 0; k < kClasses; ++k) diag += cm.counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    return static_cast<double>(diag) / static_cast<double>(n);
}

double micro_recall(const ConfusionMatrix3& cm)
{
    std::int64_t tp = 0, positives = 0;
    for (int k = 0; k < kClasses; ++k) {
        tp += cm.counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
        positives += cm.row_sum(k);
    }
    if (positives <= 0) throw Error(ErrorCode::degenerate_data, "micro recall of an empty confusion matrix");
    return static_cast<double>(tp) / static_cast<double>(positives);
}

std::vector<PrPoint> pr_curve(std::span<const std::array<double, kClasses>> scores, std::span<const int> truth, int k)
{
    check_class(k);
    if (scores.size() != truth.size()) throw Error(ErrorCode::dimension, "scores and labels differ in length");
    std::int64_t positives = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        check_class(truth[i]);
        const auto& s = scores[i];
        if (std::abs(s[0] + s[1] + s[2] - 1.0) > 1e-6) throw Error(ErrorCode::data, "score row does not sum to 1");
        if (truth[i] == k) ++positives;
    }
    if (positives == 0)
        throw Error(ErrorCode::missing_class, "recall undefined: class " + std::to_string(k) + " absent from labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto ks = static_cast<std::size_t>(k);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a][ks] > scores[b][ks]; });

    std::vector<PrPoint> curve;
    std::int64_t tp = 0, predicted = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const double threshold = scores[order[i]][ks];
        ++predicted;
        if (truth[order[i]] == k) ++tp;
        const bool last_of_tie = i + 1 == order.size() || scores[order[i + 1]][ks] != threshold;
        if (last_of_tie) curve.push_back({threshold, ratio(tp, positives), ratio(tp, predicted)});
    }
    return curve;
}

void write_report_json(const std::filesystem::path& path, const ConfusionMatrix3& cm)
{
    nlohmann::ordered_json doc;
    doc["total"] = cm.total();
    doc["accuracy"] = accuracy(cm);
    doc["micro_recall"] = micro_recall(cm);
    doc["confusion"] = cm.counts;
    auto classes = nlohmann::ordered_json::array();
    for (int k = 0; k < kClasses; ++k) {
        const auto m = class_metrics(cm, k);
        classes.push_back({{"class", k}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}});
    }
    doc["per_class"] = classes;
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

void write_pr_csv(const std::filesystem::path& path, std::span<const PrPoint> points)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
    out << "threshold,recall,precision\n";
    char buf[96];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.recall, p.precision);
        out << buf;
    }
}

ConfusionMatrix3 read_confusion_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open confusion matrix " + path.string());
    ConfusionMatrix3 cm;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (row == kClasses) throw Error(ErrorCode::data, "confusion matrix has more than 3 rows");
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col == kClasses) throw Error(ErrorCode::data, "confusion row has more than 3 columns");
            cell.erase(0, cell.find_first_not_of(" \t"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            std::int64_t v = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || v < 0)
                throw Error(ErrorCode::data, "bad confusion count '" + cell + "'");
            cm.counts[static_cast<std::size_t>(row)][static_cast<std::size_t>(col++)] = v;
        }
        if (col != kClasses) throw Error(ErrorCode::data, "confusion row has fewer than 3 columns");
        ++row;
    }
    if (row != kClasses) throw Error(ErrorCode::data, "confusion matrix needs 3 rows");
    return cm;
}

}  // namespace leakdetect::metrics
