#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace leakdetect::metrics {

inline constexpr int kClasses = 3;

/// counts[true][predicted].
struct ConfusionMatrix3 {
    std::array<std::array<std::int64_t, kClasses>, kClasses> counts{};

    std::int64_t total() const noexcept;
    std::int64_t row_sum(int k) const noexcept;
    std::int64_t column_sum(int k) const noexcept;

    friend bool operator==(const ConfusionMatrix3&, const ConfusionMatrix3&) = default;
};

/// Throws Error(dimension) on length mismatch, Error(label) on a label outside {0,1,2}.
ConfusionMatrix3 confusion(std::span<const int> truth, std::span<const int> predicted);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Empty row or column gives 0 for recall or precision; f1 is 0 when p + r == 0.
ClassMetrics class_metrics(const ConfusionMatrix3& cm, int k);

/// trace / total; Error(degenerate_data) on an empty matrix.
double accuracy(const ConfusionMatrix3& cm);

/// Pooled tp / pooled (tp + fn) over all classes.
double micro_recall(const ConfusionMatrix3& cm);

struct PrPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

/**
 * One-vs-rest precision/recall for class k, one point per distinct score
 * of that class, thresholds descending (predict k iff score >= threshold).
 * Recall is non-decreasing along the result and ends at 1.
 *
 * Throws Error(missing_class) when k never occurs in `truth`.
 */
std::vector<PrPoint> pr_curve(std::span<const std::array<double, kClasses>> scores, std::span<const int> truth,
                              int k);

void write_report_json(const std::filesystem::path& path, const ConfusionMatrix3& cm);
void write_pr_csv(const std::filesystem::path& path, std::span<const PrPoint> points);

/// Three comma-separated rows of non-negative integers.
ConfusionMatrix3 read_confusion_csv(const std::filesystem::path& path);

}  // namespace leakdetect::metrics
