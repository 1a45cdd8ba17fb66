#include "leakdetect/signal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "leakdetect/error.hpp"
#include "leakdetect/signal/normalize.hpp"

namespace leakdetect::signal {

namespace {

struct SegmentRef {
    std::size_t trace_index;
    std::size_t segment_index;
    CycleSegment segment;
};

SequenceSample to_sample(const SegmentRef& ref, std::vector<double> resampled, const NormStats& norm)
{
    SequenceSample s;
    for (double& v : resampled) v = norm.apply(v);
    s.values = std::move(resampled);
    s.label = ref.segment.label;
    s.onehot = onehot(s.label);
    s.direction = ref.segment.direction;
    s.trace_index = ref.trace_index;
    s.segment_index = ref.segment_index;
    return s;
}

}  // namespace

std::array<double, 3> onehot(sim::LeakClass label) noexcept
{
    std::array<double, 3> h{};
    h[static_cast<std::size_t>(label)] = 1.0;
    return h;
}

std::size_t train_count(std::size_t n, double train_fraction) noexcept
{
    if (n < 2) return n;
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

Dataset build_dataset(std::span<const sim::Trace> traces, const DatasetOptions& options)
{
    if (options.sequence_length < 2) throw Error(ErrorCode::config, "sequence length must be >= 2");
    if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0))
        throw Error(ErrorCode::config, "train fraction must lie in (0, 1)");

    std::array<std::vector<SegmentRef>, sim::kNumClasses> by_class;
    for (std::size_t ti = 0; ti < traces.size(); ++ti) {
        auto segments = segment_cycles(traces[ti], options.min_cycle_samples);
        for (std::size_t si = 0; si < segments.size(); ++si) {
            auto& bucket = by_class[static_cast<std::size_t>(segments[si].label)];
            bucket.push_back({ti, si, std::move(segments[si])});
        }
    }

    for (int c = 0; c < sim::kNumClasses; ++c) {
        const auto n = by_class[static_cast<std::size_t>(c)].size();
        const auto name = std::string(sim::to_string(static_cast<sim::LeakClass>(c)));
        if (n == 0) throw Error(ErrorCode::missing_class, "class '" + name + "' is absent from the input traces");
        if (n < 2)
            throw Error(ErrorCode::missing_class, "class '" + name + "' needs at least 2 segments, found " +
                                                      std::to_string(n));
    }

    // Stratified split: one shuffle per class, drawn from a single seeded stream.
    std::mt19937_64 rng(options.seed);
    std::vector<const SegmentRef*> train_refs;
    std::vector<const SegmentRef*> test_refs;
    for (auto& bucket : by_class) {
        std::vector<std::size_t> order(bucket.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t n_train = train_count(bucket.size(), options.train_fraction);
        for (std::size_t k = 0; k < order.size(); ++k) {
            (k < n_train ? train_refs : test_refs).push_back(&bucket[order[k]]);
        }
    }

    const auto resample_all = [&](const std::vector<const SegmentRef*>& refs) {
        std::vector<CycleSegment> out;
        out.reserve(refs.size());
        for (const auto* ref : refs) {
            CycleSegment seg = ref->segment;
            seg.samples = resample(ref->segment.samples, options.sequence_length);
            out.push_back(std::move(seg));
        }
        return out;
    };
    auto train_raw = resample_all(train_refs);
    auto test_raw = resample_all(test_refs);

    Dataset ds;
    ds.norm = fit_norm(train_raw);
    ds.seed = options.seed;
    ds.sequence_length = options.sequence_length;
    ds.train_min = train_raw.front().samples.front();
    ds.train_max = ds.train_min;
    for (const auto& seg : train_raw) {
        const auto [lo, hi] = std::minmax_element(seg.samples.begin(), seg.samples.end());
        ds.train_min = std::min(ds.train_min, *lo);
        ds.train_max = std::max(ds.train_max, *hi);
    }

    ds.train.reserve(train_raw.size());
    for (std::size_t i = 0; i < train_raw.size(); ++i)
        ds.train.push_back(to_sample(*train_refs[i], std::move(train_raw[i].samples), ds.norm));
    ds.test.reserve(test_raw.size());
    for (std::size_t i = 0; i < test_raw.size(); ++i)
        ds.test.push_back(to_sample(*test_refs[i], std::move(test_raw[i].samples), ds.norm));
    return ds;
}

void write_split_csv(const std::filesystem::path& path, std::span<const SequenceSample> samples)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    const std::size_t length = samples.empty() ? 0 : samples.front().values.size();
    for (std::size_t i = 0; i < length; ++i) out << 'v' << i << ',';
    out << "label\n";
    char buf[32];
    for (const auto& s : samples) {
        if (s.values.size() != length) throw Error(ErrorCode::dimension, "split samples differ in length");
        for (double v : s.values) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << s.label_code() << '\n';
    }
    if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

std::vector<SequenceSample> read_split_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::data, path.string() + ": empty split file");
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns < 3 || !line.ends_with("label"))
        throw Error(ErrorCode::data, path.string() + ": header must be v0..v{L-1},label");
    const std::size_t length = columns - 1;

    std::vector<SequenceSample> samples;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        SequenceSample s;
        s.values.reserve(length);
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t i = 0; i < columns; ++i) {
            const char* stop = std::find(p, end, ',');
            if (i + 1 < columns) {
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(p, stop, v);
                if (ec != std::errc{} || ptr != stop || stop == end)
                    throw Error(ErrorCode::data, path.string() + ":" + std::to_string(lineno) + ": bad value");
                s.values.push_back(v);
            } else {
                int label = -1;
                const auto [ptr, ec] = std::from_chars(p, stop, label);
                if (ec != std::errc{} || ptr != stop || stop != end)
                    throw Error(ErrorCode::data, path.string() + ":" + std::to_string(lineno) + ": bad label");
                s.label = sim::leak_class_from_int(label);
                s.onehot = onehot(s.label);
            }
            p = stop + (stop != end ? 1 : 0);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace leakdetect::signal
