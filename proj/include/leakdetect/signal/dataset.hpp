#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "leakdetect/norm_stats.hpp"
#include "leakdetect/signal/segment.hpp"
#include "leakdetect/sim/hydraulics.hpp"

namespace leakdetect::signal {

inline constexpr std::size_t kDefaultSequenceLength = 200;
inline constexpr double kDefaultTrainFraction = 0.8;

/// Fixed-length z-scored model input with its one-hot label.
struct SequenceSample {
    std::vector<double> values;
    std::array<double, 3> onehot{};
    sim::LeakClass label = sim::LeakClass::NoLeak;
    Direction direction = Direction::extend;
    // Provenance: index of the source trace and of the segment within it.
    std::size_t trace_index = 0;
    std::size_t segment_index = 0;

    int label_code() const noexcept { return static_cast<int>(label); }
};

std::array<double, 3> onehot(sim::LeakClass label) noexcept;

struct DatasetOptions {
    std::size_t sequence_length = kDefaultSequenceLength;
    std::uint64_t seed = 1;
    std::size_t min_cycle_samples = kDefaultMinCycleSamples;
    double train_fraction = kDefaultTrainFraction;
};

struct Dataset {
    std::vector<SequenceSample> train;
    std::vector<SequenceSample> test;
    NormStats norm;
    std::uint64_t seed = 0;
    std::size_t sequence_length = 0;
    // Range of the (resampled, un-normalized) training data, for peak thresholds.
    double train_min = 0.0;
    double train_max = 0.0;
};

/// Number of training samples taken from a class with n segments.
std::size_t train_count(std::size_t n, double train_fraction) noexcept;

/**
 * Segments every trace, resamples each segment to the sequence length,
 * splits each class 80/20 after a seeded shuffle, fits NormStats on the
 * training portion only and z-scores both splits with it.
 *
 * Throws Error(missing_class) when a class has fewer than two segments.
 */
Dataset build_dataset(std::span<const sim::Trace> traces, const DatasetOptions& options);

// Split CSV: columns v0..v{L-1},label.
void write_split_csv(const std::filesystem::path& path, std::span<const SequenceSample> samples);
std::vector<SequenceSample> read_split_csv(const std::filesystem::path& path);

}  // namespace leakdetect::signal
