#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "leakdetect/nn/network.hpp"
#include "leakdetect/sim/hydraulics.hpp"
#include "leakdetect/train/trainer.hpp"

namespace leakdetect::app {

/// Every tunable of the pipeline. Keys in a config file use the field names.
struct RunConfig {
    std::uint64_t seed = 1;

    sim::ActuatorParams actuator;
    sim::SimConfig sim;
    int repetitions = 1;  // traces per class

    std::size_t sequence_length = 200;
    std::size_t min_cycle_samples = 50;
    double train_fraction = 0.8;
    std::size_t peak_min_distance = 10;
    double peak_prominence_fraction = 0.05;

    nn::NetworkSpec network;
    train::TrainConfig training;

    std::size_t max_cycle_samples = 0;  // 0: ten times sequence_length

    /// Applies one `key = value` pair. Throws Error(config) for an unknown
    /// key or an unparsable value.
    void set(std::string_view key, std::string_view value);

    /// Reads a flat `key = value` file; `#` starts a comment.
    void load_file(const std::filesystem::path& path);

    /// Validates every section; throws Error(config).
    void validate() const;

    /// Canonical `key = value` lines for every key, sorted.
    std::vector<std::string> canonical_lines() const;

    /// FNV-1a of the canonical lines, as 16 hex digits.
    std::string digest() const;

    static const std::vector<std::string_view>& keys();
};

/// Seed of the simulated trace for (class, repetition), derived from the run seed.
std::uint64_t trace_seed(std::uint64_t run_seed, sim::LeakClass c, int repetition) noexcept;

}  // namespace leakdetect::app
