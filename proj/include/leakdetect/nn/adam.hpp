#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace leakdetect::nn {

struct AdamConfig {
    double lr = 3.0e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1.0e-8;
    // Gradients whose joint L2 norm exceeds this are rescaled to it; 0 disables.
    double global_clip_norm = 0.0;

    void validate() const;
};

/// First and second moments, one buffer per parameter tensor.
template <typename S>
struct AdamState {
    AdamConfig config;
    std::vector<std::vector<S>> m;
    std::vector<std::vector<S>> v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const AdamConfig& cfg) : config(cfg) {}
};

/**
 * One bias-corrected Adam update of every parameter tensor in place.
 * Moments are allocated on the first call. The step counter is advanced
 * before the bias correction.
 *
 * Throws Error(training_diverged) if any gradient is non-finite; the
 * parameters and state are left untouched in that case.
 */
template <typename S>
void adam_step(std::span<const std::span<S>> params, std::span<const std::span<const S>> grads, AdamState<S>& state);

}  // namespace leakdetect::nn
