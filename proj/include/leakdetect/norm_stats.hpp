#pragma once

namespace leakdetect {

/// Z-score parameters fitted on the training split; carried inside the model file.
struct NormStats {
    double mean = 0.0;
    double std = 1.0;

    double apply(double value) const noexcept { return (value - mean) / std; }

    friend bool operator==(const NormStats&, const NormStats&) = default;
};

}  // namespace leakdetect
