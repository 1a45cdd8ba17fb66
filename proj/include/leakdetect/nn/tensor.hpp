#pragma once

#include <Eigen/Core>

namespace leakdetect::nn {

using Index = Eigen::Index;

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Precision switch: tests run the same code in double ("wide"); the
// trained model and the streaming detector use RuntimeScalar.
#if defined(LEAKDETECT_RUNTIME_DOUBLE) && LEAKDETECT_RUNTIME_DOUBLE
using RuntimeScalar = double;
#else
using RuntimeScalar = float;
#endif
using WideScalar = double;

/// Batch of equal-length sequences, stored time-major: row t * batch + b.
template <typename S>
struct SequenceBatch {
    Index steps = 0;
    Index batch = 0;
    Matrix<S> data;

    SequenceBatch() = default;
    SequenceBatch(Index steps_, Index batch_, Index features)
        : steps(steps_), batch(batch_), data(steps_ * batch_, features) {}

    Index features() const { return data.cols(); }

    auto at(Index t) { return data.middleRows(t * batch, batch); }
    auto at(Index t) const { return data.middleRows(t * batch, batch); }
};

}  // namespace leakdetect::nn
