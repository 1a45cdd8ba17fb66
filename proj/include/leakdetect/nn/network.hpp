#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "leakdetect/nn/layers.hpp"
#include "leakdetect/norm_stats.hpp"

namespace leakdetect::nn {

inline constexpr int kModelSchemaVersion = 1;

/**
 * Layer widths of the classifier stack:
 *   LSTM(lstm1, all steps) -> Dropout -> LSTM(lstm2, last step) -> Dropout
 *   -> Dense(dense1, ReLU) -> Dense(dense2, ReLU) -> Dense(classes, softmax)
 * The defaults are the production sizes; tests shrink them.
 */
struct NetworkSpec {
    Index input_dim = 1;
    Index lstm1_units = 128;
    Index lstm2_units = 64;
    Index dense1_units = 128;
    Index dense2_units = 64;
    Index num_classes = 3;
    double dropout_rate = 0.3;

    void validate() const;
    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

template <typename S>
struct Network {
    NetworkSpec spec;
    LstmLayer<S> lstm1;
    DropoutSpec dropout1;
    LstmLayer<S> lstm2;
    DropoutSpec dropout2;
    DenseLayer<S> dense1;
    DenseLayer<S> dense2;
    DenseLayer<S> output;

    NormStats norm;
    // Expected sequence length; 0 accepts any length.
    std::size_t sequence_length = 0;
    int schema_version = kModelSchemaVersion;

    std::size_t parameter_count() const;
    /// Throws Error(dimension) unless every layer chains onto the next.
    void check() const;
};

template <typename S>
struct ForwardCache {
    LstmCache<S> lstm1;
    Matrix<S> mask1;
    LstmCache<S> lstm2;
    Matrix<S> mask2;
    Matrix<S> dense_input;  // dropped-out LSTM2 output
    Matrix<S> z1, a1;
    Matrix<S> z2, a2;
};

template <typename S>
struct ForwardResult {
    Matrix<S> probs;  // batch x classes
    std::optional<ForwardCache<S>> cache;  // present iff training
};

template <typename S>
struct Gradients {
    LstmGrad<S> lstm1;
    LstmGrad<S> lstm2;
    DenseGrad<S> dense1;
    DenseGrad<S> dense2;
    DenseGrad<S> output;
};

/// Packs equal-length sequences into a one-feature time-major batch.
template <typename S>
SequenceBatch<S> make_batch(std::span<const std::vector<double>> sequences);

/// Runs the stack. `rng` drives the dropout masks and is only required in
/// training mode with a non-zero dropout rate.
template <typename S>
ForwardResult<S> network_forward(const Network<S>& net, const SequenceBatch<S>& x, bool training,
                                 std::mt19937_64* rng = nullptr);

/// Exact gradients of the mean cross-entropy over the batch, through both
/// recurrences and the dropout masks. Throws Error(usage) without a cache.
template <typename S>
Gradients<S> network_backward(const Network<S>& net, const std::optional<ForwardCache<S>>& cache,
                              const Matrix<S>& probs, const Matrix<S>& onehots);

inline constexpr double kProbabilityFloor = 1e-12;

/// -sum onehot_k * ln(max(p_k, 1e-12)); throws Error(label) for a bad one-hot.
double cross_entropy(std::span<const double> probs, std::span<const double> onehot);

/// Mean cross-entropy over the rows.
template <typename S>
double batch_cross_entropy(const Matrix<S>& probs, const Matrix<S>& onehots);

/// Glorot-uniform input/dense weights, per-gate orthogonal recurrent
/// weights, zero biases except forget gates (1.0). Deterministic per seed.
template <typename S>
Network<S> init_network(const NetworkSpec& spec, std::uint64_t seed);

template <typename S>
std::vector<std::span<S>> parameter_views(Network<S>& net);

template <typename S>
std::vector<std::span<const S>> parameter_views(const Network<S>& net);

template <typename S>
std::vector<std::span<const S>> gradient_views(const Gradients<S>& grads);

template <typename To, typename From>
Network<To> cast_network(const Network<From>& net);

}  // namespace leakdetect::nn
