#pragma once

#include <random>

#include "leakdetect/nn/tensor.hpp"

namespace leakdetect::nn {

enum class SequenceMode { full_sequence, last_step };
enum class Activation { none, relu, softmax };

/// Gate blocks are stacked in the order [input, forget, cell, output].
template <typename S>
struct LstmLayer {
    Index input_dim = 0;
    Index hidden_dim = 0;
    SequenceMode mode = SequenceMode::full_sequence;
    Matrix<S> W;  // 4H x input
    Matrix<S> U;  // 4H x H
    Vector<S> b;  // 4H

    void check() const;
};

template <typename S>
struct DenseLayer {
    Index input_dim = 0;
    Index output_dim = 0;
    Activation activation = Activation::none;
    Matrix<S> W;  // out x in
    Vector<S> b;  // out

    void check() const;
};

struct DropoutSpec {
    double rate = 0.3;
};

/// Per-step activations kept for backpropagation through time.
template <typename S>
struct LstmCache {
    SequenceBatch<S> input;
    Matrix<S> gates;      // post-activation i, f, g, o; (T*B) x 4H
    Matrix<S> cell;       // (T*B) x H
    Matrix<S> cell_tanh;  // (T*B) x H
    Matrix<S> hidden;     // (T*B) x H
};

template <typename S>
struct LstmGrad {
    Matrix<S> W;
    Matrix<S> U;
    Vector<S> b;

    static LstmGrad zeros_like(const LstmLayer<S>& layer);
};

template <typename S>
struct DenseGrad {
    Matrix<S> W;
    Vector<S> b;
};

/**
 * Runs the LSTM recurrence from h0 = c0 = 0 over every step of the batch.
 * Returns all hidden states (full_sequence) or only the last one as a
 * one-step batch (last_step). When `cache` is non-null it is filled for
 * lstm_backward.
 */
template <typename S>
SequenceBatch<S> lstm_forward(const LstmLayer<S>& layer, const SequenceBatch<S>& x, LstmCache<S>* cache);

/// Accumulates parameter gradients into `grad` and returns the gradient
/// w.r.t. the layer input, (T*B) x input_dim. `d_out` is (T*B) x H for
/// full_sequence layers and B x H for last_step layers.
template <typename S>
Matrix<S> lstm_backward(const LstmLayer<S>& layer, const LstmCache<S>& cache, const Matrix<S>& d_out,
                        LstmGrad<S>& grad);

/// y = activation(x W^T + b), one sample per row.
template <typename S>
Matrix<S> dense_forward(const DenseLayer<S>& layer, const Matrix<S>& x);

/// Numerically stable in-place softmax of each row.
template <typename S>
void softmax_rows(Matrix<S>& logits);

template <typename S>
struct DropoutOutput {
    Matrix<S> y;
    Matrix<S> mask;  // entries 0 or 1/(1-rate)
};

/// Inverted dropout. In inference mode (or rate 0) the mask is all ones
/// and no random numbers are drawn.
template <typename S>
DropoutOutput<S> dropout_forward(const Matrix<S>& x, double rate, std::mt19937_64& rng, bool training);

}  // namespace leakdetect::nn
