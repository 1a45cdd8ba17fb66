#include "leakdetect/nn/layers.hpp"

#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::nn {

namespace {

[[noreturn]] void dimension_error(const std::string& what) { throw Error(ErrorCode::dimension, what); }

std::string shape(Index rows, Index cols) { return std::to_string(rows) + "x" + std::to_string(cols); }

// In-place gate nonlinearities on a B x 4H block.
template <typename Block>
void activate_gates(Block&& gates, Index h)
{
    gates.leftCols(2 * h) = gates.leftCols(2 * h).array().logistic();
    gates.middleCols(2 * h, h) = gates.middleCols(2 * h, h).array().tanh();
    gates.rightCols(h) = gates.rightCols(h).array().logistic();
}

}  // namespace

template <typename S>
void LstmLayer<S>::check() const
{
    if (input_dim <= 0 || hidden_dim <= 0) dimension_error("lstm dims must be positive");
    if (W.rows() != 4 * hidden_dim || W.cols() != input_dim)
        dimension_error("lstm W is " + shape(W.rows(), W.cols()) + ", expected " + shape(4 * hidden_dim, input_dim));
    if (U.rows() != 4 * hidden_dim || U.cols() != hidden_dim)
        dimension_error("lstm U is " + shape(U.rows(), U.cols()) + ", expected " +
                        shape(4 * hidden_dim, hidden_dim));
    if (b.size() != 4 * hidden_dim) dimension_error("lstm b has wrong length");
}

template <typename S>
void DenseLayer<S>::check() const
{
    if (input_dim <= 0 || output_dim <= 0) dimension_error("dense dims must be positive");
    if (W.rows() != output_dim || W.cols() != input_dim)
        dimension_error("dense W is " + shape(W.rows(), W.cols()) + ", expected " + shape(output_dim, input_dim));
    if (b.size() != output_dim) dimension_error("dense b has wrong length");
}

template <typename S>
LstmGrad<S> LstmGrad<S>::zeros_like(const LstmLayer<S>& layer)
{
    return {Matrix<S>::Zero(layer.W.rows(), layer.W.cols()), Matrix<S>::Zero(layer.U.rows(), layer.U.cols()),
            Vector<S>::Zero(layer.b.size())};
}

template <typename S>
SequenceBatch<S> lstm_forward(const LstmLayer<S>& layer, const SequenceBatch<S>& x, LstmCache<S>* cache)
{
    if (x.steps <= 0 || x.batch <= 0) dimension_error("lstm input sequence is empty");
    if (x.features() != layer.input_dim)
        dimension_error("lstm expects " + std::to_string(layer.input_dim) + " input features, got " +
                        std::to_string(x.features()));
    if (x.data.rows() != x.steps * x.batch) dimension_error("sequence batch rows != steps * batch");

    const Index steps = x.steps;
    const Index batch = x.batch;
    const Index h = layer.hidden_dim;

    // Input projection for every step at once; only the recurrence is sequential.
    Matrix<S> projected = x.data * layer.W.transpose();
    projected.rowwise() += layer.b.transpose();

    if (cache) {
        cache->input = x;
        cache->gates.resize(steps * batch, 4 * h);
        cache->cell.resize(steps * batch, h);
        cache->cell_tanh.resize(steps * batch, h);
        cache->hidden.resize(steps * batch, h);
    }

    const bool full = layer.mode == SequenceMode::full_sequence;
    SequenceBatch<S> out(full ? steps : 1, batch, h);

    Matrix<S> gates(batch, 4 * h);
    Matrix<S> hidden = Matrix<S>::Zero(batch, h);
    Matrix<S> cell = Matrix<S>::Zero(batch, h);
    Matrix<S> cell_tanh(batch, h);

    for (Index t = 0; t < steps; ++t) {
        gates = projected.middleRows(t * batch, batch);
        if (t > 0) gates.noalias() += hidden * layer.U.transpose();
        activate_gates(gates, h);

        cell = gates.middleCols(h, h).cwiseProduct(cell) + gates.leftCols(h).cwiseProduct(gates.middleCols(2 * h, h));
        cell_tanh = cell.array().tanh();
        hidden = gates.rightCols(h).cwiseProduct(cell_tanh);

        if (cache) {
            cache->gates.middleRows(t * batch, batch) = gates;
            cache->cell.middleRows(t * batch, batch) = cell;
            cache->cell_tanh.middleRows(t * batch, batch) = cell_tanh;
            cache->hidden.middleRows(t * batch, batch) = hidden;
        }
        if (full) out.at(t) = hidden;
    }
    if (!full) out.data = hidden;
    return out;
}

template <typename S>
Matrix<S> lstm_backward(const LstmLayer<S>& layer, const LstmCache<S>& cache, const Matrix<S>& d_out,
                        LstmGrad<S>& grad)
{
    const Index steps = cache.input.steps;
    const Index batch = cache.input.batch;
    const Index h = layer.hidden_dim;
    const bool full = layer.mode == SequenceMode::full_sequence;

    if (cache.gates.rows() != steps * batch || cache.gates.cols() != 4 * h)
        throw Error(ErrorCode::usage, "lstm cache does not match the layer");
    const Index expected_rows = full ? steps * batch : batch;
    if (d_out.rows() != expected_rows || d_out.cols() != h)
        dimension_error("lstm output gradient is " + shape(d_out.rows(), d_out.cols()) + ", expected " +
                        shape(expected_rows, h));

    Matrix<S> d_gates(steps * batch, 4 * h);
    Matrix<S> dh_next = Matrix<S>::Zero(batch, h);
    Matrix<S> dc_next = Matrix<S>::Zero(batch, h);
    Matrix<S> dh(batch, h);
    Matrix<S> dc(batch, h);

    for (Index t = steps - 1; t >= 0; --t) {
        const Index row = t * batch;
        if (full) {
            dh = d_out.middleRows(row, batch) + dh_next;
        } else if (t == steps - 1) {
            dh = d_out + dh_next;
        } else {
            dh = dh_next;
        }

        const auto g_all = cache.gates.middleRows(row, batch);
        const auto i = g_all.leftCols(h).array();
        const auto f = g_all.middleCols(h, h).array();
        const auto g = g_all.middleCols(2 * h, h).array();
        const auto o = g_all.rightCols(h).array();
        const auto tc = cache.cell_tanh.middleRows(row, batch).array();

        dc = (dh.array() * o * (S(1) - tc.square()) + dc_next.array()).matrix();

        auto da = d_gates.middleRows(row, batch);
        da.leftCols(h) = (dc.array() * g * i * (S(1) - i)).matrix();
        if (t > 0) {
            const auto c_prev = cache.cell.middleRows(row - batch, batch).array();
            da.middleCols(h, h) = (dc.array() * c_prev * f * (S(1) - f)).matrix();
        } else {
            da.middleCols(h, h).setZero();
        }
        da.middleCols(2 * h, h) = (dc.array() * i * (S(1) - g.square())).matrix();
        da.rightCols(h) = (dh.array() * tc * o * (S(1) - o)).matrix();

        dc_next = (dc.array() * f).matrix();
        dh_next.noalias() = da * layer.U;
    }

    grad.W.noalias() += d_gates.transpose() * cache.input.data;
    if (steps > 1) {
        const Index n = (steps - 1) * batch;
        grad.U.noalias() += d_gates.bottomRows(n).transpose() * cache.hidden.topRows(n);
    }
    grad.b += d_gates.colwise().sum().transpose();

    return d_gates * layer.W;
}

template <typename S>
Matrix<S> dense_forward(const DenseLayer<S>& layer, const Matrix<S>& x)
{
    if (x.cols() != layer.input_dim)
        dimension_error("dense expects " + std::to_string(layer.input_dim) + " inputs, got " +
                        std::to_string(x.cols()));
    Matrix<S> y = x * layer.W.transpose();
    y.rowwise() += layer.b.transpose();
    switch (layer.activation) {
    case Activation::relu: y = y.cwiseMax(S(0)); break;
    case Activation::softmax: softmax_rows(y); break;
    case Activation::none: break;
    }
    return y;
}

template <typename S>
void softmax_rows(Matrix<S>& logits)
{
    for (Index r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
}

template <typename S>
DropoutOutput<S> dropout_forward(const Matrix<S>& x, double rate, std::mt19937_64& rng, bool training)
{
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::config, "dropout rate must lie in [0, 1)");
    DropoutOutput<S> out;
    if (!training || rate == 0.0) {
        out.y = x;
        out.mask = Matrix<S>::Ones(x.rows(), x.cols());
        return out;
    }
    const S scale = static_cast<S>(1.0 / (1.0 - rate));
    std::bernoulli_distribution keep(1.0 - rate);
    out.mask.resize(x.rows(), x.cols());
    S* m = out.mask.data();
    for (Index k = 0; k < out.mask.size(); ++k) m[k] = keep(rng) ? scale : S(0);
    out.y = x.cwiseProduct(out.mask);
    return out;
}

#define LEAKDETECT_INSTANTIATE_LAYERS(S)                                                                   \
    template struct LstmLayer<S>;                                                                          \
    template struct DenseLayer<S>;                                                                         \
    template struct LstmGrad<S>;                                                                           \
    template SequenceBatch<S> lstm_forward(const LstmLayer<S>&, const SequenceBatch<S>&, LstmCache<S>*);   \
    template Matrix<S> lstm_backward(const LstmLayer<S>&, const LstmCache<S>&, const Matrix<S>&,          \
                                     LstmGrad<S>&);                                                       \
    template Matrix<S> dense_forward(const DenseLayer<S>&, const Matrix<S>&);                              \
    template void softmax_rows(Matrix<S>&);                                                                \
    template DropoutOutput<S> dropout_forward(const Matrix<S>&, double, std::mt19937_64&, bool);

LEAKDETECT_INSTANTIATE_LAYERS(float)
LEAKDETECT_INSTANTIATE_LAYERS(double)

}  // namespace leakdetect::nn
