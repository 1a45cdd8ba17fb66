#include "leakdetect/nn/network.hpp"

#include <Eigen/QR>
#include <array>
#include <cmath>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::nn {

namespace {

template <typename S>
void glorot_uniform(Matrix<S>& w, Index fan_in, Index fan_out, std::mt19937_64& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    S* p = w.data();
    for (Index k = 0; k < w.size(); ++k) p[k] = static_cast<S>(dist(rng));
}

// Square orthogonal matrix from the QR factorization of a Gaussian draw,
// with column signs fixed by diag(R) so the distribution is uniform.
Eigen::MatrixXd random_orthogonal(Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) a(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index c = 0; c < n; ++c) {
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
    }
    return q;
}

template <typename S>
LstmLayer<S> init_lstm(Index input_dim, Index hidden, SequenceMode mode, std::mt19937_64& rng)
{
    LstmLayer<S> layer;
    layer.input_dim = input_dim;
    layer.hidden_dim = hidden;
    layer.mode = mode;
    layer.W.resize(4 * hidden, input_dim);
    glorot_uniform(layer.W, input_dim, 4 * hidden, rng);
    layer.U.resize(4 * hidden, hidden);
    for (Index gate = 0; gate < 4; ++gate)
        layer.U.middleRows(gate * hidden, hidden) = random_orthogonal(hidden, rng).cast<S>();
    layer.b = Vector<S>::Zero(4 * hidden);
    layer.b.segment(hidden, hidden).setConstant(S(1));
    return layer;
}

template <typename S>
DenseLayer<S> init_dense(Index in, Index out, Activation activation, std::mt19937_64& rng)
{
    DenseLayer<S> layer;
    layer.input_dim = in;
    layer.output_dim = out;
    layer.activation = activation;
    layer.W.resize(out, in);
    glorot_uniform(layer.W, in, out, rng);
    layer.b = Vector<S>::Zero(out);
    return layer;
}

template <typename S>
auto relu_mask(const Matrix<S>& z)
{
    return (z.array() > S(0)).template cast<S>();
}

template <typename S>
DenseGrad<S> dense_grad(const Matrix<S>& dz, const Matrix<S>& input)
{
    return {dz.transpose() * input, dz.colwise().sum().transpose()};
}

template <typename T, typename M>
std::span<T> view(M& m)
{
    return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename To, typename From>
LstmLayer<To> cast_lstm(const LstmLayer<From>& l)
{
    return {l.input_dim, l.hidden_dim, l.mode, l.W.template cast<To>(), l.U.template cast<To>(),
            l.b.template cast<To>()};
}

template <typename To, typename From>
DenseLayer<To> cast_dense(const DenseLayer<From>& l)
{
    return {l.input_dim, l.output_dim, l.activation, l.W.template cast<To>(), l.b.template cast<To>()};
}

}  // namespace

void NetworkSpec::validate() const
{
    if (input_dim <= 0 || lstm1_units <= 0 || lstm2_units <= 0 || dense1_units <= 0 || dense2_units <= 0 ||
        num_classes <= 0)
        throw Error(ErrorCode::config, "network layer sizes must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw Error(ErrorCode::config, "dropout rate must lie in [0, 1)");
}

template <typename S>
std::size_t Network<S>::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& v : parameter_views(*this)) n += v.size();
    return n;
}

template <typename S>
void Network<S>::check() const
{
    spec.validate();
    lstm1.check();
    lstm2.check();
    dense1.check();
    dense2.check();
    output.check();
    const auto link = [](Index from, Index to, const char* where) {
        if (from != to)
            throw Error(ErrorCode::dimension, std::string("layer chain broken at ") + where + ": " +
                                                  std::to_string(from) + " != " + std::to_string(to));
    };
    link(spec.input_dim, lstm1.input_dim, "input -> lstm1");
    link(spec.lstm1_units, lstm1.hidden_dim, "lstm1 width");
    link(lstm1.hidden_dim, lstm2.input_dim, "lstm1 -> lstm2");
    link(spec.lstm2_units, lstm2.hidden_dim, "lstm2 width");
    link(lstm2.hidden_dim, dense1.input_dim, "lstm2 -> dense1");
    link(spec.dense1_units, dense1.output_dim, "dense1 width");
    link(dense1.output_dim, dense2.input_dim, "dense1 -> dense2");
    link(spec.dense2_units, dense2.output_dim, "dense2 width");
    link(dense2.output_dim, output.input_dim, "dense2 -> output");
    link(spec.num_classes, output.output_dim, "output width");
    if (lstm1.mode != SequenceMode::full_sequence || lstm2.mode != SequenceMode::last_step)
        throw Error(ErrorCode::dimension, "lstm1 must return all steps and lstm2 only the last step");
    if (dense1.activation != Activation::relu || dense2.activation != Activation::relu ||
        output.activation != Activation::softmax)
        throw Error(ErrorCode::dimension, "dense activations must be relu, relu, softmax");
}

template <typename S>
SequenceBatch<S> make_batch(std::span<const std::vector<double>> sequences)
{
    if (sequences.empty()) throw Error(ErrorCode::dimension, "batch is empty");
    const auto steps = static_cast<Index>(sequences.front().size());
    const auto batch = static_cast<Index>(sequences.size());
    SequenceBatch<S> x(steps, batch, 1);
    for (Index b = 0; b < batch; ++b) {
        const auto& seq = sequences[static_cast<std::size_t>(b)];
        if (static_cast<Index>(seq.size()) != steps)
            throw Error(ErrorCode::dimension, "sequences in a batch must share one length");
        for (Index t = 0; t < steps; ++t) x.data(t * batch + b, 0) = static_cast<S>(seq[static_cast<std::size_t>(t)]);
    }
    return x;
}

template <typename S>
ForwardResult<S> network_forward(const Network<S>& net, const SequenceBatch<S>& x, bool training,
                                 std::mt19937_64* rng)
{
    if (net.sequence_length != 0 && static_cast<std::size_t>(x.steps) != net.sequence_length)
        throw Error(ErrorCode::dimension, "network expects sequences of length " +
                                              std::to_string(net.sequence_length) + ", got " +
                                              std::to_string(x.steps));
    if (x.features() != net.spec.input_dim)
        throw Error(ErrorCode::dimension, "network expects " + std::to_string(net.spec.input_dim) +
                                              " input features, got " + std::to_string(x.features()));

    ForwardResult<S> result;
    if (!training) {
        SequenceBatch<S> h1 = lstm_forward<S>(net.lstm1, x, nullptr);
        SequenceBatch<S> h2 = lstm_forward<S>(net.lstm2, h1, nullptr);
        result.probs = dense_forward(net.output, dense_forward(net.dense2, dense_forward(net.dense1, h2.data)));
        return result;
    }

    const bool needs_rng = net.dropout1.rate > 0.0 || net.dropout2.rate > 0.0;
    if (needs_rng && rng == nullptr) throw Error(ErrorCode::usage, "training forward with dropout needs an rng");
    std::mt19937_64 unused;
    std::mt19937_64& gen = rng ? *rng : unused;

    auto& cache = result.cache.emplace();
    SequenceBatch<S> h1 = lstm_forward(net.lstm1, x, &cache.lstm1);
    auto drop1 = dropout_forward(h1.data, net.dropout1.rate, gen, true);
    h1.data = std::move(drop1.y);
    cache.mask1 = std::move(drop1.mask);

    SequenceBatch<S> h2 = lstm_forward(net.lstm2, h1, &cache.lstm2);
    auto drop2 = dropout_forward(h2.data, net.dropout2.rate, gen, true);
    cache.dense_input = std::move(drop2.y);
    cache.mask2 = std::move(drop2.mask);

    cache.z1 = cache.dense_input * net.dense1.W.transpose();
    cache.z1.rowwise() += net.dense1.b.transpose();
    cache.a1 = cache.z1.cwiseMax(S(0));
    cache.z2 = cache.a1 * net.dense2.W.transpose();
    cache.z2.rowwise() += net.dense2.b.transpose();
    cache.a2 = cache.z2.cwiseMax(S(0));
    result.probs = dense_forward(net.output, cache.a2);
    return result;
}

template <typename S>
Gradients<S> network_backward(const Network<S>& net, const std::optional<ForwardCache<S>>& cache,
                              const Matrix<S>& probs, const Matrix<S>& onehots)
{
    if (!cache) throw Error(ErrorCode::usage, "network_backward needs the cache of a training-mode forward");
    const ForwardCache<S>& c = *cache;
    if (probs.rows() != onehots.rows() || probs.cols() != onehots.cols() || probs.rows() != c.a2.rows())
        throw Error(ErrorCode::dimension, "probs, onehots and cache disagree on batch shape");

    Gradients<S> g;
    // Fused softmax + mean cross-entropy.
    const Matrix<S> dz3 = (probs - onehots) / static_cast<S>(probs.rows());
    g.output = dense_grad(dz3, c.a2);

    const Matrix<S> dz2 = ((dz3 * net.output.W).array() * relu_mask(c.z2)).matrix();
    g.dense2 = dense_grad(dz2, c.a1);

    const Matrix<S> dz1 = ((dz2 * net.dense2.W).array() * relu_mask(c.z1)).matrix();
    g.dense1 = dense_grad(dz1, c.dense_input);

    const Matrix<S> dh2 = (dz1 * net.dense1.W).cwiseProduct(c.mask2);
    g.lstm2 = LstmGrad<S>::zeros_like(net.lstm2);
    const Matrix<S> dh1 = lstm_backward(net.lstm2, c.lstm2, dh2, g.lstm2).cwiseProduct(c.mask1);

    g.lstm1 = LstmGrad<S>::zeros_like(net.lstm1);
    lstm_backward(net.lstm1, c.lstm1, dh1, g.lstm1);
    return g;
}

double cross_entropy(std::span<const double> probs, std::span<const double> onehot)
{
    if (probs.size() != onehot.size() || probs.empty())
        throw Error(ErrorCode::dimension, "probs and one-hot must have the same non-zero length");
    int hot = 0;
    for (double y : onehot) {
        if (y == 1.0) {
            ++hot;
        } else if (y != 0.0) {
            throw Error(ErrorCode::label, "one-hot entries must be 0 or 1");
        }
    }
    if (hot != 1) throw Error(ErrorCode::label, "one-hot label must have exactly one hot entry");

    double sum = 0.0;
    for (double p : probs) sum += p;
    if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::data, "probabilities must sum to 1");

    double loss = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (onehot[k] != 0.0) loss -= onehot[k] * std::log(std::clamp(probs[k], kProbabilityFloor, 1.0));
    }
    return loss;
}

template <typename S>
double batch_cross_entropy(const Matrix<S>& probs, const Matrix<S>& onehots)
{
    if (probs.rows() == 0) throw Error(ErrorCode::dimension, "empty batch");
    if (probs.rows() != onehots.rows() || probs.cols() != onehots.cols())
        throw Error(ErrorCode::dimension, "probs and onehots differ in shape");
    const auto k = static_cast<std::size_t>(probs.cols());
    std::vector<double> p(k), y(k);
    double total = 0.0;
    for (Index r = 0; r < probs.rows(); ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            p[j] = static_cast<double>(probs(r, static_cast<Index>(j)));
            y[j] = static_cast<double>(onehots(r, static_cast<Index>(j)));
        }
        total += cross_entropy(p, y);
    }
    return total / static_cast<double>(probs.rows());
}

template <typename S>
Network<S> init_network(const NetworkSpec& spec, std::uint64_t seed)
{
    spec.validate();
    std::mt19937_64 rng(seed);
    Network<S> net;
    net.spec = spec;
    net.lstm1 = init_lstm<S>(spec.input_dim, spec.lstm1_units, SequenceMode::full_sequence, rng);
    net.dropout1.rate = spec.dropout_rate;
    net.lstm2 = init_lstm<S>(spec.lstm1_units, spec.lstm2_units, SequenceMode::last_step, rng);
    net.dropout2.rate = spec.dropout_rate;
    net.dense1 = init_dense<S>(spec.lstm2_units, spec.dense1_units, Activation::relu, rng);
    net.dense2 = init_dense<S>(spec.dense1_units, spec.dense2_units, Activation::relu, rng);
    net.output = init_dense<S>(spec.dense2_units, spec.num_classes, Activation::softmax, rng);
    return net;
}

template <typename S>
std::vector<std::span<S>> parameter_views(Network<S>& net)
{
    return {view<S>(net.lstm1.W),  view<S>(net.lstm1.U), view<S>(net.lstm1.b),  view<S>(net.lstm2.W),
            view<S>(net.lstm2.U),  view<S>(net.lstm2.b), view<S>(net.dense1.W), view<S>(net.dense1.b),
            view<S>(net.dense2.W), view<S>(net.dense2.b), view<S>(net.output.W), view<S>(net.output.b)};
}

template <typename S>
std::vector<std::span<const S>> parameter_views(const Network<S>& net)
{
    return {view<const S>(net.lstm1.W),  view<const S>(net.lstm1.U),  view<const S>(net.lstm1.b),
            view<const S>(net.lstm2.W),  view<const S>(net.lstm2.U),  view<const S>(net.lstm2.b),
            view<const S>(net.dense1.W), view<const S>(net.dense1.b), view<const S>(net.dense2.W),
            view<const S>(net.dense2.b), view<const S>(net.output.W), view<const S>(net.output.b)};
}

template <typename S>
std::vector<std::span<const S>> gradient_views(const Gradients<S>& g)
{
    return {view<const S>(g.lstm1.W),  view<const S>(g.lstm1.U),  view<const S>(g.lstm1.b),
            view<const S>(g.lstm2.W),  view<const S>(g.lstm2.U),  view<const S>(g.lstm2.b),
            view<const S>(g.dense1.W), view<const S>(g.dense1.b), view<const S>(g.dense2.W),
            view<const S>(g.dense2.b), view<const S>(g.output.W), view<const S>(g.output.b)};
}

template <typename To, typename From>
Network<To> cast_network(const Network<From>& net)
{
    Network<To> out;
    out.spec = net.spec;
    out.lstm1 = cast_lstm<To>(net.lstm1);
    out.dropout1 = net.dropout1;
    out.lstm2 = cast_lstm<To>(net.lstm2);
    out.dropout2 = net.dropout2;
    out.dense1 = cast_dense<To>(net.dense1);
    out.dense2 = cast_dense<To>(net.dense2);
    out.output = cast_dense<To>(net.output);
    out.norm = net.norm;
    out.sequence_length = net.sequence_length;
    out.schema_version = net.schema_version;
    return out;
}

#define LEAKDETECT_INSTANTIATE_NETWORK(S)                                                                  \
    template struct Network<S>;                                                                            \
    template SequenceBatch<S> make_batch<S>(std::span<const std::vector<double>>);                         \
    template ForwardResult<S> network_forward(const Network<S>&, const SequenceBatch<S>&, bool,            \
                                              std::mt19937_64*);                                           \
    template Gradients<S> network_backward(const Network<S>&, const std::optional<ForwardCache<S>>&,       \
                                           const Matrix<S>&, const Matrix<S>&);                            \
    template double batch_cross_entropy(const Matrix<S>&, const Matrix<S>&);                               \
    template Network<S> init_network<S>(const NetworkSpec&, std::uint64_t);                                \
    template std::vector<std::span<S>> parameter_views(Network<S>&);                                       \
    template std::vector<std::span<const S>> parameter_views(const Network<S>&);                           \
    template std::vector<std::span<const S>> gradient_views(const Gradients<S>&);

LEAKDETECT_INSTANTIATE_NETWORK(float)
LEAKDETECT_INSTANTIATE_NETWORK(double)

template Network<float> cast_network<float, double>(const Network<double>&);
template Network<double> cast_network<double, float>(const Network<float>&);
template Network<float> cast_network<float, float>(const Network<float>&);
template Network<double> cast_network<double, double>(const Network<double>&);

}  // namespace leakdetect::nn
