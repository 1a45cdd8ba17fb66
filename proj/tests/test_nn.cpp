#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "leakdetect/error.hpp"
#include "leakdetect/nn/adam.hpp"
#include "leakdetect/nn/layers.hpp"
#include "leakdetect/nn/model_io.hpp"
#include "leakdetect/nn/network.hpp"
#include "support/gradcheck.hpp"

using namespace leakdetect;
using namespace leakdetect::nn;

namespace {

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::usage;
}

LstmLayer<double> zero_lstm(Index in, Index h, SequenceMode mode)
{
    LstmLayer<double> l;
    l.input_dim = in;
    l.hidden_dim = h;
    l.mode = mode;
    l.W = Matrix<double>::Zero(4 * h, in);
    l.U = Matrix<double>::Zero(4 * h, h);
    l.b = Vector<double>::Zero(4 * h);
    return l;
}

SequenceBatch<double> random_sequences(std::uint64_t seed, Index steps, Index batch, Index features)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    SequenceBatch<double> x(steps, batch, features);
    for (Index k = 0; k < x.data.size(); ++k) x.data.data()[k] = n(rng);
    return x;
}

}  // namespace

TEST(Lstm, ZeroWeightsGiveZeroOutput)
{
    const auto layer = zero_lstm(3, 5, SequenceMode::full_sequence);
    const auto y = lstm_forward(layer, random_sequences(1, 7, 2, 3), static_cast<LstmCache<double>*>(nullptr));
    EXPECT_EQ(y.steps, 7);
    EXPECT_EQ(y.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lstm, SingleStepHandEvaluation)
{
    auto layer = zero_lstm(1, 1, SequenceMode::last_step);
    layer.b << 30.0, 30.0, std::atanh(0.5), 30.0;  // i, f, g, o
    SequenceBatch<double> x(1, 1, 1);
    x.data(0, 0) = 0.7;
    const auto y = lstm_forward(layer, x, static_cast<LstmCache<double>*>(nullptr));
    EXPECT_NEAR(y.data(0, 0), std::tanh(0.5), 1e-9);
    EXPECT_NEAR(y.data(0, 0), 0.4621, 1e-4);
}

TEST(Lstm, BatchPermutationPermutesOutput)
{
    auto net = init_network<double>(testsupport::tiny_spec(), 3);
    const auto x = random_sequences(5, 6, 4, 1);
    SequenceBatch<double> xp(6, 4, 1);
    const int perm[4] = {2, 0, 3, 1};
    for (Index t = 0; t < 6; ++t)
        for (Index b = 0; b < 4; ++b) xp.data(t * 4 + b, 0) = x.data(t * 4 + perm[b], 0);
    const auto y = lstm_forward(net.lstm1, x, static_cast<LstmCache<double>*>(nullptr));
    const auto yp = lstm_forward(net.lstm1, xp, static_cast<LstmCache<double>*>(nullptr));
    for (Index t = 0; t < 6; ++t)
        for (Index b = 0; b < 4; ++b)
            EXPECT_EQ(yp.data.row(t * 4 + b), y.data.row(t * 4 + perm[b]));
}

TEST(Lstm, DimensionMismatch)
{
    const auto layer = zero_lstm(2, 3, SequenceMode::full_sequence);
    EXPECT_EQ(code_of([&] { lstm_forward(layer, random_sequences(1, 3, 1, 1), static_cast<LstmCache<double>*>(nullptr)); }),
              ErrorCode::dimension);
}

TEST(Dense, ReluIdentity)
{
    DenseLayer<double> d{2, 2, Activation::relu, Matrix<double>::Identity(2, 2), Vector<double>::Zero(2)};
    Matrix<double> x(1, 2);
    x << -1.0, 2.0;
    const auto y = dense_forward(d, x);
    EXPECT_EQ(y(0, 0), 0.0);
    EXPECT_EQ(y(0, 1), 2.0);
    Matrix<double> bad(1, 3);
    EXPECT_EQ(code_of([&] { dense_forward(d, bad); }), ErrorCode::dimension);
}

TEST(Softmax, UniformAndShiftInvariant)
{
    Matrix<double> z(3, 3);
    z << 0, 0, 0, 1, 2, 3, 11, 12, 13;
    softmax_rows(z);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(z(0, k), 1.0 / 3.0, 1e-15);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(z(1, k), z(2, k), 1e-15);
    Matrix<double> big(1, 3);
    big << 1000, -1000, 0;
    softmax_rows(big);
    EXPECT_TRUE(big.allFinite());
    EXPECT_NEAR(big.sum(), 1.0, 1e-15);
}

TEST(Dropout, InferencePassThrough)
{
    std::mt19937_64 rng(1);
    const Matrix<double> x = Matrix<double>::Random(5, 7);
    const auto out = dropout_forward(x, 0.3, rng, false);
    EXPECT_EQ(out.y, x);
    EXPECT_EQ(out.mask, Matrix<double>::Ones(5, 7));
    const auto zero_rate = dropout_forward(x, 0.0, rng, true);
    EXPECT_EQ(zero_rate.mask, Matrix<double>::Ones(5, 7));
}

TEST(Dropout, RateAndExpectation)
{
    std::mt19937_64 rng(11);
    const Matrix<double> x = Matrix<double>::Constant(1000, 100, 2.0);
    const auto out = dropout_forward(x, 0.3, rng, true);
    const double zeros = static_cast<double>((out.mask.array() == 0.0).count()) / 1e5;
    EXPECT_NEAR(zeros, 0.3, 0.01);
    EXPECT_NEAR(out.y.mean(), 2.0, 0.02);
    for (Index k = 0; k < out.mask.size(); ++k) {
        const double m = out.mask.data()[k];
        ASSERT_TRUE(m == 0.0 || std::abs(m - 1.0 / 0.7) < 1e-15);
    }
    EXPECT_EQ(code_of([&] { dropout_forward(x, 1.0, rng, true); }), ErrorCode::config);
}

TEST(CrossEntropy, Values)
{
    const std::array<double, 3> hot0{1, 0, 0};
    EXPECT_EQ(cross_entropy(hot0, hot0), 0.0);
    const std::array<double, 3> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
    EXPECT_NEAR(cross_entropy(uniform, std::array<double, 3>{0, 1, 0}), std::log(3.0), 1e-12);
    EXPECT_NEAR(cross_entropy(std::array<double, 3>{0.7, 0.2, 0.1}, hot0), 0.3567, 1e-4);
    EXPECT_NEAR(cross_entropy(std::array<double, 3>{0.0, 1.0, 0.0}, hot0), -std::log(kProbabilityFloor), 1e-9);
}

TEST(CrossEntropy, BadOneHot)
{
    const std::array<double, 3> p{0.2, 0.3, 0.5};
    EXPECT_EQ(code_of([&] { cross_entropy(p, std::array<double, 3>{1, 1, 0}); }), ErrorCode::label);
    EXPECT_EQ(code_of([&] { cross_entropy(p, std::array<double, 3>{0.5, 0.5, 0}); }), ErrorCode::label);
    EXPECT_EQ(code_of([&] { cross_entropy(p, std::array<double, 3>{0, 0, 0}); }), ErrorCode::label);
}

TEST(Network, ParameterCountOfFullStack)
{
    const auto net = init_network<float>(NetworkSpec{}, 1);
    EXPECT_EQ(net.parameter_count(), 132739u);
    const std::size_t by_formula = 4 * (128 * (1 + 128) + 128) + 4 * (64 * (128 + 64) + 64) + (64 * 128 + 128) +
                                   (128 * 64 + 64) + (64 * 3 + 3);
    EXPECT_EQ(net.parameter_count(), by_formula);
}

TEST(Network, InitDeterministicAndOrthogonal)
{
    const auto a = init_network<double>(NetworkSpec{}, 9);
    const auto b = init_network<double>(NetworkSpec{}, 9);
    const auto c = init_network<double>(NetworkSpec{}, 10);
    EXPECT_EQ(a.lstm1.U, b.lstm1.U);
    EXPECT_EQ(a.output.W, b.output.W);
    EXPECT_NE(a.lstm1.W, c.lstm1.W);
    for (const auto* l : {&a.lstm1, &a.lstm2}) {
        const Index h = l->hidden_dim;
        for (Index g = 0; g < 4; ++g) {
            const Matrix<double> block = l->U.middleRows(g * h, h);
            EXPECT_LT((block * block.transpose() - Matrix<double>::Identity(h, h)).cwiseAbs().maxCoeff(), 1e-6);
        }
        EXPECT_EQ(l->b.segment(h, h), Vector<double>::Ones(h));
        EXPECT_EQ(l->b.head(h), Vector<double>::Zero(h));
    }
    const double limit = std::sqrt(6.0 / (128.0 + 64.0));
    EXPECT_LE(a.dense1.W.cwiseAbs().maxCoeff(), limit);
}

TEST(Network, ProbabilitiesAreDistributions)
{
    const auto net = init_network<double>(testsupport::tiny_spec(), 2);
    const auto x = random_sequences(3, 9, 16, 1);
    const auto r = network_forward(net, x, false);
    EXPECT_FALSE(r.cache.has_value());
    for (Index b = 0; b < 16; ++b) {
        EXPECT_NEAR(r.probs.row(b).sum(), 1.0, 1e-6);
        EXPECT_GT(r.probs.row(b).minCoeff(), 0.0);
        EXPECT_LT(r.probs.row(b).maxCoeff(), 1.0);
    }
    EXPECT_EQ(network_forward(net, x, false).probs, r.probs);
}

TEST(Network, BatchIndependence)
{
    const auto net = init_network<double>(NetworkSpec{}, 4);
    const auto x = random_sequences(6, 20, 8, 1);
    const auto all = network_forward(net, x, false);
    for (Index b = 0; b < 8; ++b) {
        SequenceBatch<double> one(20, 1, 1);
        for (Index t = 0; t < 20; ++t) one.data(t, 0) = x.data(t * 8 + b, 0);
        const auto r = network_forward(net, one, false);
        EXPECT_LT((r.probs.row(0) - all.probs.row(b)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Network, SequenceLengthEnforced)
{
    auto net = init_network<double>(testsupport::tiny_spec(), 1);
    net.sequence_length = 10;
    EXPECT_EQ(code_of([&] { network_forward(net, random_sequences(1, 9, 2, 1), false); }), ErrorCode::dimension);
}

TEST(Network, UntrainedIsNearChance)
{
    // Balanced random data, labels unrelated to the input.
    const auto net = init_network<double>(NetworkSpec{}, 12);
    const auto x = random_sequences(13, 30, 300, 1);
    const auto r = network_forward(net, x, false);
    int correct = 0;
    for (Index b = 0; b < 300; ++b) {
        Index arg = 0;
        r.probs.row(b).maxCoeff(&arg);
        correct += arg == b % 3 ? 1 : 0;
    }
    EXPECT_NEAR(correct / 300.0, 1.0 / 3.0, 0.1);
}

TEST(Backward, RequiresCache)
{
    const auto net = init_network<double>(testsupport::tiny_spec(), 1);
    const auto r = network_forward(net, random_sequences(1, 4, 2, 1), false);
    EXPECT_EQ(code_of([&] { network_backward(net, r.cache, r.probs, Matrix<double>(Matrix<double>::Zero(2, 3))); }), ErrorCode::usage);
}

TEST(Backward, PerfectPredictionGivesZeroOutputGradient)
{
    const auto net = init_network<double>(testsupport::tiny_spec(0.0), 1);
    std::mt19937_64 rng(1);
    const auto r = network_forward(net, random_sequences(1, 4, 3, 1), true, &rng);
    const auto g = network_backward(net, r.cache, r.probs, r.probs);  // residual is zero
    EXPECT_EQ(g.output.W.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.output.b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, DuplicatedBatchGivesSameGradient)
{
    const auto net = init_network<double>(testsupport::tiny_spec(0.0), 5);
    SequenceBatch<double> x;
    Matrix<double> y;
    testsupport::random_batch(7, 5, 3, x, y);
    SequenceBatch<double> x2(5, 6, 1);
    Matrix<double> y2(6, 3);
    for (Index t = 0; t < 5; ++t)
        for (Index b = 0; b < 6; ++b) x2.data(t * 6 + b, 0) = x.data(t * 3 + b % 3, 0);
    for (Index b = 0; b < 6; ++b) y2.row(b) = y.row(b % 3);
    const auto r1 = network_forward(net, x, true);
    const auto r2 = network_forward(net, x2, true);
    const auto grads1 = network_backward(net, r1.cache, r1.probs, y);
    const auto grads2 = network_backward(net, r2.cache, r2.probs, y2);
    const auto g1 = gradient_views(grads1);
    const auto g2 = gradient_views(grads2);
    for (std::size_t t = 0; t < g1.size(); ++t)
        for (std::size_t i = 0; i < g1[t].size(); ++i) ASSERT_NEAR(g1[t][i], g2[t][i], 1e-14) << "tensor " << t << " index " << i;
}

TEST(Backward, MatchesFiniteDifferences)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = testsupport::gradient_check(seed);
        EXPECT_EQ(r.parameters, 235u);
        EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
    }
}

TEST(Adam, FirstStepMovesByLr)
{
    std::vector<double> theta{1.0, -2.0, 0.5};
    const std::vector<double> grad{3.0, -0.05, 1e4};
    AdamState<double> state;
    const std::vector<std::span<double>> p{theta};
    const std::vector<std::span<const double>> g{grad};
    adam_step<double>(p, g, state);
    const double lr = state.config.lr;
    const std::vector<double> before{1.0, -2.0, 0.5};
    for (std::size_t i = 0; i < 3; ++i) {
        const double step = before[i] - theta[i];
        EXPECT_EQ(std::signbit(step), std::signbit(grad[i]));
        EXPECT_GE(std::abs(step), lr * (1 - 1e-6));
        EXPECT_LE(std::abs(step), lr);
    }
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientIsFixedPoint)
{
    std::vector<double> theta{1.0, 2.0};
    const std::vector<double> grad{0.0, 0.0};
    AdamState<double> state;
    adam_step<double>(std::vector<std::span<double>>{theta}, std::vector<std::span<const double>>{grad}, state);
    EXPECT_EQ(theta, (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, ConvergesOnParabola)
{
    std::vector<double> theta{1.0};
    std::vector<double> grad{0.0};
    AdamConfig cfg;
    cfg.lr = 0.1;
    AdamState<double> state(cfg);
    for (int i = 0; i < 100; ++i) {
        grad[0] = 2.0 * theta[0];
        adam_step<double>(std::vector<std::span<double>>{theta}, std::vector<std::span<const double>>{grad}, state);
    }
    EXPECT_LT(std::abs(theta[0]), 0.5);
}

TEST(Adam, NonFiniteGradientDiverges)
{
    std::vector<double> theta{1.0};
    const std::vector<double> grad{std::nan("")};
    AdamState<double> state;
    EXPECT_EQ(code_of([&] {
                  adam_step<double>(std::vector<std::span<double>>{theta}, std::vector<std::span<const double>>{grad},
                                    state);
              }),
              ErrorCode::training_diverged);
    EXPECT_EQ(theta[0], 1.0);
    EXPECT_EQ(state.step, 0u);
}

// 50 full-batch Adam steps on 16 fixed samples should at least halve the loss.
TEST(Training, LossHalvesOnFixedBatch)
{
    int successes = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        NetworkSpec spec;
        spec.lstm1_units = 16;
        spec.lstm2_units = 8;
        spec.dense1_units = 16;
        spec.dense2_units = 8;
        spec.dropout_rate = 0.0;
        auto net = init_network<double>(spec, seed);
        SequenceBatch<double> x;
        Matrix<double> y;
        testsupport::random_batch(seed + 100, 20, 16, x, y);
        AdamConfig cfg;
        cfg.lr = 1e-2;
        AdamState<double> adam(cfg);
        double first = 0.0, last = 0.0;
        for (int step = 0; step < 50; ++step) {
            const auto r = network_forward(net, x, true);
            last = batch_cross_entropy(r.probs, y);
            if (step == 0) first = last;
            const auto g = network_backward(net, r.cache, r.probs, y);
            adam_step<double>(parameter_views(net), gradient_views(g), adam);
        }
        last = batch_cross_entropy(network_forward(net, x, false).probs, y);
        successes += last <= 0.5 * first ? 1 : 0;
    }
    EXPECT_GE(successes, 4);
}

TEST(ModelIo, RoundTripIsBitExact)
{
    auto net = init_network<float>(NetworkSpec{}, 3);
    net.norm = {1.7e6 + 0.123456789, 4.3e5 / 3.0};
    net.sequence_length = 200;
    std::stringstream ss;
    save_model(ss, net);
    const auto back = load_model<float>(ss);
    const auto a = parameter_views(net);
    const auto b = parameter_views(back);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t i = 0; i < a[t].size(); ++i) ASSERT_EQ(a[t][i], b[t][i]);
    EXPECT_TRUE(back.norm == net.norm);
    EXPECT_EQ(back.sequence_length, 200u);
    EXPECT_TRUE(back.spec == net.spec);

    std::vector<std::vector<double>> seqs(3, std::vector<double>(200));
    for (std::size_t i = 0; i < 200; ++i) seqs[i % 3][i] = std::sin(0.1 * static_cast<double>(i));
    const auto x = make_batch<float>(seqs);
    EXPECT_EQ(network_forward(net, x, false).probs, network_forward(back, x, false).probs);
}

TEST(ModelIo, DoubleRoundTrip)
{
    auto net = init_network<double>(testsupport::tiny_spec(), 8);
    net.sequence_length = 5;
    std::stringstream ss;
    save_model(ss, net);
    const auto back = load_model<double>(ss);
    EXPECT_EQ(back.lstm2.U, net.lstm2.U);
    EXPECT_EQ(back.dense2.b, net.dense2.b);
}

TEST(ModelIo, TruncatedFileIsAnError)
{
    auto net = init_network<float>(testsupport::tiny_spec(), 1);
    std::stringstream ss;
    save_model(ss, net);
    const std::string text = ss.str();
    for (std::size_t cut : {std::size_t{0}, text.size() / 3, text.size() / 2, text.size() - 3}) {
        std::stringstream trunc(text.substr(0, cut));
        EXPECT_EQ(code_of([&] { load_model<float>(trunc); }), ErrorCode::model_format) << "cut at " << cut;
    }
}

TEST(ModelIo, UnknownSchemaVersion)
{
    auto net = init_network<float>(testsupport::tiny_spec(), 1);
    net.schema_version = 7;
    std::stringstream ss;
    save_model(ss, net);
    try {
        load_model<float>(ss);
        FAIL() << "version 7 accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::schema_version);
        EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
    }
}

TEST(ModelIo, WrongShapeRejected)
{
    auto net = init_network<float>(testsupport::tiny_spec(), 1);
    std::stringstream ss;
    save_model(ss, net);
    std::string text = ss.str();
    const auto pos = text.find("\"hidden_dim\": 4");
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, 15, "\"hidden_dim\": 5");
    std::stringstream bad(text);
    EXPECT_EQ(code_of([&] { load_model<float>(bad); }), ErrorCode::model_format);
}

TEST(Adam, GlobalClipRescalesJointGradient)
{
    // With clipping, a gradient g behaves exactly like c*g/|g| unclipped.
    std::vector<double> p1{1.0, -2.0}, p2{1.0, -2.0};
    const std::vector<double> g{30.0, -40.0};  // norm 50
    const std::vector<double> g_scaled{0.6, -0.8};
    nn::AdamConfig clipped;
    clipped.global_clip_norm = 1.0;
    nn::AdamState<double> s1(clipped), s2{nn::AdamConfig{}};
    for (int i = 0; i < 3; ++i) {
        const std::vector<std::span<double>> v1{std::span(p1)}, v2{std::span(p2)};
        const std::vector<std::span<const double>> gv1{std::span(g)}, gv2{std::span(g_scaled)};
        nn::adam_step<double>(v1, gv1, s1);
        nn::adam_step<double>(v2, gv2, s2);
    }
    EXPECT_NEAR(p1[0], p2[0], 1e-15);
    EXPECT_NEAR(p1[1], p2[1], 1e-15);
    EXPECT_NEAR(s1.m[0][0], s2.m[0][0], 1e-15);
}

TEST(Adam, ClipLeavesSmallGradientsAlone)
{
    std::vector<double> p1{0.5}, p2{0.5};
    const std::vector<double> g{0.3};
    nn::AdamConfig clipped;
    clipped.global_clip_norm = 1.0;
    nn::AdamState<double> s1(clipped), s2{nn::AdamConfig{}};
    const std::vector<std::span<const double>> gv{std::span(g)};
    nn::adam_step<double>(std::vector<std::span<double>>{std::span(p1)}, gv, s1);
    nn::adam_step<double>(std::vector<std::span<double>>{std::span(p2)}, gv, s2);
    EXPECT_EQ(p1[0], p2[0]);
}
