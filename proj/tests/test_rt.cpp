#include <gtest/gtest.h>

#include <cmath>

#include "leakdetect/error.hpp"
#include "leakdetect/rt/detector.hpp"
#include "leakdetect/signal/normalize.hpp"
#include "leakdetect/train/trainer.hpp"

using namespace leakdetect;

namespace {

constexpr std::size_t kLength = 24;

rt::RuntimeNetwork small_net(std::uint64_t seed, const NormStats& norm)
{
    nn::NetworkSpec spec;
    spec.lstm1_units = 8;
    spec.lstm2_units = 6;
    spec.dense1_units = 8;
    spec.dense2_units = 6;
    auto net = nn::init_network<nn::RuntimeScalar>(spec, seed);
    net.norm = norm;
    net.sequence_length = kLength;
    return net;
}

sim::Trace simulated(sim::LeakClass c, std::uint64_t seed, int cycles = 4)
{
    sim::SimConfig cfg;
    cfg.seed = seed;
    cfg.n_cycles = cycles;
    return sim::run_cycles(sim::ActuatorParams{}, cfg, c);
}

NormStats trace_norm(const sim::Trace& t)
{
    double mean = 0.0;
    for (double p : t.p1) mean += p;
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double p : t.p1) var += (p - mean) * (p - mean);
    return {mean, std::sqrt(var / static_cast<double>(t.size()))};
}

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

}  // namespace

TEST(CycleTracker, ConstantCommandNeverEmits)
{
    rt::CycleTracker tr(3, 1000);
    for (int i = 0; i < 500; ++i) EXPECT_FALSE(tr.push(i * 1e-3, 1.0, 1));
    EXPECT_EQ(tr.buffered(), 500u);
}

TEST(CycleTracker, EmitsOnFlip)
{
    rt::CycleTracker tr(3, 100);
    for (int i = 0; i < 5; ++i) EXPECT_FALSE(tr.push(i, 10.0 + i, 1));
    const auto done = tr.push(5, 99.0, -1);
    ASSERT_TRUE(done);
    EXPECT_EQ(done->samples, (std::vector<double>{10, 11, 12, 13, 14}));
    EXPECT_EQ(done->direction, signal::Direction::extend);
    EXPECT_EQ(tr.buffered(), 1u);
}

TEST(CycleTracker, ShortCycleDiscarded)
{
    rt::CycleTracker tr(3, 100);
    tr.push(0, 1, 1);
    tr.push(1, 1, 1);
    EXPECT_FALSE(tr.push(2, 1, -1));
    EXPECT_EQ(tr.buffered(), 1u);
    tr.push(3, 2, -1);
    tr.push(4, 3, -1);
    const auto done = tr.push(5, 4, 1);
    ASSERT_TRUE(done);
    EXPECT_EQ(done->direction, signal::Direction::retract);
    EXPECT_EQ(done->samples.size(), 3u);
}

TEST(CycleTracker, Errors)
{
    rt::CycleTracker tr(3, 100);
    tr.push(1.0, 1, 1);
    EXPECT_EQ(code_of([&] { tr.push(1.0, 1, 1); }), ErrorCode::ordering);
    EXPECT_EQ(code_of([&] { tr.push(0.5, 1, 1); }), ErrorCode::ordering);
    EXPECT_EQ(code_of([&] { tr.push(2.0, 1, 0); }), ErrorCode::data);
}

TEST(CycleTracker, StuckCycleBoundsMemory)
{
    rt::CycleTracker tr(3, 10);
    for (int i = 0; i < 10; ++i) tr.push(i, 1, 1);
    EXPECT_EQ(tr.buffered(), 10u);
    EXPECT_EQ(code_of([&] { tr.push(10, 1, 1); }), ErrorCode::stuck_cycle);
    EXPECT_EQ(tr.buffered(), 0u);
    // The tracker keeps working after the error.
    for (int i = 11; i < 15; ++i) tr.push(i, 1, 1);
    EXPECT_TRUE(tr.push(15, 1, -1));
}

TEST(Latency, EmptyReportRejected)
{
    EXPECT_EQ(code_of([] { rt::make_latency_report({}, {}); }), ErrorCode::empty_report);
}

TEST(Latency, SingleCycle)
{
    const auto r = rt::make_latency_report({0.004}, {0.001});
    EXPECT_EQ(r.count, 1u);
    EXPECT_EQ(r.total.mean, r.total.max);
    EXPECT_EQ(r.total.p95, 0.004);
    EXPECT_EQ(r.preprocess.mean, 0.001);
}

TEST(Latency, NearestRankPercentile)
{
    std::vector<double> l;
    for (int i = 1; i <= 100; ++i) l.push_back(i * 1e-3);
    const auto r = rt::make_latency_report(l, std::vector<double>(100, 0.0));
    EXPECT_DOUBLE_EQ(r.total.p95, 0.095);
    EXPECT_DOUBLE_EQ(r.total.max, 0.1);
    EXPECT_NEAR(r.total.mean, 0.0505, 1e-12);
}

TEST(Detector, MatchesOfflineEvaluation)
{
    for (auto c : {sim::LeakClass::NoLeak, sim::LeakClass::HighLeak}) {
        const auto trace = simulated(c, 11);
        const auto net = small_net(4, trace_norm(trace));

        // Offline: segment, resample, z-score, batched evaluation.
        const auto segments = signal::segment_cycles(trace);
        std::vector<signal::SequenceSample> samples;
        for (const auto& seg : segments) {
            if (seg.end_index == trace.size()) continue;  // never closed by a flip
            signal::SequenceSample s;
            for (double v : signal::resample(seg.samples, kLength)) s.values.push_back(net.norm.apply(v));
            s.label = c;
            s.onehot = signal::onehot(c);
            samples.push_back(std::move(s));
        }
        const auto offline = train::evaluate(net, samples);

        rt::DetectorConfig cfg;
        cfg.max_cycle_samples = 100000;
        rt::Detector det(net, cfg);
        std::vector<rt::Classification> online;
        for (std::size_t i = 0; i < trace.size(); ++i)
            if (auto r = det.push_sample(trace.t[i], trace.p1[i], trace.u[i])) online.push_back(*r);

        ASSERT_EQ(online.size(), samples.size());
        ASSERT_GE(online.size(), 7u);
        for (std::size_t k = 0; k < online.size(); ++k) {
            EXPECT_EQ(online[k].cycle_index, k);
            EXPECT_EQ(static_cast<int>(online[k].predicted), offline.predictions[k]);
            EXPECT_EQ(online[k].samples, segments[k].samples.size());
            EXPECT_EQ(online[k].direction, segments[k].direction);
            for (int j = 0; j < 3; ++j) EXPECT_NEAR(online[k].probs[j], offline.scores[k][j], 1e-5);
            EXPECT_GT(online[k].latency, 0.0);
            EXPECT_LE(online[k].preprocess_latency, online[k].latency);
        }
        EXPECT_EQ(det.latency_report().count, online.size());
    }
}

TEST(Detector, BufferNeverExceedsCapacity)
{
    const auto trace = simulated(sim::LeakClass::LowLeak, 2, 3);
    rt::Detector det(small_net(1, trace_norm(trace)));
    EXPECT_EQ(det.buffer_capacity(), 10 * kLength);
    std::size_t peak = 0;
    try {
        for (std::size_t i = 0; i < trace.size(); ++i) {
            det.push_sample(trace.t[i], trace.p1[i], trace.u[i]);
            peak = std::max(peak, det.buffered());
        }
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::stuck_cycle);
    }
    EXPECT_LE(peak, det.buffer_capacity());
}

TEST(AsyncDetector, SameResultsInOrder)
{
    const auto trace = simulated(sim::LeakClass::LowLeak, 5);
    const auto net = small_net(6, trace_norm(trace));
    rt::DetectorConfig cfg;
    cfg.max_cycle_samples = 100000;

    rt::Detector sync(net, cfg);
    std::vector<rt::Classification> expected;
    for (std::size_t i = 0; i < trace.size(); ++i)
        if (auto r = sync.push_sample(trace.t[i], trace.p1[i], trace.u[i])) expected.push_back(*r);

    rt::AsyncDetector async(net, cfg);
    std::vector<rt::Classification> got;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        async.push_sample(trace.t[i], trace.p1[i], trace.u[i]);
        if (i % 97 == 0)
            for (auto& r : async.poll()) got.push_back(r);
    }
    for (auto& r : async.flush()) got.push_back(r);

    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
        EXPECT_EQ(got[k].cycle_index, k);
        EXPECT_EQ(got[k].predicted, expected[k].predicted);
        EXPECT_EQ(got[k].probs, expected[k].probs);
    }
    EXPECT_EQ(async.latency_report().count, got.size());
}

TEST(AsyncDetector, ProducerErrorsStayOnProducer)
{
    const auto trace = simulated(sim::LeakClass::NoLeak, 5, 1);
    rt::AsyncDetector async(small_net(6, trace_norm(trace)));
    async.push_sample(1.0, 2e6, 1);
    EXPECT_EQ(code_of([&] { async.push_sample(0.5, 2e6, 1); }), ErrorCode::ordering);
    EXPECT_TRUE(async.flush().empty());
}
