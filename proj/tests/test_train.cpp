#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "leakdetect/error.hpp"
#include "leakdetect/train/trainer.hpp"

using namespace leakdetect;

namespace {

nn::NetworkSpec small_spec()
{
    nn::NetworkSpec s;
    s.lstm1_units = 6;
    s.lstm2_units = 4;
    s.dense1_units = 8;
    s.dense2_units = 4;
    s.dropout_rate = 0.2;
    return s;
}

// Class c sequences sit around level c - 1 with a little noise, so the
// problem is trivially separable.
signal::Dataset toy_dataset(std::size_t per_class_train, std::size_t per_class_test, std::size_t length,
                            std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    const auto make = [&](int c) {
        signal::SequenceSample s;
        s.label = static_cast<sim::LeakClass>(c);
        s.onehot = signal::onehot(s.label);
        for (std::size_t i = 0; i < length; ++i) s.values.push_back(c - 1.0 + noise(rng));
        return s;
    };
    signal::Dataset ds;
    ds.sequence_length = length;
    ds.norm = {0.0, 1.0};
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < per_class_train; ++i) ds.train.push_back(make(c));
        for (std::size_t i = 0; i < per_class_test; ++i) ds.test.push_back(make(c));
    }
    return ds;
}

std::vector<double> flatten(const nn::Network<double>& net)
{
    std::vector<double> out;
    for (auto v : nn::parameter_views(net)) out.insert(out.end(), v.begin(), v.end());
    return out;
}

}  // namespace

TEST(TrainConfig, RejectsBadValues)
{
    train::TrainConfig c;
    c.epochs = 0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.lr = 0.0;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.clip_norm = -1.0;
    EXPECT_THROW(c.validate(), Error);
}

TEST(TrainConfig, Defaults)
{
    const train::TrainConfig c;
    EXPECT_EQ(c.epochs, 200);
    EXPECT_EQ(c.lr, 3e-4);
    EXPECT_EQ(c.batch_size, 32u);
    EXPECT_TRUE(c.shuffle_each_epoch);
}

TEST(Train, ZeroEpochsRejectedBeforeWork)
{
    auto net = nn::init_network<double>(small_spec(), 1);
    const auto before = flatten(net);
    train::TrainConfig c;
    c.epochs = 0;
    try {
        train::train(net, toy_dataset(2, 1, 6, 1), c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
    }
    EXPECT_EQ(flatten(net), before);
}

TEST(Train, OneEpochGivesOneHistoryRow)
{
    auto net = nn::init_network<double>(small_spec(), 1);
    train::TrainConfig c;
    c.epochs = 1;
    c.batch_size = 4;
    int calls = 0;
    const auto h = train::train(net, toy_dataset(3, 1, 6, 2), c, [&](const train::EpochStats&) { ++calls; });
    ASSERT_EQ(h.epochs.size(), 1u);
    EXPECT_EQ(h.epochs[0].epoch, 1);
    EXPECT_EQ(calls, 1);
    EXPECT_TRUE(std::isfinite(h.epochs[0].train_loss));
    EXPECT_EQ(net.sequence_length, 6u);
}

TEST(Train, EmptySplitRejected)
{
    auto net = nn::init_network<double>(small_spec(), 1);
    auto ds = toy_dataset(2, 1, 6, 1);
    ds.test.clear();
    EXPECT_THROW(train::train(net, ds, train::TrainConfig{}), Error);
}

TEST(Train, DeterministicForFixedSeeds)
{
    train::TrainConfig c;
    c.epochs = 3;
    c.batch_size = 4;
    c.seed = 9;
    const auto ds = toy_dataset(4, 2, 8, 3);
    auto a = nn::init_network<double>(small_spec(), 5);
    auto b = nn::init_network<double>(small_spec(), 5);
    const auto ha = train::train(a, ds, c);
    const auto hb = train::train(b, ds, c);
    EXPECT_EQ(flatten(a), flatten(b));
    for (std::size_t i = 0; i < ha.epochs.size(); ++i) {
        EXPECT_EQ(ha.epochs[i].train_loss, hb.epochs[i].train_loss);
        EXPECT_EQ(ha.epochs[i].val_accuracy, hb.epochs[i].val_accuracy);
    }
}

TEST(Train, LossFallsOnSeparableData)
{
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto net = nn::init_network<double>(small_spec(), seed);
        train::TrainConfig c;
        c.epochs = 30;
        c.batch_size = 8;
        c.lr = 1e-2;
        c.seed = seed;
        const auto h = train::train(net, toy_dataset(8, 4, 10, seed), c);
        improved += h.epochs.back().train_loss < h.epochs.front().train_loss;
    }
    EXPECT_GE(improved, 4);
}

TEST(Train, NanWeightReportsDivergence)
{
    auto net = nn::init_network<double>(small_spec(), 1);
    net.lstm1.W(0, 0) = std::numeric_limits<double>::quiet_NaN();
    train::TrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    try {
        train::train(net, toy_dataset(2, 1, 6, 1), c);
        FAIL() << "expected divergence";
    } catch (const TrainingDivergedError& e) {
        EXPECT_EQ(e.code(), ErrorCode::training_diverged);
        EXPECT_EQ(e.last_good_epoch(), 0);
    }
}

TEST(Evaluate, ArgmaxTieBreakIsLowestIndex)
{
    EXPECT_EQ(train::argmax_class(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}), 0);
    EXPECT_EQ(train::argmax_class(std::vector<double>{0.2, 0.4, 0.4}), 1);
    EXPECT_EQ(train::argmax_class(std::vector<double>{0.1, 0.2, 0.7}), 2);
}

TEST(Evaluate, UniformOutputGivesFirstClassShare)
{
    auto net = nn::init_network<double>(small_spec(), 2);
    net.output.W.setZero();
    net.output.b.setZero();
    auto ds = toy_dataset(1, 0, 6, 4);
    ds.train.push_back(ds.train[0]);  // class 0 now holds 2 of 4
    const auto ev = train::evaluate(net, ds.train);
    EXPECT_DOUBLE_EQ(ev.accuracy, 0.5);
    EXPECT_NEAR(ev.loss, std::log(3.0), 1e-12);
    for (int p : ev.predictions) EXPECT_EQ(p, 0);
}

TEST(Evaluate, ConfidentCorrectNetHasZeroLoss)
{
    auto net = nn::init_network<double>(small_spec(), 2);
    net.output.W.setZero();
    net.output.b << 0.0, 0.0, 60.0;
    auto ds = toy_dataset(0, 5, 6, 4);
    std::erase_if(ds.test, [](const signal::SequenceSample& s) { return s.label_code() != 2; });
    const auto ev = train::evaluate(net, ds.test);
    EXPECT_EQ(ev.accuracy, 1.0);
    EXPECT_LT(ev.loss, 1e-20);
}

TEST(Evaluate, RepeatableAndReadOnly)
{
    const auto net = nn::init_network<double>(small_spec(), 3);
    const auto before = flatten(net);
    const auto ds = toy_dataset(4, 0, 7, 5);
    const auto a = train::evaluate(net, ds.train, 5);
    const auto b = train::evaluate(net, ds.train, 64);
    EXPECT_EQ(flatten(net), before);
    EXPECT_EQ(a.predictions, b.predictions);
    EXPECT_EQ(a.labels, b.labels);
    for (std::size_t i = 0; i < a.scores.size(); ++i)
        for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.scores[i][k], b.scores[i][k], 1e-12);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
}

TEST(Evaluate, EmptyRejected)
{
    const auto net = nn::init_network<double>(small_spec(), 3);
    EXPECT_THROW(train::evaluate(net, std::vector<signal::SequenceSample>{}), Error);
}

TEST(History, CsvLayout)
{
    train::History h;
    h.epochs.push_back({1, 1.0, 0.25, 1.5, 0.5});
    h.epochs.push_back({2, 0.5, 0.75, 0.625, 1.0});
    const auto path = std::filesystem::temp_directory_path() / "leakdetect_history.csv";
    train::write_history_csv(path, h);
    std::ifstream in(path);
    std::string header, row1, row2, extra;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    EXPECT_EQ(header, "epoch,train_loss,train_acc,val_loss,val_acc");
    EXPECT_EQ(row1, "1,1,0.25,1.5,0.5");
    EXPECT_EQ(row2, "2,0.5,0.75,0.625,1");
    EXPECT_FALSE(std::getline(in, extra));
    std::filesystem::remove(path);
}
