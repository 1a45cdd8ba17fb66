#include "leakdetect/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "leakdetect/error.hpp"
#include "leakdetect/nn/adam.hpp"

namespace leakdetect::train {

namespace {

// Keeps the dropout stream independent of the shuffle stream.
constexpr std::uint64_t kDropoutStreamOffset = 0x9E3779B97F4A7C15ULL;

template <typename S>
void gather(std::span<const signal::SequenceSample> samples, std::span<const std::size_t> idx,
            std::vector<std::vector<double>>& seqs, nn::Matrix<S>& onehots)
{
    seqs.clear();
    onehots.resize(static_cast<nn::Index>(idx.size()), 3);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& s = samples[idx[r]];
        seqs.push_back(s.values);
        for (int k = 0; k < 3; ++k)
            onehots(static_cast<nn::Index>(r), k) = static_cast<S>(s.onehot[static_cast<std::size_t>(k)]);
    }
}

}  // namespace

void TrainConfig::validate() const
{
    if (epochs < 1) throw Error(ErrorCode::config, "epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::config, "batch_size must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::config, "lr must be positive");
    if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) throw Error(ErrorCode::config, "clip_norm must be >= 0");
}

void write_history_csv(const std::filesystem::path& path, const History& history)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[160];
    for (const auto& e : history.epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.train_accuracy,
                      e.val_loss, e.val_accuracy);
        out << buf;
    }
}

int argmax_class(std::span<const double> probs) noexcept
{
    int best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

template <typename S>
Evaluation evaluate(const nn::Network<S>& net, std::span<const signal::SequenceSample> samples, std::size_t batch_size)
{
    if (samples.empty()) throw Error(ErrorCode::data, "nothing to evaluate");
    if (batch_size < 1) throw Error(ErrorCode::config, "evaluation batch size must be >= 1");

    Evaluation ev;
    ev.labels.reserve(samples.size());
    ev.predictions.reserve(samples.size());
    ev.scores.reserve(samples.size());

    std::vector<std::size_t> idx;
    std::vector<std::vector<double>> seqs;
    nn::Matrix<S> onehots;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t end = std::min(samples.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        gather(samples, idx, seqs, onehots);
        const auto result = nn::network_forward(net, nn::make_batch<S>(seqs), false);
        loss_sum += nn::batch_cross_entropy(result.probs, onehots) * static_cast<double>(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::array<double, 3> p{};
            for (int k = 0; k < 3; ++k)
                p[static_cast<std::size_t>(k)] = static_cast<double>(result.probs(static_cast<nn::Index>(r), k));
            const int label = samples[idx[r]].label_code();
            const int pred = argmax_class(p);
            correct += pred == label ? 1 : 0;
            ev.labels.push_back(label);
            ev.predictions.push_back(pred);
            ev.scores.push_back(p);
        }
    }
    ev.loss = loss_sum / static_cast<double>(samples.size());
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    return ev;
}

template <typename S>
History train(nn::Network<S>& net, const signal::Dataset& data, const TrainConfig& config, const EpochCallback& on_epoch)
{
    config.validate();
    if (data.train.empty() || data.test.empty()) throw Error(ErrorCode::data, "both dataset splits must be non-empty");
    if (net.sequence_length != 0 && net.sequence_length != data.sequence_length)
        throw Error(ErrorCode::incompatible, "network sequence length " + std::to_string(net.sequence_length) +
                                                 " does not match dataset length " +
                                                 std::to_string(data.sequence_length));
    net.norm = data.norm;
    net.sequence_length = data.sequence_length;

    nn::AdamConfig adam_cfg;
    adam_cfg.lr = config.lr;
    adam_cfg.global_clip_norm = config.clip_norm;
    nn::AdamState<S> adam(adam_cfg);

    std::mt19937_64 shuffle_rng(config.seed);
    std::mt19937_64 dropout_rng(config.seed + kDropoutStreamOffset);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::vector<double>> seqs;
    nn::Matrix<S> onehots;

    History history;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle_each_epoch) std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            gather<S>(data.train, std::span(order).subspan(start, end - start), seqs, onehots);
            auto fwd = nn::network_forward(net, nn::make_batch<S>(seqs), true, &dropout_rng);
            const double loss = nn::batch_cross_entropy(fwd.probs, onehots);
            if (!std::isfinite(loss))
                throw TrainingDivergedError("non-finite training loss in epoch " + std::to_string(epoch), epoch - 1);
            const auto grads = nn::network_backward(net, fwd.cache, fwd.probs, onehots);
            try {
                nn::adam_step<S>(nn::parameter_views(net), nn::gradient_views(grads), adam);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::training_diverged) throw;
                throw TrainingDivergedError(std::string(e.what()) + " in epoch " + std::to_string(epoch), epoch - 1);
            }
        }

        const auto tr = evaluate(net, data.train);
        const auto va = evaluate(net, data.test);
        if (!std::isfinite(tr.loss) || !std::isfinite(va.loss))
            throw TrainingDivergedError("non-finite evaluation loss after epoch " + std::to_string(epoch), epoch - 1);
        history.epochs.push_back({epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});
        if (on_epoch) on_epoch(history.epochs.back());
    }
    return history;
}

template Evaluation evaluate(const nn::Network<float>&, std::span<const signal::SequenceSample>, std::size_t);
template Evaluation evaluate(const nn::Network<double>&, std::span<const signal::SequenceSample>, std::size_t);
template History train(nn::Network<float>&, const signal::Dataset&, const TrainConfig&, const EpochCallback&);
template History train(nn::Network<double>&, const signal::Dataset&, const TrainConfig&, const EpochCallback&);

}  // namespace leakdetect::train
