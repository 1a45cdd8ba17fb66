#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "leakdetect/nn/network.hpp"
#include "leakdetect/signal/dataset.hpp"

namespace leakdetect::train {

struct TrainConfig {
    int epochs = 200;
    double lr = 3.0e-4;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    bool shuffle_each_epoch = true;
    // Joint L2 gradient norm cap applied before each Adam step; 0 disables.
    double clip_norm = 1.0;

    void validate() const;
};

/// Epochs are numbered from 1.
struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
};

void write_history_csv(const std::filesystem::path& path, const History& history);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> labels;
    std::vector<int> predictions;
    std::vector<std::array<double, 3>> scores;
};

inline constexpr std::size_t kEvalBatchSize = 64;

/// Class with the highest probability; ties go to the lowest index.
int argmax_class(std::span<const double> probs) noexcept;

/// Inference-mode pass over `samples`. Never modifies the network.
template <typename S>
Evaluation evaluate(const nn::Network<S>& net, std::span<const signal::SequenceSample> samples,
                    std::size_t batch_size = kEvalBatchSize);

using EpochCallback = std::function<void(const EpochStats&)>;

/**
 * Mini-batch Adam training with dropout. After every epoch both splits are
 * evaluated in inference mode and appended to the history. The dataset's
 * norm stats and sequence length are copied into the network.
 *
 * Throws TrainingDivergedError carrying the last completed epoch (0 if
 * none) when a loss or gradient turns non-finite.
 */
template <typename S>
History train(nn::Network<S>& net, const signal::Dataset& data, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace leakdetect::train
