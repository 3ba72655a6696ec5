#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "spf/data/dataset.hpp"
#include "spf/metrics/metrics.hpp"
#include "spf/model/network.hpp"

namespace spf::model {

struct TrainConfig {
  int epochs = 100;
  float learning_rate = 0.01f;
  // Heavy-ball momentum: v <- momentum * v + g; w <- w - lr * v. Zero is
  // plain SGD.
  float momentum = 0.0f;
  std::size_t batch_size = 64;
  bool augment = true;
  // Draw which of the stored patches feed the branches anew for every batch
  // instead of always using the first `branches` of them.
  bool random_patch = false;
  std::uint64_t seed = 0;
  double val_threshold = 0.5;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acer = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_acer = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Shuffled minibatch SGD on softmax cross-entropy. On return the model holds
// the weights of the epoch with the lowest validation ACER (ties: lower
// validation loss, then the earlier epoch). Throws DataError for empty sets
// or a validation set missing a class, DivergenceError on a non-finite loss.
TrainReport train(Model& model, const data::Dataset& train_set, const data::Dataset& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Evaluation {
  metrics::MetricsReport report;
  std::vector<metrics::ScoredSample> samples;
  double mean_loss = 0.0;
};

// Scores every sample with its first `branches` patches.
Evaluation evaluate(const Model& model, const data::Dataset& dataset, const DecisionConfig& cfg,
                    std::size_t batch_size = 64);

// Stacks patch `slot[b]` of each sample into one [B,3,S,S] tensor per branch.
std::vector<nn::Tensor> stack_branches(const data::Dataset& dataset, std::span<const std::size_t> indices,
                                       std::size_t branches);

}  // namespace spf::model
