#include "spf/model/train.hpp"
#include <algorithm>

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <limits>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace spf::model {
namespace {

void check_arity(const data::Dataset& dataset, std::size_t branches, const char* what) {
  for (const auto& s : dataset.samples) {
    if (s.patches.size() < branches) {
      throw ShapeError(std::string(what) + " sample holds " + std::to_string(s.patches.size()) +
                       " patches, model needs " + std::to_string(branches));
    }
  }
}

std::vector<int> targets_for(const data::Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<int> out;
  for (std::size_t i : indices) out.push_back(label_index(dataset.samples[i].label));
  return out;
}

// Activation buffers are allocated and freed every step; by default glibc
// serves them with fresh mmaps, which costs more than the arithmetic.
void keep_large_buffers_in_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

}  // namespace

std::vector<nn::Tensor> stack_branches(const data::Dataset& dataset, std::span<const std::size_t> indices,
                                       std::size_t branches) {
  std::vector<nn::Tensor> out;
  std::vector<nn::Tensor> items(indices.size());
  for (std::size_t b = 0; b < branches; ++b) {
    for (std::size_t i = 0; i < indices.size(); ++i) items[i] = dataset.samples[indices[i]].patches[b];
    out.push_back(nn::stack_batch<float>(items));
  }
  return out;
}

Evaluation evaluate(const Model& model, const data::Dataset& dataset, const DecisionConfig& cfg,
                    std::size_t batch_size) {
  if (dataset.empty()) throw DataError("evaluate: empty dataset");
  const auto branches = static_cast<std::size_t>(model.config().branches);
  check_arity(dataset, branches, "evaluation");
  Evaluation out;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    std::vector<std::size_t> indices;
    for (std::size_t i = start; i < std::min(dataset.size(), start + batch_size); ++i) indices.push_back(i);
    const auto inputs = stack_branches(dataset, indices, branches);
    const nn::Tensor logits = model.logits(inputs);
    const auto ce = nn::softmax_cross_entropy<float>(logits, targets_for(dataset, indices));
    loss_sum += static_cast<double>(ce.loss) * static_cast<double>(indices.size());
    for (std::size_t n = 0; n < indices.size(); ++n) {
      const auto p = nn::softmax<float>(logits.item(n));
      const double bona = p[label_index(Label::BonaFide)];
      out.samples.push_back({{bona, 1.0 - bona}, dataset.samples[indices[n]].label});
    }
  }
  out.mean_loss = loss_sum / static_cast<double>(dataset.size());
  out.report = metrics::report(out.samples, cfg.threshold);
  return out;
}

TrainReport train(Model& model, const data::Dataset& train_set, const data::Dataset& val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DataError("train: empty training set");
  if (val_set.empty()) throw DataError("train: empty validation set");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be at least 1");
  const auto branches = static_cast<std::size_t>(model.config().branches);
  check_arity(train_set, branches, "training");
  check_arity(val_set, branches, "validation");
  const auto has = [&](Label label) {
    return std::any_of(val_set.samples.begin(), val_set.samples.end(), [&](const auto& s) { return s.label == label; });
  };
  if (!has(Label::Attack) || !has(Label::BonaFide)) throw DataError("train: validation set needs both classes");

  keep_large_buffers_in_heap();
  Rng order_rng(derive_seed(cfg.seed, 1));
  Rng augment_rng(derive_seed(cfg.seed, 2));
  Rng slot_rng(derive_seed(cfg.seed, 3));
  const auto params = model.parameters();
  nn::zero_grad<float>(params);
  std::vector<std::vector<float>> velocity;
  for (const auto* p : params) velocity.emplace_back(p->value().size(), 0.0f);

  TrainReport report;
  std::optional<Model> best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (const auto& batch : data::iterate_batches(train_set.size(), cfg.batch_size, order_rng)) {
      std::vector<nn::Tensor> inputs;
      std::vector<nn::Tensor> items(batch.size());
      std::vector<std::array<std::size_t, data::kPatchesPerSample>> slots(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        auto& slot = slots[i];
        const std::size_t available = train_set.samples[batch[i]].patches.size();
        for (std::size_t b = 0; b < slot.size(); ++b) slot[b] = b;
        if (cfg.random_patch) {
          // Partial Fisher-Yates over the stored patches.
          for (std::size_t b = 0; b < branches; ++b) {
            const auto j = static_cast<std::size_t>(
                slot_rng.uniform_int(static_cast<std::int64_t>(b), static_cast<std::int64_t>(available - 1)));
            std::swap(slot[b], slot[j]);
          }
        }
      }
      for (std::size_t b = 0; b < branches; ++b) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          const nn::Tensor& patch = train_set.samples[batch[i]].patches[slots[i][b]];
          items[i] = cfg.augment ? data::augment(patch, augment_rng) : patch;
        }
        inputs.push_back(nn::stack_batch<float>(items));
      }
      nn::Graph<float> graph;
      const nn::Var logits = model.forward(graph, inputs);
      const nn::Var loss = graph.softmax_cross_entropy(logits, targets_for(train_set, batch));
      const double value = graph.value(loss)[0];
      if (!std::isfinite(value)) {
        throw DivergenceError("training diverged: non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      graph.backward(loss);
      if (cfg.momentum == 0.0f) {
        nn::sgd_step<float>(params, cfg.learning_rate);
      } else {
        for (std::size_t k = 0; k < params.size(); ++k) {
          auto value = params[k]->value().data();
          auto grad = params[k]->grad().data();
          auto& v = velocity[k];
          for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = cfg.momentum * v[i] + grad[i];
            value[i] -= cfg.learning_rate * v[i];
          }
        }
      }
      nn::zero_grad<float>(params);
      loss_sum += value * static_cast<double>(batch.size());
    }

    const Evaluation val = evaluate(model, val_set, {cfg.val_threshold}, cfg.batch_size);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train_set.size());
    stats.val_loss = val.mean_loss;
    stats.val_acer = *val.report.acer;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(stats);
    spdlog::debug("epoch {:3d}  train_loss {:.5f}  val_loss {:.5f}  val_acer {:.4f}  ({:.1f}s)", epoch,
                  stats.train_loss, stats.val_loss, stats.val_acer, stats.seconds);
    if (on_epoch) on_epoch(stats);

    if (!best || stats.val_acer < report.best_val_acer ||
        (stats.val_acer == report.best_val_acer && stats.val_loss < best_loss)) {
      best = model;
      report.best_epoch = epoch;
      report.best_val_acer = stats.val_acer;
      best_loss = stats.val_loss;
    }
  }
  model = std::move(*best);
  return report;
}

}  // namespace spf::model
