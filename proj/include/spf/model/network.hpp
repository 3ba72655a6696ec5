#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spf/model/types.hpp"
#include "spf/nn/graph.hpp"
#include "spf/nn/parameter.hpp"
#include "spf/nn/tensor.hpp"
#include "spf/nn/weights_io.hpp"

namespace spf::pem {
struct PatchSet;
}

namespace spf::model {

// conv(kernel, stride, same padding) -> ReLU -> 2x2 max pool.
struct ConvBlockSpec {
  int channels = 16;
  int kernel = 3;
  int stride = 1;

  friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

std::vector<ConvBlockSpec> default_backbone();

struct ModelConfig {
  int branches = 2;
  bool share_branch_weights = false;
  std::vector<ConvBlockSpec> backbone = default_backbone();
  int head_dim = 2;  // output classes; the decision rule needs exactly two
  int patch_size = 64;
  std::uint64_t seed = 0;

  // Throws ConfigError for branch counts outside {1,2,3}, empty or malformed
  // backbones, or a backbone that cannot reduce patch_size to >= 1 pixel.
  void validate() const;
  // Spatial extent after the last block.
  int feature_extent() const;
  int backbone_out_channels() const { return backbone.empty() ? 0 : backbone.back().channels; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

// N-branch patch classifier: one CNN backbone per patch, per-branch global
// average pooling, channel concatenation, and a linear head to two logits
// (index 0 = attack, 1 = bona fide).
template <typename T>
class BasicModel {
 public:
  using Tensor = nn::BasicTensor<T>;
  using Parameter = nn::BasicParameter<T>;

  explicit BasicModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t parameter_count() const;
  std::size_t head_input_width() const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& parameter(std::string_view name);
  const Parameter& parameter(std::string_view name) const;

  // Records a trainable forward pass. One [N,3,S,S] batch per branch, values
  // in [0,1]; returns the [N,2,1,1] logits.
  nn::Var forward(nn::Graph<T>& graph, std::span<const Tensor> branch_inputs);
  // Inference only; weights are read, never written.
  Tensor logits(std::span<const Tensor> branch_inputs) const;
  std::vector<Score> predict_batch(std::span<const Tensor> branch_inputs) const;

  template <typename U>
  BasicModel<U> cast() const;

 private:
  template <typename U>
  friend class BasicModel;

  struct Block {
    Parameter* weight;
    Parameter* bias;
    ConvBlockSpec spec;
  };

  template <typename Bind>
  nn::Var build_graph(nn::Graph<T>& graph, std::span<const Tensor> branch_inputs, Bind bind) const;
  void check_inputs(std::span<const Tensor> branch_inputs) const;
  void index_parameters();

  ModelConfig config_;
  std::deque<Parameter> params_;
  std::vector<std::vector<Block>> branches_;
  Parameter* head_weight_ = nullptr;
  Parameter* head_bias_ = nullptr;

 public:
  BasicModel(const BasicModel& other);
  BasicModel& operator=(const BasicModel& other);
  BasicModel(BasicModel&&) noexcept = default;
  BasicModel& operator=(BasicModel&&) noexcept = default;
};

using Model = BasicModel<float>;

// Scores one patch set; patches.size() must equal the branch count.
Score predict(const Model& model, const pem::PatchSet& patches);

// Checkpoint: <dir>/model.w32 weights plus <dir>/model.json config sidecar.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

std::vector<nn::NamedTensor> export_weights(const Model& model);
void import_weights(Model& model, std::span<const nn::NamedTensor> weights);

// SHA-256 over the weight file bytes and the config sidecar.
std::string model_digest(const Model& model);

extern template class BasicModel<float>;
extern template class BasicModel<double>;

}  // namespace spf::model
