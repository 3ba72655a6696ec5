#include "spf/model/network.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "spf/common/bytes.hpp"
#include "spf/common/rng.hpp"
#include "spf/nn/ops.hpp"
#include "spf/pem/pem.hpp"

namespace spf::model {

using json = nlohmann::json;

std::vector<ConvBlockSpec> default_backbone() {
  return {{16, 3, 1}, {32, 3, 1}, {64, 3, 1}, {128, 3, 1}};
}

int ModelConfig::feature_extent() const {
  int extent = patch_size;
  for (const auto& block : backbone) {
    if (block.kernel < 1 || block.stride < 1 || block.channels < 1) return 0;
    const int padded = extent + 2 * (block.kernel / 2);
    if (padded < block.kernel) return 0;
    const int conv = (padded - block.kernel) / block.stride + 1;
    if (conv < 2 || conv % 2 != 0) return 0;
    extent = conv / 2;
  }
  return extent;
}

void ModelConfig::validate() const {
  if (branches < 1 || branches > 3) {
    throw ConfigError("branches must be 1, 2 or 3 (got " + std::to_string(branches) + ")");
  }
  if (head_dim != 2) throw ConfigError("head_dim must be 2 (bona fide vs attack)");
  if (backbone.empty()) throw ConfigError("backbone needs at least one conv block");
  if (patch_size < 1) throw ConfigError("patch_size must be positive");
  if (feature_extent() < 1) {
    throw ConfigError("backbone cannot process " + std::to_string(patch_size) +
                      "px patches: every block needs an even conv output of at least 2");
  }
}

std::string to_json(const ModelConfig& config) {
  json blocks = json::array();
  for (const auto& b : config.backbone) {
    blocks.push_back({{"channels", b.channels}, {"kernel", b.kernel}, {"stride", b.stride}});
  }
  const json j{{"branches", config.branches},
               {"share_branch_weights", config.share_branch_weights},
               {"backbone", blocks},
               {"head_dim", config.head_dim},
               {"patch_size", config.patch_size},
               {"seed", config.seed}};
  return j.dump(2);
}

ModelConfig model_config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ModelConfig config;
    config.branches = j.at("branches").get<int>();
    config.share_branch_weights = j.at("share_branch_weights").get<bool>();
    config.backbone.clear();
    for (const auto& b : j.at("backbone")) {
      config.backbone.push_back(
          {b.at("channels").get<int>(), b.value("kernel", 3), b.value("stride", 1)});
    }
    config.head_dim = j.value("head_dim", 2);
    config.patch_size = j.at("patch_size").get<int>();
    config.seed = j.value("seed", std::uint64_t{0});
    config.validate();
    return config;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

namespace {

// Skin texture is a small ripple on a large, uninformative tone: remove each
// patch's per-channel mean and amplify the residual.
template <typename T>
nn::BasicTensor<T> normalize_input(const nn::BasicTensor<T>& input) {
  constexpr T kGain = 4;
  nn::BasicTensor<T> out = input;
  const nn::Shape s = input.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      T* plane = out.data().data() + out.offset(n, c, 0, 0);
      double mean = 0.0;
      for (std::size_t i = 0; i < s.plane(); ++i) mean += plane[i];
      const T m = static_cast<T>(mean / static_cast<double>(s.plane()));
      for (std::size_t i = 0; i < s.plane(); ++i) plane[i] = (plane[i] - m) * kGain;
    }
  return out;
}

std::string block_prefix(const ModelConfig& config, int branch, std::size_t block) {
  const std::string owner = config.share_branch_weights ? "backbone" : "branch" + std::to_string(branch);
  return owner + ".block" + std::to_string(block);
}

}  // namespace

template <typename T>
BasicModel<T>::BasicModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng(config_.seed);
  // He-normal weights (std sqrt(2/fan_in)) keep ReLU activations from
  // shrinking layer by layer; biases start at zero.
  auto make = [&](std::string name, nn::Shape shape, std::size_t fan_in, bool is_bias) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor value(shape);
    if (!is_bias) {
      for (T& v : value.data()) v = static_cast<T>(std_dev * rng.normal());
    }
    params_.emplace_back(std::move(name), std::move(value));
  };
  const int owners = config_.share_branch_weights ? 1 : config_.branches;
  for (int b = 0; b < owners; ++b) {
    std::size_t in_channels = 3;
    for (std::size_t i = 0; i < config_.backbone.size(); ++i) {
      const auto& spec = config_.backbone[i];
      const auto k = static_cast<std::size_t>(spec.kernel);
      const auto out = static_cast<std::size_t>(spec.channels);
      const std::string prefix = block_prefix(config_, b, i);
      make(prefix + ".weight", {out, in_channels, k, k}, in_channels * k * k, false);
      make(prefix + ".bias", {1, out, 1, 1}, in_channels * k * k, true);
      in_channels = out;
    }
  }
  const std::size_t width = head_input_width();
  make("head.weight", {2, width, 1, 1}, width, false);
  make("head.bias", {1, 2, 1, 1}, width, true);
  index_parameters();
}

template <typename T>
BasicModel<T>::BasicModel(const BasicModel& other) : config_(other.config_), params_(other.params_) {
  index_parameters();
}

template <typename T>
BasicModel<T>& BasicModel<T>::operator=(const BasicModel& other) {
  if (this != &other) {
    config_ = other.config_;
    params_ = other.params_;
    index_parameters();
  }
  return *this;
}

template <typename T>
void BasicModel<T>::index_parameters() {
  branches_.assign(static_cast<std::size_t>(config_.branches), {});
  for (int b = 0; b < config_.branches; ++b) {
    for (std::size_t i = 0; i < config_.backbone.size(); ++i) {
      const std::string prefix = block_prefix(config_, b, i);
      branches_[static_cast<std::size_t>(b)].push_back(
          {&parameter(prefix + ".weight"), &parameter(prefix + ".bias"), config_.backbone[i]});
    }
  }
  head_weight_ = &parameter("head.weight");
  head_bias_ = &parameter("head.bias");
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value().size();
  return total;
}

template <typename T>
std::size_t BasicModel<T>::head_input_width() const {
  return static_cast<std::size_t>(config_.branches * config_.backbone_out_channels());
}

template <typename T>
std::vector<typename BasicModel<T>::Parameter*> BasicModel<T>::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const typename BasicModel<T>::Parameter*> BasicModel<T>::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
typename BasicModel<T>::Parameter& BasicModel<T>::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name() == name) return p;
  }
  throw ConfigError("model has no parameter named " + std::string(name));
}

template <typename T>
const typename BasicModel<T>::Parameter& BasicModel<T>::parameter(std::string_view name) const {
  return const_cast<BasicModel*>(this)->parameter(name);
}

template <typename T>
void BasicModel<T>::check_inputs(std::span<const Tensor> branch_inputs) const {
  if (branch_inputs.size() != static_cast<std::size_t>(config_.branches)) {
    throw ShapeError("model expects " + std::to_string(config_.branches) + " patches per sample, got " +
                     std::to_string(branch_inputs.size()));
  }
  const auto s = static_cast<std::size_t>(config_.patch_size);
  const std::size_t batch = branch_inputs.front().shape().n;
  for (const auto& input : branch_inputs) {
    const nn::Shape shape = input.shape();
    if (shape.n != batch || shape.c != 3 || shape.h != s || shape.w != s) {
      throw ShapeError("model input " + shape.to_string() + " does not match [" + std::to_string(batch) +
                       ",3," + std::to_string(s) + "," + std::to_string(s) + "]");
    }
  }
}

template <typename T>
template <typename Bind>
nn::Var BasicModel<T>::build_graph(nn::Graph<T>& graph, std::span<const Tensor> branch_inputs,
                                   Bind bind) const {
  check_inputs(branch_inputs);
  std::vector<nn::Var> features;
  for (std::size_t b = 0; b < branch_inputs.size(); ++b) {
    nn::Var x = graph.constant(normalize_input(branch_inputs[b]));
    for (const Block& block : branches_[b]) {
      x = graph.conv2d(x, bind(*block.weight), bind(*block.bias), {block.spec.stride, block.spec.kernel / 2});
      x = graph.maxpool2d(graph.relu(x));
    }
    features.push_back(graph.global_avg_pool(x));
  }
  const nn::Var joined = graph.concat_channels(features);
  return graph.linear(joined, bind(*head_weight_), bind(*head_bias_));
}

template <typename T>
nn::Var BasicModel<T>::forward(nn::Graph<T>& graph, std::span<const Tensor> branch_inputs) {
  return build_graph(graph, branch_inputs, [&graph](Parameter& p) { return graph.parameter(p); });
}

template <typename T>
typename BasicModel<T>::Tensor BasicModel<T>::logits(std::span<const Tensor> branch_inputs) const {
  nn::Graph<T> graph;
  const nn::Var out =
      build_graph(graph, branch_inputs, [&graph](const Parameter& p) { return graph.constant_ref(p.value()); });
  return graph.value(out);
}

template <typename T>
std::vector<Score> BasicModel<T>::predict_batch(std::span<const Tensor> branch_inputs) const {
  const Tensor out = logits(branch_inputs);
  std::vector<Score> scores;
  for (std::size_t n = 0; n < out.shape().n; ++n) {
    const auto p = nn::softmax<T>(out.item(n));
    const auto bona = static_cast<double>(p[label_index(Label::BonaFide)]);
    scores.push_back({bona, 1.0 - bona});
  }
  return scores;
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
  BasicModel<U> out(config_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.params_[i].assign(params_[i].value().template cast<U>());
  }
  return out;
}

template class BasicModel<float>;
template class BasicModel<double>;
template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;

Score predict(const Model& model, const pem::PatchSet& patches) {
  if (patches.patches.size() != static_cast<std::size_t>(model.config().branches)) {
    throw ShapeError("patch set has " + std::to_string(patches.patches.size()) + " patches, model has " +
                     std::to_string(model.config().branches) + " branches");
  }
  return model.predict_batch(patches.patches).front();
}

std::vector<nn::NamedTensor> export_weights(const Model& model) {
  std::vector<nn::NamedTensor> out;
  for (const auto* p : model.parameters()) out.push_back({p->name(), p->value()});
  return out;
}

void import_weights(Model& model, std::span<const nn::NamedTensor> weights) {
  const auto params = model.parameters();
  if (weights.size() != params.size()) {
    throw ConfigError("weight file has " + std::to_string(weights.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  for (const auto& entry : weights) model.parameter(entry.name).assign(entry.tensor);
}

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::write_w32(dir / "model.w32", export_weights(model));
  write_file_text(dir / "model.json", to_json(model.config()) + "\n");
}

Model load_checkpoint(const std::filesystem::path& dir) {
  Model model(model_config_from_json(read_file_text(dir / "model.json")));
  import_weights(model, nn::read_w32(dir / "model.w32"));
  return model;
}

std::string model_digest(const Model& model) {
  auto bytes = nn::encode_w32(export_weights(model));
  const std::string config = to_json(model.config());
  bytes.insert(bytes.end(), config.begin(), config.end());
  return sha256_hex(bytes);
}

}  // namespace spf::model
