#pragma once

// Synthetic bona-fide / attack patch corpus, its on-disk manifest, training
// augmentation and seeded minibatch iteration.
//
// Layout of a generated corpus directory:
//   manifest.jsonl   one {"patchset","label","attack_type","seed"} per line
//   meta.json        patch size, per-class counts, generator digest
//   patches/*.w32    one file per sample holding patch0..patch2, each [1,3,S,S]

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spf/common/rng.hpp"
#include "spf/model/types.hpp"
#include "spf/nn/tensor.hpp"

namespace spf::data {

enum class AttackType : std::uint8_t { None = 0, PrintHalftone = 1, ScreenMoire = 2, RecaptureBlur = 3 };

inline constexpr std::array<AttackType, 4> kAllAttackTypes{AttackType::None, AttackType::PrintHalftone,
                                                           AttackType::ScreenMoire, AttackType::RecaptureBlur};

std::string_view to_string(AttackType type);
AttackType attack_type_from_string(std::string_view name);

inline model::Label label_for(AttackType type) {
  return type == AttackType::None ? model::Label::BonaFide : model::Label::Attack;
}

struct SampleRecord {
  std::string patchset_path;  // relative to the manifest directory
  model::Label label = model::Label::BonaFide;
  AttackType attack_type = AttackType::None;
  std::uint64_t seed = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<SampleRecord> records;
  int patch_size = 0;
  std::string generator_digest;

  std::size_t count(model::Label label) const;
};

struct SynthConfig {
  int n_per_class = 100;
  int patch_size = 64;
  std::uint64_t seed = 0;
};

inline constexpr int kPatchesPerSample = 3;

// Patches for one sample; a pure function of (type, S, seed).
std::vector<nn::Tensor> synthesize_sample(AttackType type, int patch_size, std::uint64_t seed);

// Writes a corpus under `out_dir`: n_per_class samples of every attack type
// including None. Throws IoError when the directory cannot be written.
DatasetManifest synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir);

struct Sample {
  std::vector<nn::Tensor> patches;
  model::Label label = model::Label::BonaFide;
  AttackType attack_type = AttackType::None;
};

struct Dataset {
  std::vector<Sample> samples;
  int patch_size = 0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

// Reads every patch file; a missing or unreadable file raises IoError naming
// the record.
Dataset load_dataset(const DatasetManifest& manifest);

// Stratified split: `fraction` of each class (rounded) goes to the second set.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double fraction, std::uint64_t seed);

struct AugmentParams {
  bool flip = false;
  std::array<float, 3> gain{1.0f, 1.0f, 1.0f};    // a in [0.8, 1.2]
  std::array<float, 3> offset{0.0f, 0.0f, 0.0f};  // b in [-0.1, 0.1]
};

AugmentParams draw_augment(Rng& rng);
// Horizontal flip, then x <- clamp(a * x + b, 0, 1) per channel.
nn::Tensor augment(const nn::Tensor& patch, const AugmentParams& params);
nn::Tensor augment(const nn::Tensor& patch, Rng& rng);
nn::Tensor flip_horizontal(const nn::Tensor& patch);

// Epoch order: a seeded permutation of [0, n) cut into batch_size chunks;
// the last partial chunk is kept.
std::vector<std::vector<std::size_t>> iterate_batches(std::size_t n, std::size_t batch_size, Rng& rng);

// Mean absolute 4-neighbour Laplacian over interior pixels of every channel.
double mean_abs_laplacian(const nn::Tensor& patch);

}  // namespace spf::data
