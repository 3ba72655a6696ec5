#include <algorithm>
#include <cmath>
#include <sstream>
#include <nlohmann/json.hpp>

#include "spf/common/bytes.hpp"
#include "spf/data/dataset.hpp"
#include "spf/nn/weights_io.hpp"

namespace spf::data {

using json = nlohmann::ordered_json;

std::size_t DatasetManifest::count(model::Label label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const SampleRecord& r) { return r.label == label; }));
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& dir) {
  std::string lines;
  for (const auto& r : manifest.records) {
    const json j{{"patchset", r.patchset_path},
                 {"label", model::label_index(r.label)},
                 {"attack_type", std::string(to_string(r.attack_type))},
                 {"seed", r.seed}};
    lines += j.dump() + "\n";
  }
  write_file_text(dir / "manifest.jsonl", lines);
  json counts = json::object();
  for (AttackType t : kAllAttackTypes) {
    counts[std::string(to_string(t))] = std::count_if(manifest.records.begin(), manifest.records.end(),
                                                      [&](const SampleRecord& r) { return r.attack_type == t; });
  }
  const json meta{{"patch_size", manifest.patch_size},
                  {"patches_per_sample", kPatchesPerSample},
                  {"generator_digest", manifest.generator_digest},
                  {"bona_fide", manifest.count(model::Label::BonaFide)},
                  {"attack", manifest.count(model::Label::Attack)},
                  {"attack_types", counts}};
  write_file_text(dir / "meta.json", meta.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  // Accept either the corpus directory or the manifest file itself.
  const std::filesystem::path file = std::filesystem::is_directory(path) ? path / "manifest.jsonl" : path;
  DatasetManifest manifest;
  manifest.root = file.parent_path();
  try {
    const auto meta = json::parse(read_file_text(manifest.root / "meta.json"));
    manifest.patch_size = meta.at("patch_size").get<int>();
    manifest.generator_digest = meta.value("generator_digest", "");
    std::istringstream lines(read_file_text(file));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = json::parse(line);
      SampleRecord r;
      r.patchset_path = j.at("patchset").get<std::string>();
      const int label = j.at("label").get<int>();
      if (label != 0 && label != 1) throw DataError("manifest line " + std::to_string(line_no) + ": label must be 0 or 1");
      r.label = static_cast<model::Label>(label);
      r.attack_type = attack_type_from_string(j.at("attack_type").get<std::string>());
      r.seed = j.at("seed").get<std::uint64_t>();
      if (label_for(r.attack_type) != r.label) {
        throw DataError("manifest line " + std::to_string(line_no) + ": label " + std::to_string(label) +
                        " contradicts attack_type " + std::string(to_string(r.attack_type)));
      }
      if (!std::filesystem::exists(manifest.root / r.patchset_path)) {
        throw IoError("manifest line " + std::to_string(line_no) + ": missing patch file " + r.patchset_path);
      }
      manifest.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError("manifest " + file.string() + ": " + e.what());
  }
  return manifest;
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset dataset;
  dataset.patch_size = manifest.patch_size;
  const auto s = static_cast<std::size_t>(manifest.patch_size);
  for (const auto& r : manifest.records) {
    std::vector<nn::NamedTensor> entries;
    try {
      entries = nn::read_w32(manifest.root / r.patchset_path);
    } catch (const Error& e) {
      throw IoError("record " + r.patchset_path + ": " + e.what());
    }
    Sample sample{{}, r.label, r.attack_type};
    for (auto& entry : entries) {
      if (entry.tensor.shape() != nn::Shape{1, 3, s, s}) {
        throw DataError("record " + r.patchset_path + ": patch " + entry.name + " has shape " +
                        entry.tensor.shape().to_string());
      }
      sample.patches.push_back(std::move(entry.tensor));
    }
    if (sample.patches.empty()) throw DataError("record " + r.patchset_path + " holds no patches");
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::pair<Dataset, Dataset> out;
  out.first.patch_size = out.second.patch_size = dataset.patch_size;
  for (model::Label label : {model::Label::Attack, model::Label::BonaFide}) {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.samples[i].label == label) indices.push_back(i);
    }
    rng.shuffle(std::span(indices));
    const auto held = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(indices.size())));
    std::sort(indices.begin(), indices.begin() + static_cast<long>(indices.size() - held));
    std::sort(indices.begin() + static_cast<long>(indices.size() - held), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      (i < indices.size() - held ? out.first : out.second).samples.push_back(dataset.samples[indices[i]]);
    }
  }
  return out;
}

AugmentParams draw_augment(Rng& rng) {
  AugmentParams p;
  p.flip = rng.bernoulli(0.5);
  for (std::size_t c = 0; c < 3; ++c) {
    p.gain[c] = static_cast<float>(rng.uniform(0.8, 1.2));
    p.offset[c] = static_cast<float>(rng.uniform(-0.1, 0.1));
  }
  return p;
}

nn::Tensor flip_horizontal(const nn::Tensor& patch) {
  const nn::Shape s = patch.shape();
  nn::Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = patch.at(n, c, y, s.w - 1 - x);
  return out;
}

nn::Tensor augment(const nn::Tensor& patch, const AugmentParams& params) {
  nn::Tensor out = params.flip ? flip_horizontal(patch) : patch;
  const nn::Shape s = out.shape();
  if (s.c != 3) throw ShapeError("augment expects 3 channels, got " + s.to_string());
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          float& v = out.at(n, c, y, x);
          v = std::clamp(params.gain[c] * v + params.offset[c], 0.0f, 1.0f);
        }
  return out;
}

nn::Tensor augment(const nn::Tensor& patch, Rng& rng) { return augment(patch, draw_augment(rng)); }

std::vector<std::vector<std::size_t>> iterate_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(std::min(n, start + batch_size)));
  }
  return batches;
}

double mean_abs_laplacian(const nn::Tensor& patch) {
  const nn::Shape s = patch.shape();
  if (s.h < 3 || s.w < 3) throw ShapeError("laplacian needs at least 3x3 pixels");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 1; y + 1 < s.h; ++y)
        for (std::size_t x = 1; x + 1 < s.w; ++x) {
          const double lap = patch.at(n, c, y - 1, x) + patch.at(n, c, y + 1, x) + patch.at(n, c, y, x - 1) +
                             patch.at(n, c, y, x + 1) - 4.0 * patch.at(n, c, y, x);
          total += std::abs(lap);
          ++count;
        }
  return total / static_cast<double>(count);
}

}  // namespace spf::data
