#include <algorithm>
#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <nlohmann/json.hpp>

#include "spf/common/bytes.hpp"
#include "spf/data/dataset.hpp"
#include "spf/nn/weights_io.hpp"

namespace spf::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Grating {
  double cos_t;
  double sin_t;
  double period;
  double phase;

  double operator()(double x, double y) const { return std::sin(kTwoPi * (x * cos_t + y * sin_t) / period + phase); }
};

Grating random_grating(Rng& rng, double angle, double period) {
  return {std::cos(angle), std::sin(angle), period, rng.uniform(0.0, kTwoPi)};
}

// Skin-toned field with low-frequency shading and fine sensor-like noise.
nn::Tensor skin_patch(Rng& rng, std::size_t s, const std::array<double, 3>& tone, double noise_sigma) {
  std::array<Grating, 3> shading{};
  std::array<double, 3> amplitude{};
  for (std::size_t i = 0; i < shading.size(); ++i) {
    const double cycles = rng.uniform(0.5, 2.0);
    shading[i] = random_grating(rng, rng.uniform(0.0, kTwoPi), static_cast<double>(s) / cycles);
    amplitude[i] = rng.uniform(0.02, 0.06);
  }
  nn::Tensor patch(nn::Shape{1, 3, s, s});
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      double shade = 1.0;
      for (std::size_t i = 0; i < shading.size(); ++i) shade += amplitude[i] * shading[i](x, y);
      const double common = noise_sigma * rng.normal();
      for (std::size_t c = 0; c < 3; ++c) {
        patch.at(0, c, y, x) = static_cast<float>(tone[c] * shade + common + 0.3 * noise_sigma * rng.normal());
      }
    }
  return patch;
}

void halftone(nn::Tensor& patch, Rng& rng, double strength) {
  const double period = rng.uniform(3.0, 6.0);
  const double angle = rng.uniform(0.0, std::numbers::pi / 2.0);
  const double alpha = strength * rng.uniform(0.25, 0.45);
  const double c = std::cos(angle), s = std::sin(angle);
  const double du = rng.uniform(0.0, period), dv = rng.uniform(0.0, period);
  const nn::Shape sh = patch.shape();
  for (std::size_t y = 0; y < sh.h; ++y)
    for (std::size_t x = 0; x < sh.w; ++x) {
      const double u = x * c + y * s + du;
      const double v = -x * s + y * c + dv;
      const double dot = 0.5 * (1.0 + std::cos(kTwoPi * u / period) * std::cos(kTwoPi * v / period));
      for (std::size_t ch = 0; ch < 3; ++ch) patch.at(0, ch, y, x) *= static_cast<float>(1.0 - alpha * dot);
    }
}

void moire(nn::Tensor& patch, Rng& rng, double strength) {
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const double relative = rng.uniform(5.0, 20.0) * std::numbers::pi / 180.0 * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  const Grating a = random_grating(rng, angle, rng.uniform(4.0, 9.0));
  const Grating b = random_grating(rng, angle + relative, rng.uniform(4.0, 9.0));
  const double beta = strength * rng.uniform(0.05, 0.10);
  const nn::Shape sh = patch.shape();
  for (std::size_t y = 0; y < sh.h; ++y)
    for (std::size_t x = 0; x < sh.w; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        // Sub-pixel stripes: each channel sees the pattern slightly shifted.
        const double shift = 0.33 * static_cast<double>(ch);
        patch.at(0, ch, y, x) += static_cast<float>(0.5 * beta * (a(x + shift, y) + b(x + shift, y)));
      }
}

void blur_and_compress(nn::Tensor& patch, Rng& rng, double strength) {
  const double sigma = rng.uniform(1.0, 2.0);
  const double contrast = 1.0 - strength * rng.uniform(0.2, 0.45);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= total;

  const nn::Shape sh = patch.shape();
  const auto h = static_cast<long>(sh.h), w = static_cast<long>(sh.w);
  nn::Tensor tmp(sh);
  auto clamp_index = [](long i, long n) { return std::clamp(i, 0L, n - 1); };
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<std::size_t>(i + radius)] * patch.at(0, ch, y, clamp_index(x + i, w));
        tmp.at(0, ch, y, x) = static_cast<float>(acc);
      }
    double mean = 0.0;
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(0, ch, clamp_index(y + i, h), x);
        patch.at(0, ch, y, x) = static_cast<float>(acc);
        mean += acc;
      }
    mean /= static_cast<double>(h * w);
    for (long y = 0; y < h; ++y)
      for (long x = 0; x < w; ++x) {
        float& v = patch.at(0, ch, y, x);
        v = static_cast<float>(mean + contrast * (v - mean));
      }
  }
}

std::string generator_digest(const SynthConfig& cfg) {
  const nlohmann::ordered_json j{{"generator", "spf-synth-1"},
                                 {"n_per_class", cfg.n_per_class},
                                 {"patch_size", cfg.patch_size},
                                 {"seed", cfg.seed}};
  const std::string text = j.dump();
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::string_view to_string(AttackType type) {
  switch (type) {
    case AttackType::None:
      return "None";
    case AttackType::PrintHalftone:
      return "PrintHalftone";
    case AttackType::ScreenMoire:
      return "ScreenMoire";
    case AttackType::RecaptureBlur:
      return "RecaptureBlur";
  }
  return "Unknown";
}

AttackType attack_type_from_string(std::string_view name) {
  for (AttackType t : kAllAttackTypes) {
    if (to_string(t) == name) return t;
  }
  throw DataError("unknown attack type '" + std::string(name) + "'");
}

std::vector<nn::Tensor> synthesize_sample(AttackType type, int patch_size, std::uint64_t seed) {
  if (patch_size < 4) throw ConfigError("synthetic patches need S >= 4");
  Rng rng(seed);
  const double r = rng.uniform(0.55, 0.9);
  const std::array<double, 3> tone{r, r * rng.uniform(0.62, 0.82), r * rng.uniform(0.5, 0.72)};
  const double noise_sigma = rng.uniform(0.025, 0.045);
  std::vector<nn::Tensor> patches;
  for (int p = 0; p < kPatchesPerSample; ++p) {
    nn::Tensor patch = skin_patch(rng, static_cast<std::size_t>(patch_size), tone, noise_sigma);
    // Artifacts are uneven across the face: some patches show them weakly.
    const double strength = rng.uniform(0.5, 1.0);
    switch (type) {
      case AttackType::None:
        break;
      case AttackType::PrintHalftone:
        halftone(patch, rng, strength);
        break;
      case AttackType::ScreenMoire:
        moire(patch, rng, strength);
        break;
      case AttackType::RecaptureBlur:
        blur_and_compress(patch, rng, strength);
        break;
    }
    for (float& v : patch.data()) v = std::clamp(v, 0.0f, 1.0f);
    patches.push_back(std::move(patch));
  }
  return patches;
}

DatasetManifest synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.n_per_class < 1) throw ConfigError("n_per_class must be at least 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "patches", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "patches").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.patch_size = cfg.patch_size;
  manifest.generator_digest = generator_digest(cfg);
  std::uint64_t index = 0;
  for (AttackType type : kAllAttackTypes) {
    for (int i = 0; i < cfg.n_per_class; ++i, ++index) {
      const std::uint64_t seed = derive_seed(cfg.seed, index);
      const auto patches = synthesize_sample(type, cfg.patch_size, seed);
      std::vector<nn::NamedTensor> entries;
      for (std::size_t p = 0; p < patches.size(); ++p) entries.push_back({"patch" + std::to_string(p), patches[p]});
      const std::string rel = fmt::format("patches/{:06d}.w32", index);
      nn::write_w32(out_dir / rel, entries);
      manifest.records.push_back({rel, label_for(type), type, seed});
    }
  }
  save_manifest(manifest, out_dir);
  return manifest;
}

}  // namespace spf::data
