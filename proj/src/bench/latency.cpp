#include "spf/bench/latency.hpp"

#include <fmt/format.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "spf/common/bytes.hpp"
#include "spf/pem/image.hpp"

namespace spf::bench {

std::string_view to_string(Mode mode) { return mode == Mode::Traditional ? "traditional" : "ours"; }

void ChannelConfig::validate() const {
  if (!(rtt_ms >= 0.0) || !std::isfinite(rtt_ms)) throw ConfigError("channel rtt_ms must be >= 0");
  if (!(bandwidth_bytes_per_ms > 0.0) || !std::isfinite(bandwidth_bytes_per_ms)) {
    throw ConfigError("channel bandwidth must be > 0");
  }
}

double simulate_transmission(std::size_t payload_bytes, const ChannelConfig& channel) {
  channel.validate();
  return channel.rtt_ms + static_cast<double>(payload_bytes) / channel.bandwidth_bytes_per_ms;
}

LatencyBreakdown::LatencyBreakdown(Mode mode, double t_trans_ms, double t_encry_ms, double t_decry_ms,
                                   double t_infer_ms)
    : mode_(mode),
      t_trans_(t_trans_ms),
      t_encry_(t_encry_ms),
      t_decry_(t_decry_ms),
      t_infer_(t_infer_ms),
      t_total_(t_trans_ms + t_encry_ms + t_decry_ms + t_infer_ms) {
  for (double v : {t_trans_, t_encry_, t_decry_, t_infer_}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("latency stages must be finite and >= 0");
  }
  if (mode_ == Mode::PatchPath && (t_encry_ != 0.0 || t_decry_ != 0.0)) {
    throw ConfigError("the patch path has no encryption or decryption stage");
  }
}

double LatencyBreakdown::stage(Stage s) const noexcept {
  switch (s) {
    case Stage::Transmission:
      return t_trans_;
    case Stage::Encrypt:
      return t_encry_;
    case Stage::Decrypt:
      return t_decry_;
    case Stage::Inference:
      return t_infer_;
  }
  return 0.0;
}

double StageTimes::get(Stage s) const {
  switch (s) {
    case Stage::Transmission:
      return t_trans;
    case Stage::Encrypt:
      return t_encry;
    case Stage::Decrypt:
      return t_decry;
    case Stage::Inference:
      return t_infer;
  }
  return 0.0;
}

double WallClock::time(Mode, Stage stage, double modeled_ms, const std::function<void()>& work) {
  const auto start = std::chrono::steady_clock::now();
  work();
  const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return stage == Stage::Transmission ? modeled_ms : elapsed;
}

double FixedTiming::time(Mode mode, Stage stage, double, const std::function<void()>& work) {
  work();
  return row(mode).get(stage);
}

FixedTiming parse_fixture(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    auto row = [&](const char* key) {
      const auto& r = j.at(key);
      return StageTimes{r.at("t_trans").get<double>(), r.at("t_encry").get<double>(), r.at("t_decry").get<double>(),
                        r.at("t_infer").get<double>()};
    };
    return FixedTiming(row("traditional"), row("ours"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("timing fixture: ") + e.what());
  }
}

FixedTiming load_fixture(const std::filesystem::path& path) { return parse_fixture(read_file_text(path)); }

LatencyBreakdown run_pipeline(Mode mode, const pem::FaceRecord& face, PipelineContext& ctx, TimingSource& timing) {
  if (ctx.model == nullptr) throw ConfigError("run_pipeline: no model");
  ctx.channel.validate();
  const model::Model& model = *ctx.model;
  const int k = model.config().branches;
  const int s = model.config().patch_size;
  const auto noop = [] {};

  if (mode == Mode::Traditional) {
    const std::vector<std::uint8_t> image = pem::quantize_u8(face.image);
    const Nonce nonce = ctx.nonces.next();
    CipherPayload sealed;
    const double t_encry = timing.time(mode, Stage::Encrypt, 0.0, [&] { sealed = encrypt(image, ctx.key, nonce); });
    ctx.last_payload_bytes = sealed.wire_size();
    const double t_trans =
        timing.time(mode, Stage::Transmission, simulate_transmission(ctx.last_payload_bytes, ctx.channel), noop);
    std::vector<std::uint8_t> opened;
    const double t_decry = timing.time(mode, Stage::Decrypt, 0.0, [&] { opened = decrypt(sealed, ctx.key); });
    const double t_infer = timing.time(mode, Stage::Inference, 0.0, [&] {
      const pem::FaceRecord received{pem::dequantize_u8(opened, face.image.shape()), face.keypoints, face.source_id};
      ctx.last_score = model::predict(model, pem::select_patches(received, k, s, ctx.patch_seed));
    });
    return {mode, t_trans, t_encry, t_decry, t_infer};
  }

  // Client side, before anything leaves the device.
  const pem::PatchSet patches = pem::select_patches(face, k, s, ctx.patch_seed);
  std::vector<std::uint8_t> wire;
  for (const auto& p : patches.patches) {
    const auto q = pem::quantize_u8(p);
    wire.insert(wire.end(), q.begin(), q.end());
  }
  ctx.last_payload_bytes = wire.size();
  const double t_trans =
      timing.time(mode, Stage::Transmission, simulate_transmission(ctx.last_payload_bytes, ctx.channel), noop);
  const double t_infer = timing.time(mode, Stage::Inference, 0.0, [&] {
    pem::PatchSet received;
    const std::size_t per_patch = 3 * static_cast<std::size_t>(s) * static_cast<std::size_t>(s);
    const auto shape = nn::Shape{1, 3, static_cast<std::size_t>(s), static_cast<std::size_t>(s)};
    for (int i = 0; i < k; ++i) {
      received.patches.push_back(
          pem::dequantize_u8(std::span(wire).subspan(static_cast<std::size_t>(i) * per_patch, per_patch), shape));
    }
    ctx.last_score = model::predict(model, received);
  });
  return {mode, t_trans, 0.0, 0.0, t_infer};
}

ComparisonReport compare(const LatencyBreakdown& traditional, const LatencyBreakdown& patch) {
  if (traditional.t_total_ms() == 0.0) throw UndefinedMetricError("latency ratio undefined: traditional total is 0");
  ComparisonReport r{traditional, patch, patch.t_total_ms() / traditional.t_total_ms(),
                     (traditional.t_encry_ms() + traditional.t_decry_ms()) / traditional.t_total_ms(), {}};
  r.deltas = {patch.t_trans_ms() - traditional.t_trans_ms(), patch.t_encry_ms() - traditional.t_encry_ms(),
              patch.t_decry_ms() - traditional.t_decry_ms(), patch.t_infer_ms() - traditional.t_infer_ms(),
              patch.t_total_ms() - traditional.t_total_ms()};
  return r;
}

LiveSummary run_live(int trials, const pem::FaceRecord& face, PipelineContext& ctx) {
  if (trials < 1) throw ConfigError("live benchmark needs at least one trial");
  WallClock clock;
  std::array<StageTimes, 2> sums{};
  int wins = 0;
  for (int t = 0; t < trials; ++t) {
    const LatencyBreakdown trad = run_pipeline(Mode::Traditional, face, ctx, clock);
    const LatencyBreakdown ours = run_pipeline(Mode::PatchPath, face, ctx, clock);
    wins += ours.t_total_ms() < trad.t_total_ms() ? 1 : 0;
    for (const LatencyBreakdown* b : {&trad, &ours}) {
      StageTimes& s = sums[static_cast<std::size_t>(b->mode())];
      s.t_trans += b->t_trans_ms();
      s.t_encry += b->t_encry_ms();
      s.t_decry += b->t_decry_ms();
      s.t_infer += b->t_infer_ms();
    }
  }
  const auto mean = [&](Mode m) {
    const StageTimes& s = sums[static_cast<std::size_t>(m)];
    const double n = trials;
    return LatencyBreakdown(m, s.t_trans / n, s.t_encry / n, s.t_decry / n, s.t_infer / n);
  };
  return {trials, wins, compare(mean(Mode::Traditional), mean(Mode::PatchPath))};
}

std::string render_table(const ComparisonReport& r) {
  std::string out = fmt::format("{:<12}{:>14}{:>10}{:>10}{:>12}{:>10}\n", "method", "transmission", "encry",
                                "decry", "inference", "total");
  for (const LatencyBreakdown* b : {&r.traditional, &r.patch}) {
    out += fmt::format("{:<12}{:>14.2f}{:>10.2f}{:>10.2f}{:>12.2f}{:>10.2f}\n", to_string(b->mode()), b->t_trans_ms(),
                       b->t_encry_ms(), b->t_decry_ms(), b->t_infer_ms(), b->t_total_ms());
  }
  out += fmt::format("all times in ms; ratio ours/traditional = {:.4f} ({:.1f}%); encryption+decryption share of "
                     "traditional = {:.3f}\n",
                     r.ratio, 100.0 * r.ratio, r.crypto_share);
  return out;
}

std::string to_json(const ComparisonReport& r) {
  auto row = [](const LatencyBreakdown& b) {
    return nlohmann::ordered_json{{"t_trans", b.t_trans_ms()}, {"t_encry", b.t_encry_ms()}, {"t_decry", b.t_decry_ms()},
                                  {"t_infer", b.t_infer_ms()}, {"t_total", b.t_total_ms()}};
  };
  nlohmann::ordered_json j;
  j["traditional"] = row(r.traditional);
  j["ours"] = row(r.patch);
  j["ratio"] = r.ratio;
  j["crypto_share"] = r.crypto_share;
  j["delta"] = {{"t_trans", r.deltas[0]}, {"t_encry", r.deltas[1]}, {"t_decry", r.deltas[2]},
                {"t_infer", r.deltas[3]}, {"t_total", r.deltas[4]}};
  return j.dump(2);
}

}  // namespace spf::bench
