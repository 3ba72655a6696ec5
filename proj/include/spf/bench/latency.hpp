#pragma once

// End-to-end latency of the two deployment paths:
//   Traditional: full face image -> encrypt -> transmit -> decrypt -> inference
//   PatchPath:   skin patches                -> transmit            -> inference
// with T_total = T_trans + T_encry + T_decry + T_infer.

#include <array>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "spf/bench/crypto.hpp"
#include "spf/model/network.hpp"
#include "spf/pem/pem.hpp"

namespace spf::bench {

enum class Mode : std::uint8_t { Traditional, PatchPath };
std::string_view to_string(Mode mode);

enum class Stage : std::uint8_t { Transmission, Encrypt, Decrypt, Inference };

struct ChannelConfig {
  double rtt_ms = 3.0;
  double bandwidth_bytes_per_ms = 1000.0;

  void validate() const;
};

// rtt_ms + bytes / bandwidth.
double simulate_transmission(std::size_t payload_bytes, const ChannelConfig& channel);

class LatencyBreakdown {
 public:
  // Validates non-negative stages and zero crypto time on the patch path;
  // the total is the plain sum of the four stages.
  LatencyBreakdown(Mode mode, double t_trans_ms, double t_encry_ms, double t_decry_ms, double t_infer_ms);

  Mode mode() const noexcept { return mode_; }
  double t_trans_ms() const noexcept { return t_trans_; }
  double t_encry_ms() const noexcept { return t_encry_; }
  double t_decry_ms() const noexcept { return t_decry_; }
  double t_infer_ms() const noexcept { return t_infer_; }
  double t_total_ms() const noexcept { return t_total_; }
  double stage(Stage s) const noexcept;

 private:
  Mode mode_;
  double t_trans_;
  double t_encry_;
  double t_decry_;
  double t_infer_;
  double t_total_;
};

// Decides how long each stage "took". The work is always executed; a
// source either measures it or substitutes its own numbers.
class TimingSource {
 public:
  virtual ~TimingSource() = default;
  // `modeled_ms` is the channel model's estimate, used for transmission.
  virtual double time(Mode mode, Stage stage, double modeled_ms, const std::function<void()>& work) = 0;
};

// Wall clock for crypto and inference, channel model for transmission.
class WallClock final : public TimingSource {
 public:
  double time(Mode mode, Stage stage, double modeled_ms, const std::function<void()>& work) override;
};

struct StageTimes {
  double t_trans = 0.0;
  double t_encry = 0.0;
  double t_decry = 0.0;
  double t_infer = 0.0;

  double get(Stage s) const;
};

// Replays a fixed table, e.g. a published measurement.
class FixedTiming final : public TimingSource {
 public:
  FixedTiming(StageTimes traditional, StageTimes patch_path) : rows_{traditional, patch_path} {}
  double time(Mode mode, Stage stage, double modeled_ms, const std::function<void()>& work) override;

  const StageTimes& row(Mode mode) const { return rows_[static_cast<std::size_t>(mode)]; }

 private:
  std::array<StageTimes, 2> rows_;
};

// Fixture JSON: {"traditional": {"t_trans":..,"t_encry":..,"t_decry":..,"t_infer":..},
//                "ours": {...}}
FixedTiming load_fixture(const std::filesystem::path& path);
FixedTiming parse_fixture(std::string_view json_text);

// Key, nonce ladder and model shared by consecutive pipeline runs.
struct PipelineContext {
  Key key = random_key();
  NonceLadder nonces;
  const model::Model* model = nullptr;
  ChannelConfig channel;
  std::uint64_t patch_seed = 0;
  // Filled by the last run, for inspection.
  std::size_t last_payload_bytes = 0;
  model::Score last_score;
};

// Traditional: the record's full image is quantized to 8 bits, sealed,
// "sent", opened, and the server runs patch extraction and the model.
// PatchPath: the client extracts patches, quantizes and "sends" only those;
// the server dequantizes and runs the model.
LatencyBreakdown run_pipeline(Mode mode, const pem::FaceRecord& face, PipelineContext& ctx, TimingSource& timing);

struct ComparisonReport {
  LatencyBreakdown traditional;
  LatencyBreakdown patch;
  double ratio = 0.0;         // patch total / traditional total
  double crypto_share = 0.0;  // (encry + decry) / traditional total
  std::array<double, 5> deltas{};  // patch - traditional per stage and total
};

// Throws UndefinedMetricError when the traditional total is zero.
ComparisonReport compare(const LatencyBreakdown& traditional, const LatencyBreakdown& patch);

std::string render_table(const ComparisonReport& report);

// Repeated wall-clock runs of both paths on the same face and channel.
struct LiveSummary {
  int trials = 0;
  int patch_faster = 0;  // trials where the patch path's total was lower
  ComparisonReport mean;  // per-stage means over all trials
};

LiveSummary run_live(int trials, const pem::FaceRecord& face, PipelineContext& ctx);
std::string to_json(const ComparisonReport& report);

}  // namespace spf::bench
