#include "spf/metrics/metrics.hpp"

#include <fmt/format.h>

#include <nlohmann/json.hpp>

#include "spf/common/errors.hpp"

namespace spf::metrics {

using model::Label;

ConfusionCounts confusion(std::span<const ScoredSample> samples, double threshold) {
  if (samples.empty()) throw DataError("confusion: no samples");
  const model::DecisionConfig cfg{threshold};
  ConfusionCounts c;
  for (const auto& s : samples) {
    const bool accepted = model::decide(s.score, cfg) == Label::BonaFide;
    if (s.label == Label::Attack) {
      ++(accepted ? c.fn : c.tp);
    } else {
      ++(accepted ? c.tn : c.fp);
    }
  }
  return c;
}

double apcer(const ConfusionCounts& counts) {
  if (counts.attacks() == 0) throw UndefinedMetricError("APCER is undefined without attack samples");
  return static_cast<double>(counts.fn) / static_cast<double>(counts.attacks());
}

double bpcer(const ConfusionCounts& counts) {
  if (counts.bona_fides() == 0) throw UndefinedMetricError("BPCER is undefined without bona fide samples");
  return static_cast<double>(counts.fp) / static_cast<double>(counts.bona_fides());
}

double acer(double apcer, double bpcer) { return (apcer + bpcer) / 2.0; }

MetricsReport report(std::span<const ScoredSample> samples, double threshold) {
  MetricsReport r;
  r.counts = confusion(samples, threshold);
  r.threshold = threshold;
  r.n_samples = r.counts.total();
  if (r.counts.attacks() > 0) r.apcer = apcer(r.counts);
  if (r.counts.bona_fides() > 0) r.bpcer = bpcer(r.counts);
  if (r.apcer && r.bpcer) r.acer = acer(*r.apcer, *r.bpcer);
  return r;
}

SweepCurve sweep(std::span<const ScoredSample> samples, int n_points) {
  if (n_points < 2) throw ConfigError("sweep needs at least 2 thresholds");
  SweepCurve curve;
  for (int i = 1; i <= n_points; ++i) {
    const double h = static_cast<double>(i) / static_cast<double>(n_points + 1);
    const ConfusionCounts c = confusion(samples, h);
    SweepPoint p{h, apcer(c), bpcer(c), 0.0, c.accepted()};
    p.acer = acer(p.apcer, p.bpcer);
    if (curve.points.empty() || p.acer < curve.best_acer) {
      curve.best_acer = p.acer;
      curve.best_threshold = h;
    }
    curve.points.push_back(p);
  }
  return curve;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["tp"] = r.counts.tp;
  j["tn"] = r.counts.tn;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  j["apcer"] = optional_json(r.apcer);
  j["bpcer"] = optional_json(r.bpcer);
  j["acer"] = optional_json(r.acer);
  j["n"] = r.n_samples;
  return j.dump();
}

std::string to_json(const SweepCurve& curve) {
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"threshold", p.threshold}, {"apcer", p.apcer}, {"bpcer", p.bpcer}, {"acer", p.acer}});
  }
  nlohmann::ordered_json j;
  j["best_threshold"] = curve.best_threshold;
  j["best_acer"] = curve.best_acer;
  j["points"] = std::move(points);
  return j.dump();
}

std::string to_csv(const SweepCurve& curve) {
  std::string out = "threshold,apcer,bpcer,acer\n";
  for (const auto& p : curve.points) {
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", p.threshold, p.apcer, p.bpcer, p.acer);
  }
  return out;
}

}  // namespace spf::metrics
