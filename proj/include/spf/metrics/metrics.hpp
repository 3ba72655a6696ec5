#pragma once

// Presentation-attack metrics. The positive class is Attack:
//   tp = attack rejected, fn = attack accepted,
//   tn = bona fide accepted, fp = bona fide rejected.
// Decisions use model::decide, so ties at the threshold count as Attack.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spf/model/types.hpp"

namespace spf::metrics {

struct ScoredSample {
  model::Score score;
  model::Label label = model::Label::Attack;
};

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t attacks() const noexcept { return tp + fn; }
  std::uint64_t bona_fides() const noexcept { return tn + fp; }
  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  // Samples decided BonaFide.
  std::uint64_t accepted() const noexcept { return tn + fn; }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Throws DataError on an empty list.
ConfusionCounts confusion(std::span<const ScoredSample> samples, double threshold);

// Attacks accepted as bona fide: fn / (tp + fn). UndefinedMetricError without attacks.
double apcer(const ConfusionCounts& counts);
// Bona fides rejected: fp / (tn + fp). UndefinedMetricError without bona fides.
double bpcer(const ConfusionCounts& counts);
double acer(double apcer, double bpcer);

// Rates are empty when their class is absent from the data.
struct MetricsReport {
  ConfusionCounts counts;
  std::optional<double> apcer;
  std::optional<double> bpcer;
  std::optional<double> acer;
  double threshold = 0.5;
  std::uint64_t n_samples = 0;
};

MetricsReport report(std::span<const ScoredSample> samples, double threshold);

struct SweepPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  std::uint64_t accepted = 0;
};

struct SweepCurve {
  std::vector<SweepPoint> points;  // thresholds strictly increasing
  double best_threshold = 0.0;     // smallest threshold reaching the minimum ACER
  double best_acer = 0.0;
};

// Evaluates thresholds i / (n_points + 1), i = 1..n_points. Needs both classes.
SweepCurve sweep(std::span<const ScoredSample> samples, int n_points);

std::string to_json(const MetricsReport& report);
std::string to_json(const SweepCurve& curve);
// Header: threshold,apcer,bpcer,acer
std::string to_csv(const SweepCurve& curve);

}  // namespace spf::metrics
