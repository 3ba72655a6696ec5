#include "spf/pem/pem.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "spf/pem/image.hpp"

namespace spf::pem {
namespace {

Point midpoint(Point a, Point b) { return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0}; }

Point lerp(Point a, Point b, double t) { return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}; }

// p' = mid + scale * R(-angle) (p - mid)
struct Similarity {
  Point pivot;
  double cos_a;
  double sin_a;
  double scale;

  Point forward(Point p) const {
    const double dx = p.x - pivot.x;
    const double dy = p.y - pivot.y;
    return {pivot.x + scale * (cos_a * dx + sin_a * dy), pivot.y + scale * (-sin_a * dx + cos_a * dy)};
  }
  Point inverse(Point q) const {
    const double dx = (q.x - pivot.x) / scale;
    const double dy = (q.y - pivot.y) / scale;
    return {pivot.x + cos_a * dx - sin_a * dy, pivot.y + sin_a * dx + cos_a * dy};
  }
};

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string_view to_string(RegionId id) {
  switch (id) {
    case RegionId::LeftCheek:
      return "LeftCheek";
    case RegionId::RightCheek:
      return "RightCheek";
    case RegionId::Chin:
      return "Chin";
  }
  return "Unknown";
}

void validate(const Keypoints& keypoints, ImageSize size) {
  if (!(keypoints.inter_ocular() > 0.0)) {
    throw GeometryError("degenerate keypoints: inter-ocular distance is zero");
  }
  const auto points = keypoints.points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 ||
        p.x > size.width - 1.0 || p.y > size.height - 1.0) {
      throw GeometryError("keypoint " + std::string(Keypoints::kNames[i]) + " outside the " +
                          std::to_string(size.width) + "x" + std::to_string(size.height) + " image");
    }
  }
}

FaceRecord align(const FaceRecord& record, const PemConfig& cfg) {
  const ImageSize size = record.size();
  const Keypoints& kp = record.keypoints;
  validate(kp, size);
  const double angle = std::atan2(kp.right_eye_outer.y - kp.left_eye_outer.y,
                                  kp.right_eye_outer.x - kp.left_eye_outer.x);
  const Similarity transform{midpoint(kp.left_eye_outer, kp.right_eye_outer), std::cos(angle), std::sin(angle),
                             cfg.aligned_inter_ocular / kp.inter_ocular()};

  FaceRecord out;
  out.source_id = record.source_id;
  auto mapped = kp.points();
  for (Point& p : mapped) p = transform.forward(p);
  out.keypoints = Keypoints::from_points(mapped);

  if (angle == 0.0 && transform.scale == 1.0) {
    out.image = record.image;
    return out;
  }
  out.image = nn::Tensor(record.image.shape());
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const Point src = transform.inverse({static_cast<double>(x), static_cast<double>(y)});
      for (std::size_t c = 0; c < 3; ++c) {
        out.image.at(0, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            sample_bilinear(record.image, c, src.x, src.y);
      }
    }
  }
  return out;
}

std::vector<Disc> exclusion_zones(const Keypoints& keypoints, const PemConfig& cfg) {
  const double iod = keypoints.inter_ocular();
  return {
      {keypoints.left_eye_outer, cfg.eye_radius * iod},   {keypoints.right_eye_outer, cfg.eye_radius * iod},
      {keypoints.nose_tip, cfg.nose_radius * iod},        {keypoints.mouth_left, cfg.mouth_radius * iod},
      {keypoints.mouth_right, cfg.mouth_radius * iod},    {keypoints.chin_bottom, cfg.chin_radius * iod},
  };
}

bool intersects(const PatchRegion& region, const Disc& zone) {
  // Distance from the disc center to the nearest point of the square.
  const double dx = std::max(std::abs(zone.center.x - region.center.x) - region.half_extent, 0.0);
  const double dy = std::max(std::abs(zone.center.y - region.center.y) - region.half_extent, 0.0);
  return dx * dx + dy * dy <= zone.radius * zone.radius;
}

bool inside(const PatchRegion& region, ImageSize bounds) {
  const double h = region.half_extent;
  return region.center.x - h >= -0.5 && region.center.y - h >= -0.5 &&
         region.center.x + h <= bounds.width - 0.5 && region.center.y + h <= bounds.height - 0.5;
}

bool satisfies(const PatchRegion& region, const RegionConstraints& constraints) {
  if (!inside(region, constraints.bounds)) return false;
  return std::none_of(constraints.zones.begin(), constraints.zones.end(),
                      [&](const Disc& zone) { return intersects(region, zone); });
}

RegionConstraints constraints_for(const Keypoints& keypoints, ImageSize bounds, const PemConfig& cfg) {
  return {exclusion_zones(keypoints, cfg), bounds};
}

std::array<PatchRegion, 3> candidate_regions(const Keypoints& kp, ImageSize bounds, const PemConfig& cfg) {
  const double iod = kp.inter_ocular();
  if (!(iod > 0.0)) throw GeometryError("degenerate keypoints: inter-ocular distance is zero");
  // Unit vector along the eye line pointing image-left.
  const Point outward{(kp.left_eye_outer.x - kp.right_eye_outer.x) / iod,
                      (kp.left_eye_outer.y - kp.right_eye_outer.y) / iod};
  const double shift = cfg.cheek_outward_shift * iod;
  const double half = cfg.half_extent * iod;

  const Point left = midpoint(kp.left_eye_outer, kp.mouth_left);
  const Point right = midpoint(kp.right_eye_outer, kp.mouth_right);
  const std::array<PatchRegion, 3> regions{
      PatchRegion{{left.x + shift * outward.x, left.y + shift * outward.y}, half, RegionId::LeftCheek, {}},
      PatchRegion{{right.x - shift * outward.x, right.y - shift * outward.y}, half, RegionId::RightCheek, {}},
      PatchRegion{lerp(midpoint(kp.mouth_left, kp.mouth_right), kp.chin_bottom, cfg.chin_fraction), half,
                  RegionId::Chin, {}},
  };
  const RegionConstraints constraints = constraints_for(kp, bounds, cfg);
  for (const auto& region : regions) {
    if (!inside(region, bounds)) {
      throw InfeasibleRegionError(std::string(to_string(region.region_id)) + " region leaves the image");
    }
    for (std::size_t z = 0; z < constraints.zones.size(); ++z) {
      if (intersects(region, constraints.zones[z])) {
        throw InfeasibleRegionError(std::string(to_string(region.region_id)) + " region overlaps the " +
                                    std::string(Keypoints::kNames[z]) + " exclusion zone");
      }
    }
  }
  return regions;
}

PatchRegion jitter(const PatchRegion& region, const RegionConstraints& constraints, Rng& rng, int max_shift,
                   int max_attempts) {
  if (max_shift <= 0) return region;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const IntOffset offset{static_cast<int>(rng.uniform_int(-max_shift, max_shift)),
                           static_cast<int>(rng.uniform_int(-max_shift, max_shift))};
    PatchRegion shifted = region;
    shifted.center.x += offset.dx;
    shifted.center.y += offset.dy;
    shifted.jitter_offset = offset;
    if (satisfies(shifted, constraints)) return shifted;
  }
  spdlog::debug("jitter: no valid shift for {} after {} attempts; keeping the unshifted region",
                to_string(region.region_id), max_attempts);
  return region;
}

nn::Tensor extract(const nn::Tensor& image, const PatchRegion& region, int out_size) {
  if (out_size < 1) throw ConfigError("patch size must be positive");
  const auto s = static_cast<std::size_t>(out_size);
  nn::Tensor patch(nn::Shape{1, 3, s, s});
  const double step = 2.0 * region.half_extent / out_size;
  const double x0 = region.center.x - region.half_extent;
  const double y0 = region.center.y - region.half_extent;
  for (std::size_t r = 0; r < s; ++r) {
    const double y = y0 + (static_cast<double>(r) + 0.5) * step;
    for (std::size_t col = 0; col < s; ++col) {
      const double x = x0 + (static_cast<double>(col) + 0.5) * step;
      for (std::size_t c = 0; c < 3; ++c) {
        patch.at(0, c, r, col) = std::clamp(sample_bilinear(image, c, x, y), 0.0f, 1.0f);
      }
    }
  }
  return patch;
}

PatchSet select_patches(const FaceRecord& record, int k, int out_size, std::uint64_t seed, const PemConfig& cfg) {
  if (k < 1 || k > 3) throw ConfigError("patch count must be 1, 2 or 3 (got " + std::to_string(k) + ")");
  const ImageSize bounds = record.size();
  const auto regions = candidate_regions(record.keypoints, bounds, cfg);
  const RegionConstraints constraints = constraints_for(record.keypoints, bounds, cfg);
  const int max_shift = static_cast<int>(std::lround(cfg.max_shift_fraction * record.keypoints.inter_ocular()));

  Rng rng(seed);
  std::array<std::size_t, 3> order{0, 1, 2};
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), 2));
    std::swap(order[i], order[j]);
  }
  PatchSet set;
  set.seed = seed;
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const PatchRegion chosen = jitter(regions[order[i]], constraints, rng, max_shift, cfg.max_jitter_attempts);
    set.patches.push_back(extract(record.image, chosen, out_size));
    set.regions.push_back(chosen);
  }
  return set;
}

}  // namespace spf::pem
