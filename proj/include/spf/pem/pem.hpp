#pragma once

// Patch extraction: aligns a face from six keypoints, builds the left-cheek,
// right-cheek and chin skin regions, keeps them clear of every facial
// feature, jitters them, and resamples the selected windows into patches.
//
// Coordinates are pixel centers: pixel (row r, col c) sits at (x=c, y=r) and
// covers [c-0.5, c+0.5] x [r-0.5, r+0.5]. "Left" and "right" are image-left
// and image-right.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spf/common/rng.hpp"
#include "spf/nn/tensor.hpp"

namespace spf::pem {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double distance(Point a, Point b);

struct ImageSize {
  int width = 0;
  int height = 0;
};

struct Keypoints {
  Point left_eye_outer;
  Point right_eye_outer;
  Point nose_tip;
  Point mouth_left;
  Point mouth_right;
  Point chin_bottom;

  static constexpr std::array<std::string_view, 6> kNames{
      "left_eye_outer", "right_eye_outer", "nose_tip", "mouth_left", "mouth_right", "chin_bottom"};

  double inter_ocular() const { return distance(left_eye_outer, right_eye_outer); }
  std::array<Point, 6> points() const {
    return {left_eye_outer, right_eye_outer, nose_tip, mouth_left, mouth_right, chin_bottom};
  }
  static Keypoints from_points(const std::array<Point, 6>& p) { return {p[0], p[1], p[2], p[3], p[4], p[5]}; }

  friend bool operator==(const Keypoints&, const Keypoints&) = default;
};

// Throws GeometryError when the eyes coincide or a point leaves the image.
void validate(const Keypoints& keypoints, ImageSize size);

// image is [1,3,H,W] with values in [0,1].
struct FaceRecord {
  nn::Tensor image;
  Keypoints keypoints;
  std::string source_id;

  ImageSize size() const {
    return {static_cast<int>(image.shape().w), static_cast<int>(image.shape().h)};
  }
};

enum class RegionId : std::uint8_t { LeftCheek = 0, RightCheek = 1, Chin = 2 };

std::string_view to_string(RegionId id);

struct IntOffset {
  int dx = 0;
  int dy = 0;

  friend bool operator==(const IntOffset&, const IntOffset&) = default;
};

// Axis-aligned square window [center +- half_extent].
struct PatchRegion {
  Point center;
  double half_extent = 0.0;
  RegionId region_id = RegionId::LeftCheek;
  IntOffset jitter_offset;

  friend bool operator==(const PatchRegion&, const PatchRegion&) = default;
};

struct Disc {
  Point center;
  double radius = 0.0;
};

// Every factor is relative to the inter-ocular distance.
struct PemConfig {
  double aligned_inter_ocular = 96.0;  // px after alignment
  double eye_radius = 0.25;
  double nose_radius = 0.20;
  double mouth_radius = 0.15;
  double chin_radius = 0.10;
  double cheek_outward_shift = 0.05;  // along the eye line, away from the nose
  double chin_fraction = 0.5;         // from mouth midpoint toward chin_bottom
  double half_extent = 0.10;
  double max_shift_fraction = 0.08;
  int max_jitter_attempts = 32;
  int patch_size = 64;
};

struct PatchSet {
  std::vector<nn::Tensor> patches;  // each [1,3,S,S]
  std::vector<PatchRegion> regions;
  std::uint64_t seed = 0;
};

// Everything a region must respect: feature exclusion discs and image bounds.
struct RegionConstraints {
  std::vector<Disc> zones;
  ImageSize bounds;
};

// Rotates the eye line to horizontal and rescales the inter-ocular distance
// to cfg.aligned_inter_ocular, about the eye midpoint. Output keeps the input
// size; pixels are resampled bilinearly and keypoints mapped by the same
// similarity transform.
FaceRecord align(const FaceRecord& record, const PemConfig& cfg = {});

// One disc per keypoint.
std::vector<Disc> exclusion_zones(const Keypoints& keypoints, const PemConfig& cfg = {});

// Closed-set test: touching counts as intersecting.
bool intersects(const PatchRegion& region, const Disc& zone);
bool inside(const PatchRegion& region, ImageSize bounds);
bool satisfies(const PatchRegion& region, const RegionConstraints& constraints);

RegionConstraints constraints_for(const Keypoints& keypoints, ImageSize bounds, const PemConfig& cfg = {});

// Left cheek, right cheek, chin, in that order. Throws InfeasibleRegionError
// naming the first region that leaves the image or touches a zone.
std::array<PatchRegion, 3> candidate_regions(const Keypoints& keypoints, ImageSize bounds,
                                             const PemConfig& cfg = {});

// Shifts the center by integer offsets uniform in [-max_shift, max_shift]^2,
// redrawing until the region is valid. After max_attempts failures the
// unshifted region is returned.
PatchRegion jitter(const PatchRegion& region, const RegionConstraints& constraints, Rng& rng, int max_shift,
                   int max_attempts = 32);

// Bilinear resample of the region window to [1,3,S,S].
nn::Tensor extract(const nn::Tensor& image, const PatchRegion& region, int out_size);

// Draws k distinct regions without replacement, jitters and extracts each.
// `record` must already be aligned.
PatchSet select_patches(const FaceRecord& record, int k, int out_size, std::uint64_t seed,
                        const PemConfig& cfg = {});

}  // namespace spf::pem
