#pragma once

// Procedural faces for tests, demos and the acceptance corpora: plausible
// keypoint layouts plus a rendered image with dark blobs at the eyes, nose
// and mouth so alignment can be checked from pixels alone.

#include "spf/common/rng.hpp"
#include "spf/pem/pem.hpp"

namespace spf::pem {

struct FacePose {
  Point center{64.0, 64.0};  // eye midpoint
  double inter_ocular = 48.0;
  double roll_degrees = 0.0;
};

// Canonical layout in inter-ocular units (eye midpoint at the origin, y down)
// with small per-point perturbations when `variation` is non-zero.
Keypoints canonical_keypoints(const FacePose& pose, Rng* rng = nullptr, double variation = 1.0);

// Random pose and layout fitted into `size`. When `aligned_inter_ocular` is
// positive the face also fits after alignment rescales it to that distance.
Keypoints random_keypoints(Rng& rng, ImageSize size, double aligned_inter_ocular = 0.0);

FaceRecord render_face(const Keypoints& keypoints, ImageSize size, Rng& rng, std::string source_id = "synthetic");

}  // namespace spf::pem
