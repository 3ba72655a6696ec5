#include "spf/pem/synthetic_face.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spf::pem {

Keypoints canonical_keypoints(const FacePose& pose, Rng* rng, double variation) {
  auto j = [&](double spread) { return rng != nullptr ? rng->uniform(-spread, spread) * variation : 0.0; };
  const double mouth_half_width = 0.26 + j(0.04);
  const double mouth_y = 0.83 + j(0.06);
  const std::array<Point, 6> unit{
      Point{-0.5 + j(0.02), j(0.02)},
      Point{0.5 + j(0.02), j(0.02)},
      Point{j(0.05), 0.52 + j(0.06)},
      Point{-mouth_half_width + j(0.02), mouth_y + j(0.02)},
      Point{mouth_half_width + j(0.02), mouth_y + j(0.02)},
      Point{j(0.04), 1.35 + j(0.08)},
  };
  const double a = pose.roll_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  std::array<Point, 6> out{};
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const double x = unit[i].x * pose.inter_ocular;
    const double y = unit[i].y * pose.inter_ocular;
    out[i] = {pose.center.x + c * x - s * y, pose.center.y + s * x + c * y};
  }
  return Keypoints::from_points(out);
}

Keypoints random_keypoints(Rng& rng, ImageSize size, double aligned_inter_ocular) {
  const double extent = std::min(size.width, size.height);
  FacePose pose;
  pose.inter_ocular = rng.uniform(0.25, 0.40) * extent;
  pose.roll_degrees = rng.uniform(-15.0, 15.0);
  // Keep the whole face (about 1.0 x 1.6 IOD around the eyes) on the canvas.
  const double span = std::max(pose.inter_ocular, aligned_inter_ocular);
  const double margin_x = 0.9 * span;
  const double top = 0.5 * span;
  const double bottom = 1.6 * span;
  pose.center = {rng.uniform(margin_x, size.width - 1.0 - margin_x), rng.uniform(top, size.height - 1.0 - bottom)};
  return canonical_keypoints(pose, &rng);
}

FaceRecord render_face(const Keypoints& kp, ImageSize size, Rng& rng, std::string source_id) {
  const auto w = static_cast<std::size_t>(size.width);
  const auto h = static_cast<std::size_t>(size.height);
  const double iod = kp.inter_ocular();
  const std::array<double, 3> skin{0.80 + rng.uniform(-0.05, 0.05), 0.62 + rng.uniform(-0.05, 0.05),
                                   0.52 + rng.uniform(-0.05, 0.05)};
  struct Blob {
    Point center;
    double sigma;
    double depth;
  };
  const Point mouth{(kp.mouth_left.x + kp.mouth_right.x) / 2.0, (kp.mouth_left.y + kp.mouth_right.y) / 2.0};
  const std::array<Blob, 4> blobs{
      Blob{kp.left_eye_outer, 0.08 * iod, 0.7},
      Blob{kp.right_eye_outer, 0.08 * iod, 0.7},
      Blob{kp.nose_tip, 0.06 * iod, 0.3},
      Blob{mouth, 0.09 * iod, 0.5},
  };
  FaceRecord record{nn::Tensor(nn::Shape{1, 3, h, w}), kp, std::move(source_id)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double shade = 1.0;
      for (const Blob& b : blobs) {
        const double dx = static_cast<double>(x) - b.center.x;
        const double dy = static_cast<double>(y) - b.center.y;
        shade -= b.depth * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      for (std::size_t c = 0; c < 3; ++c) {
        record.image.at(0, c, y, x) = static_cast<float>(std::clamp(skin[c] * shade, 0.0, 1.0));
      }
    }
  }
  return record;
}

}  // namespace spf::pem
