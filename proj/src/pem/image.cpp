#include "spf/pem/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <nlohmann/json.hpp>

#include "spf/common/bytes.hpp"

namespace spf::pem {

float sample_bilinear(const nn::Tensor& image, std::size_t channel, double x, double y) {
  const nn::Shape s = image.shape();
  x = std::clamp(x, 0.0, static_cast<double>(s.w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(s.h - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, s.w - 1);
  const std::size_t y1 = std::min(y0 + 1, s.h - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = (1.0 - fx) * image.at(0, channel, y0, x0) + fx * image.at(0, channel, y0, x1);
  const double bottom = (1.0 - fx) * image.at(0, channel, y1, x0) + fx * image.at(0, channel, y1, x1);
  return static_cast<float>((1.0 - fy) * top + fy * bottom);
}

nn::Tensor upsample2x(const nn::Tensor& image) {
  const nn::Shape s = image.shape();
  nn::Tensor out(nn::Shape{1, s.c, 2 * s.h, 2 * s.w});
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t y = 0; y < 2 * s.h; ++y)
      for (std::size_t x = 0; x < 2 * s.w; ++x) {
        out.at(0, c, y, x) = sample_bilinear(image, c, (static_cast<double>(x) + 0.5) / 2.0 - 0.5,
                                             (static_cast<double>(y) + 0.5) / 2.0 - 0.5);
      }
  return out;
}

std::vector<std::uint8_t> quantize_u8(const nn::Tensor& tensor) {
  std::vector<std::uint8_t> out(tensor.size());
  const auto values = tensor.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

nn::Tensor dequantize_u8(std::span<const std::uint8_t> bytes, nn::Shape shape) {
  if (bytes.size() != shape.size()) {
    throw ShapeError(std::to_string(bytes.size()) + " pixel bytes do not fill " + shape.to_string());
  }
  nn::Tensor out(shape);
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<float>(bytes[i]) / 255.0f;
  return out;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') token.push_back(static_cast<char>(bytes[pos++]));
  return token;
}

int parse_dimension(const std::string& token, const std::filesystem::path& path) {
  try {
    const int v = std::stoi(token);
    if (v <= 0 || v > 65535) throw std::out_of_range(token);
    return v;
  } catch (const std::exception&) {
    throw PayloadFormatError(path.string() + ": bad PPM header field '" + token + "'");
  }
}

}  // namespace

nn::Tensor read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P6") throw PayloadFormatError(path.string() + ": not a binary PPM (P6)");
  const int width = parse_dimension(next_token(bytes, pos), path);
  const int height = parse_dimension(next_token(bytes, pos), path);
  if (parse_dimension(next_token(bytes, pos), path) != 255) {
    throw PayloadFormatError(path.string() + ": only maxval 255 is supported");
  }
  ++pos;  // single whitespace byte before the raster
  const auto w = static_cast<std::size_t>(width);
  const auto h = static_cast<std::size_t>(height);
  if (bytes.size() < pos + w * h * 3) throw PayloadFormatError(path.string() + ": truncated raster");
  nn::Tensor image(nn::Shape{1, 3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        image.at(0, c, y, x) = static_cast<float>(bytes[pos + (y * w + x) * 3 + c]) / 255.0f;
      }
  return image;
}

void write_ppm(const std::filesystem::path& path, const nn::Tensor& image) {
  const nn::Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("write_ppm: expected [1,3,H,W], got " + s.to_string());
  const std::string header = "P6\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + s.size());
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(image.at(0, c, y, x), 0.0f, 1.0f) * 255.0f)));
      }
  write_file_bytes(path, bytes);
}

Keypoints keypoints_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::array<Point, 6> points{};
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& xy = j.at(std::string(Keypoints::kNames[i]));
      if (!xy.is_array() || xy.size() != 2) throw DataError("keypoint " + std::string(Keypoints::kNames[i]) + " must be [x,y]");
      points[i] = {xy[0].get<double>(), xy[1].get<double>()};
    }
    return Keypoints::from_points(points);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("keypoint sidecar: ") + e.what());
  }
}

std::string keypoints_to_json(const Keypoints& keypoints) {
  nlohmann::ordered_json j;
  const auto points = keypoints.points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    j[std::string(Keypoints::kNames[i])] = {points[i].x, points[i].y};
  }
  return j.dump();
}

}  // namespace spf::pem
