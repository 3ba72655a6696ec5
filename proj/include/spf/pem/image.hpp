#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>
#include <string_view>

#include "spf/nn/tensor.hpp"
#include "spf/pem/pem.hpp"

namespace spf::pem {

// Bilinear sample at (x, y) in pixel-center coordinates; out-of-range
// coordinates clamp to the border.
float sample_bilinear(const nn::Tensor& image, std::size_t channel, double x, double y);

// 2x bilinear upsampling ([1,C,H,W] -> [1,C,2H,2W]).
nn::Tensor upsample2x(const nn::Tensor& image);

// 8-bit quantization: round(clamp(v, 0, 1) * 255), row-major N,C,H,W.
std::vector<std::uint8_t> quantize_u8(const nn::Tensor& tensor);
nn::Tensor dequantize_u8(std::span<const std::uint8_t> bytes, nn::Shape shape);

// Binary PPM (P6, maxval 255) <-> [1,3,H,W] tensor in [0,1].
nn::Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const nn::Tensor& image);

// Keypoint sidecar: {"left_eye_outer":[x,y], ...} for the six named points.
Keypoints keypoints_from_json(std::string_view text);
std::string keypoints_to_json(const Keypoints& keypoints);

}  // namespace spf::pem
