#pragma once

// `.w32` container: magic "SPFW", u16 version (1), u32 entry count, then per
// entry: u16 name length, UTF-8 name, u8 rank (always 4), four u32 extents
// in N,C,H,W order, little-endian f32 payload. Used for model weights and
// for persisted patch tensors.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spf/nn/tensor.hpp"

namespace spf::nn {

inline constexpr std::uint16_t kW32Version = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<std::uint8_t> encode_w32(std::span<const NamedTensor> entries);
std::vector<NamedTensor> decode_w32(std::span<const std::uint8_t> bytes);

void write_w32(const std::filesystem::path& path, std::span<const NamedTensor> entries);
std::vector<NamedTensor> read_w32(const std::filesystem::path& path);

}  // namespace spf::nn
