#include "spf/nn/weights_io.hpp"

#include <limits>

#include "spf/common/bytes.hpp"

namespace spf::nn {
namespace {

constexpr std::string_view kMagic = "SPFW";

}  // namespace

std::vector<std::uint8_t> encode_w32(std::span<const NamedTensor> entries) {
  ByteWriter out;
  out.text(kMagic);
  out.u16(kW32Version);
  out.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& entry : entries) {
    if (entry.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw IoError("w32: tensor name too long: " + entry.name.substr(0, 32) + "...");
    }
    out.u16(static_cast<std::uint16_t>(entry.name.size()));
    out.text(entry.name);
    out.u8(4);
    const Shape s = entry.tensor.shape();
    for (std::size_t extent : {s.n, s.c, s.h, s.w}) {
      if (extent > std::numeric_limits<std::uint32_t>::max()) throw IoError("w32: extent overflow");
      out.u32(static_cast<std::uint32_t>(extent));
    }
    for (float v : entry.tensor.data()) out.f32(v);
  }
  return out.take();
}

std::vector<NamedTensor> decode_w32(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (in.text(kMagic.size()) != kMagic) throw PayloadFormatError("w32: bad magic");
  if (const auto version = in.u16(); version != kW32Version) {
    throw PayloadFormatError("w32: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor entry;
    entry.name = in.text(in.u16());
    if (const auto rank = in.u8(); rank != 4) {
      throw PayloadFormatError("w32: entry " + entry.name + " has rank " + std::to_string(rank));
    }
    Shape s;
    s.n = in.u32();
    s.c = in.u32();
    s.h = in.u32();
    s.w = in.u32();
    // Guard the allocation before trusting the extents.
    const auto payload = static_cast<unsigned __int128>(s.n) * s.c * s.h * s.w * 4;
    if (payload > in.remaining()) {
      throw PayloadFormatError("w32: entry " + entry.name + " payload exceeds file size");
    }
    std::vector<float> data(s.size());
    for (float& v : data) v = in.f32();
    entry.tensor = Tensor(s, std::move(data));
    entries.push_back(std::move(entry));
  }
  if (in.remaining() != 0) throw PayloadFormatError("w32: trailing bytes");
  return entries;
}

void write_w32(const std::filesystem::path& path, std::span<const NamedTensor> entries) {
  write_file_bytes(path, encode_w32(entries));
}

std::vector<NamedTensor> read_w32(const std::filesystem::path& path) {
  return decode_w32(read_file_bytes(path));
}

}  // namespace spf::nn
