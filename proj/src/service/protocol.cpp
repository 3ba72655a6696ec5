#include "spf/service/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "spf/common/bytes.hpp"
#include "spf/pem/image.hpp"
#include "spf/pem/pem.hpp"

namespace spf::service {
namespace {

std::string short_text(std::string_view s) {
  return std::string(s.substr(0, std::min<std::size_t>(s.size(), 0xffff)));
}

// Truncation while decoding a response or error body.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const PayloadFormatError& e) {
    throw ProtocolError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BAD_MAGIC";
    case ErrorCode::BadType: return "BAD_TYPE";
    case ErrorCode::TooLarge: return "TOO_LARGE";
    case ErrorCode::Malformed: return "MALFORMED";
    case ErrorCode::Version: return "VERSION";
    case ErrorCode::Arity: return "ARITY";
    case ErrorCode::Shape: return "SHAPE";
    case ErrorCode::Busy: return "BUSY";
    case ErrorCode::Internal: return "INTERNAL";
  }
  return "UNKNOWN";
}

RemoteError::RemoteError(ErrorCode code, std::string message)
    : ProtocolError("server error " + std::string(to_string(code)) + ": " + message),
      code_(code),
      message_(std::move(message)) {}

FrameHeader parse_frame_header(std::span<const std::uint8_t> header) {
  if (header.size() != kFrameHeaderSize) throw FrameError(ErrorCode::Malformed, "frame header must be 9 bytes");
  if (!std::equal(kMagic.begin(), kMagic.end(), header.begin())) {
    throw FrameError(ErrorCode::BadMagic, "bad magic");
  }
  ByteReader r(header.subspan(4));
  const std::uint8_t type = r.u8();
  const std::uint32_t length = r.u32();
  if (type != 1 && type != 2 && type != 255) {
    throw FrameError(ErrorCode::BadType, "unknown message type " + std::to_string(type));
  }
  if (length > kMaxBodySize) {
    throw FrameError(ErrorCode::TooLarge, "body of " + std::to_string(length) + " bytes exceeds limit " +
                                              std::to_string(kMaxBodySize));
  }
  return {static_cast<MessageType>(type), length};
}

std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> body) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.bytes(body);
  return w.take();
}

std::vector<nn::Tensor> PatchRequest::patches() const {
  const auto s = static_cast<std::size_t>(patch_size);
  const nn::Shape shape{1, static_cast<std::size_t>(channels), s, s};
  const std::size_t per = shape.size();
  std::vector<nn::Tensor> out;
  for (int i = 0; i < k; ++i) {
    out.push_back(pem::dequantize_u8(std::span(pixels).subspan(static_cast<std::size_t>(i) * per, per), shape));
  }
  return out;
}

std::vector<std::uint8_t> encode_predict_request(std::uint64_t request_id, const pem::PatchSet& patches) {
  const std::size_t k = patches.patches.size();
  if (k < 1 || k > static_cast<std::size_t>(kMaxPatches)) {
    throw ShapeError("patch set must hold 1..3 patches, has " + std::to_string(k));
  }
  const nn::Shape first = patches.patches.front().shape();
  if (first.n != 1 || first.c != kChannels || first.h != first.w || first.h < 1 ||
      first.h > static_cast<std::size_t>(kMaxPatchSize)) {
    throw ShapeError("patch must be [1,3,S,S] with S <= 512, got " + first.to_string());
  }
  ByteWriter w;
  w.u16(kProtocolVersion);
  w.u64(request_id);
  w.u8(static_cast<std::uint8_t>(k));
  w.u16(static_cast<std::uint16_t>(first.h));
  w.u8(kChannels);
  for (const auto& p : patches.patches) {
    if (p.shape() != first) throw ShapeError("patches differ in shape: " + p.shape().to_string());
    w.bytes(pem::quantize_u8(p));
  }
  return encode_frame(MessageType::Predict, w.buffer());
}

PatchRequest decode_predict_request(std::span<const std::uint8_t> body) {
  if (body.size() < kPredictHeaderSize) {
    throw FrameError(ErrorCode::Malformed, "predict body shorter than its header");
  }
  ByteReader r(body);
  PatchRequest req;
  req.version = r.u16();
  req.request_id = r.u64();
  req.k = r.u8();
  req.patch_size = r.u16();
  req.channels = r.u8();
  if (req.version != kProtocolVersion) {
    throw FrameError(ErrorCode::Version, "unsupported protocol version " + std::to_string(req.version));
  }
  if (req.k < 1 || req.k > kMaxPatches) {
    throw FrameError(ErrorCode::Arity, "patch count " + std::to_string(req.k) + " outside 1..3");
  }
  if (req.channels != kChannels || req.patch_size < 1 || req.patch_size > kMaxPatchSize) {
    throw FrameError(ErrorCode::Shape, "patch geometry " + std::to_string(req.channels) + "x" +
                                           std::to_string(req.patch_size) + "x" +
                                           std::to_string(req.patch_size) + " not supported");
  }
  if (r.remaining() != req.pixel_bytes()) {
    throw FrameError(ErrorCode::Malformed, "pixel payload is " + std::to_string(r.remaining()) +
                                               " bytes, header implies " + std::to_string(req.pixel_bytes()));
  }
  const auto px = r.bytes(req.pixel_bytes());
  req.pixels.assign(px.begin(), px.end());
  return req;
}

std::vector<std::uint8_t> encode_response(const PredictionResponse& response) {
  ByteWriter w;
  w.u64(response.request_id);
  w.f64(response.p_bona_fide);
  w.u8(static_cast<std::uint8_t>(response.label));
  w.f64(response.inference_ms);
  const std::string digest = short_text(response.model_digest);
  w.u16(static_cast<std::uint16_t>(digest.size()));
  w.text(digest);
  return w.take();
}

PredictionResponse decode_response(std::span<const std::uint8_t> body) {
  return guarded("prediction response", [&] {
    ByteReader r(body);
    PredictionResponse out;
    out.request_id = r.u64();
    out.p_bona_fide = r.f64();
    const std::uint8_t label = r.u8();
    if (label > 1) throw ProtocolError("prediction response: bad label " + std::to_string(label));
    out.label = static_cast<model::Label>(label);
    out.inference_ms = r.f64();
    out.model_digest = r.text(r.u16());
    if (!std::isfinite(out.p_bona_fide) || out.p_bona_fide < 0.0 || out.p_bona_fide > 1.0) {
      throw ProtocolError("prediction response: probability out of range");
    }
    return out;
  });
}

std::vector<std::uint8_t> encode_health(const HealthResponse& response) {
  ByteWriter w;
  w.u16(response.version);
  w.u8(static_cast<std::uint8_t>(response.branches));
  w.u16(static_cast<std::uint16_t>(response.patch_size));
  const std::string digest = short_text(response.model_digest);
  w.u16(static_cast<std::uint16_t>(digest.size()));
  w.text(digest);
  return w.take();
}

HealthResponse decode_health(std::span<const std::uint8_t> body) {
  return guarded("health response", [&] {
    ByteReader r(body);
    HealthResponse out;
    out.version = r.u16();
    out.branches = r.u8();
    out.patch_size = r.u16();
    out.model_digest = r.text(r.u16());
    return out;
  });
}

std::vector<std::uint8_t> encode_error(ErrorCode code, std::string_view message) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(code));
  const std::string text = short_text(message);
  w.u16(static_cast<std::uint16_t>(text.size()));
  w.text(text);
  return w.take();
}

RemoteError decode_error(std::span<const std::uint8_t> body) {
  return guarded("error frame", [&] {
    ByteReader r(body);
    const auto code = static_cast<ErrorCode>(r.u16());
    return RemoteError(code, r.text(r.u16()));
  });
}

}  // namespace spf::service
