#pragma once

// Wire format, little-endian throughout:
//
//   frame    = "SPF1" | u8 type | u32 body_length | body
//   predict  = u16 version | u64 request_id | u8 k | u16 S | u8 channels | k*channels*S*S pixel bytes
//   response = u64 request_id | f64 p_bona_fide | u8 label | f64 inference_ms | u16 n | digest[n]
//   health   = (empty request) ; response u16 version | u8 branches | u16 S | u16 n | digest[n]
//   error    = u16 code | u16 n | message[n]

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spf/common/errors.hpp"
#include "spf/model/types.hpp"
#include "spf/nn/tensor.hpp"

namespace spf::pem {
struct PatchSet;
}

namespace spf::service {

inline constexpr std::array<std::uint8_t, 4> kMagic{'S', 'P', 'F', '1'};
inline constexpr std::size_t kFrameHeaderSize = 9;
inline constexpr std::size_t kPredictHeaderSize = 14;
inline constexpr std::uint16_t kProtocolVersion = 1;
inline constexpr int kChannels = 3;
inline constexpr int kMaxPatches = 3;
inline constexpr int kMaxPatchSize = 512;
// Largest legal predict body; anything longer is rejected before reading it.
inline constexpr std::uint32_t kMaxBodySize =
    kPredictHeaderSize + kMaxPatches * kChannels * kMaxPatchSize * kMaxPatchSize;

enum class MessageType : std::uint8_t { Predict = 1, Health = 2, Error = 255 };

enum class ErrorCode : std::uint16_t {
  BadMagic = 1,
  BadType = 2,
  TooLarge = 3,
  Malformed = 4,
  Version = 5,
  Arity = 6,
  Shape = 7,
  Busy = 8,
  Internal = 9,
};

std::string_view to_string(ErrorCode code);

// A server-side rejection surfaced to the client unchanged.
class RemoteError : public ProtocolError {
 public:
  RemoteError(ErrorCode code, std::string message);
  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

// Decoding failure carrying the code the server answers with.
class FrameError : public ProtocolError {
 public:
  FrameError(ErrorCode code, const std::string& what) : ProtocolError(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct FrameHeader {
  MessageType type = MessageType::Predict;
  std::uint32_t body_length = 0;
};

// Validates magic, type and length limit; throws FrameError.
FrameHeader parse_frame_header(std::span<const std::uint8_t> header);
std::vector<std::uint8_t> encode_frame(MessageType type, std::span<const std::uint8_t> body);

struct PatchRequest {
  std::uint16_t version = kProtocolVersion;
  std::uint64_t request_id = 0;
  int k = 0;
  int patch_size = 0;
  int channels = kChannels;
  std::vector<std::uint8_t> pixels;  // k patches, each channels*S*S, CHW order

  std::size_t pixel_bytes() const {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(channels) *
           static_cast<std::size_t>(patch_size) * static_cast<std::size_t>(patch_size);
  }
  // Dequantized [1,3,S,S] tensors, one per patch.
  std::vector<nn::Tensor> patches() const;
};

// The only client-side serializer: it takes extracted patches, never a face
// image. Returns the complete frame.
std::vector<std::uint8_t> encode_predict_request(std::uint64_t request_id, const pem::PatchSet& patches);
// Body of a predict frame -> request; throws FrameError (Malformed, Version,
// Arity, Shape).
PatchRequest decode_predict_request(std::span<const std::uint8_t> body);

struct PredictionResponse {
  std::uint64_t request_id = 0;
  double p_bona_fide = 0.0;
  model::Label label = model::Label::Attack;
  double inference_ms = 0.0;
  std::string model_digest;

  friend bool operator==(const PredictionResponse&, const PredictionResponse&) = default;
};

struct HealthResponse {
  std::uint16_t version = kProtocolVersion;
  int branches = 0;
  int patch_size = 0;
  std::string model_digest;

  friend bool operator==(const HealthResponse&, const HealthResponse&) = default;
};

std::vector<std::uint8_t> encode_response(const PredictionResponse& response);
PredictionResponse decode_response(std::span<const std::uint8_t> body);
std::vector<std::uint8_t> encode_health(const HealthResponse& response);
HealthResponse decode_health(std::span<const std::uint8_t> body);
std::vector<std::uint8_t> encode_error(ErrorCode code, std::string_view message);
RemoteError decode_error(std::span<const std::uint8_t> body);

}  // namespace spf::service
