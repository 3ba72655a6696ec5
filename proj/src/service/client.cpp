#include "spf/service/client.hpp"

#include "socket.hpp"

namespace spf::service {

Client::Client(ClientConfig config) : config_(std::move(config)) {}
Client::~Client() = default;
Client::Client(Client&&) noexcept = default;
Client& Client::operator=(Client&&) noexcept = default;

std::vector<std::uint8_t> Client::exchange(std::span<const std::uint8_t> frame, MessageType expected) {
  last_request_bytes_ = frame.size();
  // A kept-alive connection may have been closed by the server's idle
  // timeout; such a failure is retried once on a fresh connection.
  for (int attempt = 0;; ++attempt) {
    const bool reused = socket_ != nullptr;
    if (!socket_) {
      socket_ = std::make_unique<detail::Socket>(detail::connect_tcp(config_.host, config_.port, config_.timeout_ms));
    }
    std::vector<std::uint8_t> header(kFrameHeaderSize);
    bool got_header = false;
    try {
      detail::send_all(*socket_, frame, config_.timeout_ms);
      got_header = detail::recv_exact(*socket_, header, config_.timeout_ms);
    } catch (const ConnectionError&) {
      socket_.reset();
      if (reused && attempt == 0) continue;
      throw;
    } catch (const TimeoutError&) {
      socket_.reset();
      throw;
    }
    if (!got_header) {
      socket_.reset();
      if (reused && attempt == 0) continue;
      throw ConnectionError("server closed the connection without replying");
    }
    try {
      const FrameHeader fh = parse_frame_header(header);
      std::vector<std::uint8_t> body(fh.body_length);
      if (!body.empty() && !detail::recv_exact(*socket_, body, config_.timeout_ms)) {
        throw ConnectionError("server closed the connection mid-reply");
      }
      if (fh.type == MessageType::Error) {
        socket_.reset();
        throw decode_error(body);
      }
      if (fh.type != expected) throw ProtocolError("unexpected reply type");
      return body;
    } catch (const RemoteError&) {
      throw;
    } catch (const Error&) {
      socket_.reset();
      throw;
    }
  }
}

PredictionResponse Client::predict(const pem::PatchSet& patches) {
  const std::uint64_t id = next_id_++;
  const auto frame = encode_predict_request(id, patches);
  PredictionResponse resp = decode_response(exchange(frame, MessageType::Predict));
  if (resp.request_id != id) {
    socket_.reset();
    throw ProtocolError("response id " + std::to_string(resp.request_id) + " does not match request " +
                        std::to_string(id));
  }
  return resp;
}

HealthResponse Client::health() {
  const auto frame = encode_frame(MessageType::Health, {});
  return decode_health(exchange(frame, MessageType::Health));
}

PredictionResponse predict_remote(Client& client, const pem::FaceRecord& face, std::uint64_t seed,
                                  const RemoteOptions& options) {
  const pem::FaceRecord aligned = pem::align(face, options.pem);
  const pem::PatchSet patches = pem::select_patches(aligned, options.k, options.patch_size, seed, options.pem);
  return client.predict(patches);
}

}  // namespace spf::service
