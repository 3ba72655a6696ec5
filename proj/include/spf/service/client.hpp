#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "spf/pem/pem.hpp"
#include "spf/service/protocol.hpp"

namespace spf::service {

namespace detail {
class Socket;
}

struct ClientConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  int timeout_ms = 2000;
};

// Synchronous client over one persistent connection, reopened on demand.
// Server error frames are rethrown as RemoteError; stalls beyond timeout_ms
// raise TimeoutError; an unreachable server raises ConnectionError.
class Client {
 public:
  explicit Client(ClientConfig config);
  ~Client();
  Client(Client&&) noexcept;
  Client& operator=(Client&&) noexcept;

  PredictionResponse predict(const pem::PatchSet& patches);
  HealthResponse health();

  std::uint64_t next_request_id() const noexcept { return next_id_; }
  // Size of the last frame this client sent, header included.
  std::size_t last_request_bytes() const noexcept { return last_request_bytes_; }

 private:
  std::vector<std::uint8_t> exchange(std::span<const std::uint8_t> frame, MessageType expected);

  ClientConfig config_;
  std::unique_ptr<detail::Socket> socket_;
  std::uint64_t next_id_ = 1;
  std::size_t last_request_bytes_ = 0;
};

struct RemoteOptions {
  int k = 2;
  int patch_size = 64;
  pem::PemConfig pem{};
};

// align -> select_patches -> quantize -> send. Only the k extracted patches
// ever reach the wire.
PredictionResponse predict_remote(Client& client, const pem::FaceRecord& face, std::uint64_t seed,
                                  const RemoteOptions& options = {});

}  // namespace spf::service
