#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "spf/model/network.hpp"
#include "spf/service/protocol.hpp"

namespace spf::service {

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 = ephemeral
  int max_connections = 64;
  int io_timeout_ms = 5000;
  model::DecisionConfig decision{};
};

struct ServerStats {
  std::uint64_t connections = 0;
  std::uint64_t predictions = 0;
  std::uint64_t health_checks = 0;
  std::uint64_t error_frames = 0;
  // Sum of pixel payload bytes over answered predictions.
  std::uint64_t pixel_bytes = 0;
  // Answered predictions whose body was exactly header + k*3*S*S bytes.
  std::uint64_t exact_payloads = 0;
};

// Thread-per-connection inference server over a read-only model. Each
// connection carries any number of request/response exchanges; a protocol
// violation is answered with an error frame and the connection is closed.
class Server {
 public:
  Server(std::shared_ptr<const model::Model> model, ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting; throws ConnectionError on bind failure.
  void start();
  void stop();
  bool running() const noexcept { return running_.load(); }
  std::uint16_t port() const noexcept { return port_; }
  const std::string& model_digest() const noexcept { return digest_; }
  ServerStats stats() const;

  // Answers one already-framed message body; exposed so the dispatch logic
  // can be exercised without sockets. Returns the full response frame.
  std::vector<std::uint8_t> handle(MessageType type, std::span<const std::uint8_t> body);

 private:
  struct Connection;

  void accept_loop();
  void serve_connection(Connection& conn);
  void reap_finished();

  std::shared_ptr<const model::Model> model_;
  ServerConfig config_;
  std::string digest_;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  int wake_pipe_[2] = {-1, -1};
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  mutable std::mutex mutex_;
  std::list<std::unique_ptr<Connection>> connections_;
  ServerStats stats_;
};

}  // namespace spf::service
