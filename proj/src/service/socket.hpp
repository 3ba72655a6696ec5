#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spf::service::detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

// Throws ConnectionError when resolution or connect fails, TimeoutError when
// connect takes longer than timeout_ms.
Socket connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms);
// Binds and listens; port 0 picks an ephemeral port. Throws ConnectionError.
Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog);
std::uint16_t local_port(const Socket& socket);

// Both throw TimeoutError when the peer stalls for timeout_ms and
// ConnectionError on reset. recv_exact returns false on a clean EOF before
// the first byte.
void send_all(const Socket& socket, std::span<const std::uint8_t> data, int timeout_ms);
bool recv_exact(const Socket& socket, std::span<std::uint8_t> out, int timeout_ms);

}  // namespace spf::service::detail
