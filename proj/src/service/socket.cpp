#include "socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

#include "spf/common/errors.hpp"

namespace spf::service::detail {
namespace {

std::string errno_text() { return std::strerror(errno); }

// Waits for `events` on fd; false on timeout.
bool wait_for(int fd, short events, int timeout_ms) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int r = ::poll(&p, 1, timeout_ms);
    if (r > 0) return true;
    if (r == 0) return false;
    if (errno != EINTR) throw ConnectionError("poll: " + errno_text());
  }
}

struct AddrInfoDeleter {
  void operator()(addrinfo* p) const { ::freeaddrinfo(p); }
};

std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &result);
  if (rc != 0) throw ConnectionError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  return std::unique_ptr<addrinfo, AddrInfoDeleter>(result);
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() noexcept {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Socket connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms) {
  const auto addrs = resolve(host, port, false);
  std::string last_error = "no addresses";
  for (addrinfo* a = addrs.get(); a != nullptr; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
    if (!s.valid()) {
      last_error = errno_text();
      continue;
    }
    const int flags = ::fcntl(s.fd(), F_GETFL, 0);
    ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
    if (::connect(s.fd(), a->ai_addr, a->ai_addrlen) != 0) {
      if (errno != EINPROGRESS) {
        last_error = errno_text();
        continue;
      }
      if (!wait_for(s.fd(), POLLOUT, timeout_ms)) {
        throw TimeoutError("connect to " + host + ":" + std::to_string(port) + " timed out");
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        last_error = std::strerror(err);
        continue;
      }
    }
    ::fcntl(s.fd(), F_SETFL, flags);
    const int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
  }
  throw ConnectionError("cannot connect to " + host + ":" + std::to_string(port) + ": " + last_error);
}

Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog) {
  const auto addrs = resolve(host, port, true);
  std::string last_error = "no addresses";
  for (addrinfo* a = addrs.get(); a != nullptr; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol));
    if (!s.valid()) {
      last_error = errno_text();
      continue;
    }
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), a->ai_addr, a->ai_addrlen) != 0 || ::listen(s.fd(), backlog) != 0) {
      last_error = errno_text();
      continue;
    }
    return s;
  }
  throw ConnectionError("cannot listen on " + host + ":" + std::to_string(port) + ": " + last_error);
}

std::uint16_t local_port(const Socket& socket) {
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw ConnectionError("getsockname: " + errno_text());
  }
  if (addr.ss_family == AF_INET6) return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

void send_all(const Socket& socket, std::span<const std::uint8_t> data, int timeout_ms) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    if (!wait_for(socket.fd(), POLLOUT, timeout_ms)) throw TimeoutError("send timed out");
    const ssize_t n = ::send(socket.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
      throw ConnectionError("send: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

bool recv_exact(const Socket& socket, std::span<std::uint8_t> out, int timeout_ms) {
  std::size_t got = 0;
  while (got < out.size()) {
    if (!wait_for(socket.fd(), POLLIN, timeout_ms)) throw TimeoutError("receive timed out");
    const ssize_t n = ::recv(socket.fd(), out.data() + got, out.size() - got, MSG_DONTWAIT);
    if (n == 0) {
      if (got == 0) return false;
      throw ConnectionError("peer closed the connection mid-message");
    }
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
      throw ConnectionError("recv: " + errno_text());
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace spf::service::detail
