#include "spf/service/server.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <chrono>

#include "socket.hpp"

namespace spf::service {

struct Server::Connection {
  detail::Socket socket;
  std::thread thread;
  std::atomic<bool> done{false};
};

Server::Server(std::shared_ptr<const model::Model> model, ServerConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  if (!model_) throw ConfigError("server needs a model");
  if (model_->config().branches < 1 || model_->config().branches > kMaxPatches) {
    throw ConfigError("model arity exceeds the protocol limit of 3 patches");
  }
  if (config_.max_connections < 1) throw ConfigError("max_connections must be positive");
  if (!(config_.decision.threshold > 0.0 && config_.decision.threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  digest_ = model::model_digest(*model_);
}

Server::~Server() { stop(); }

void Server::start() {
  if (running_) return;
  detail::Socket listener = detail::listen_tcp(config_.host, config_.port, 128);
  port_ = detail::local_port(listener);
  if (::pipe2(wake_pipe_, O_CLOEXEC) != 0) throw ConnectionError("cannot create wake pipe");
  listen_fd_ = listener.release();
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("serving model {} on {}:{}", digest_.substr(0, 12), config_.host, port_);
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  const char byte = 0;
  [[maybe_unused]] const auto w = ::write(wake_pipe_[1], &byte, 1);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  ::close(wake_pipe_[0]);
  ::close(wake_pipe_[1]);
  listen_fd_ = wake_pipe_[0] = wake_pipe_[1] = -1;
  std::list<std::unique_ptr<Connection>> remaining;
  {
    std::lock_guard lock(mutex_);
    for (auto& c : connections_) ::shutdown(c->socket.fd(), SHUT_RDWR);
    remaining.swap(connections_);
  }
  for (auto& c : remaining) c->thread.join();
}

ServerStats Server::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

void Server::reap_finished() {
  std::list<std::unique_ptr<Connection>> finished;
  {
    std::lock_guard lock(mutex_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if ((*it)->done) {
        finished.push_back(std::move(*it));
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) c->thread.join();
}

void Server::accept_loop() {
  pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
  while (running_) {
    reap_finished();
    const int r = ::poll(fds, 2, 200);
    if (r <= 0 || !running_) continue;
    if (!(fds[0].revents & POLLIN)) continue;
    detail::Socket client(::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC));
    if (!client.valid()) continue;

    std::lock_guard lock(mutex_);
    ++stats_.connections;
    if (connections_.size() >= static_cast<std::size_t>(config_.max_connections)) {
      ++stats_.error_frames;
      try {
        detail::send_all(client, encode_frame(MessageType::Error, encode_error(ErrorCode::Busy, "too many connections")),
                         config_.io_timeout_ms);
      } catch (const Error&) {
      }
      continue;
    }
    auto conn = std::make_unique<Connection>();
    conn->socket = std::move(client);
    Connection& ref = *conn;
    connections_.push_back(std::move(conn));
    ref.thread = std::thread([this, &ref] {
      serve_connection(ref);
      // Signal EOF now; the descriptor itself is released when reaped.
      ::shutdown(ref.socket.fd(), SHUT_RDWR);
      ref.done = true;
    });
  }
}

std::vector<std::uint8_t> Server::handle(MessageType type, std::span<const std::uint8_t> body) {
  const auto error = [&](ErrorCode code, const std::string& message) {
    std::lock_guard lock(mutex_);
    ++stats_.error_frames;
    return encode_frame(MessageType::Error, encode_error(code, message));
  };
  try {
    if (type == MessageType::Health) {
      if (!body.empty()) return error(ErrorCode::Malformed, "health request carries no body");
      HealthResponse h;
      h.branches = model_->config().branches;
      h.patch_size = model_->config().patch_size;
      h.model_digest = digest_;
      {
        std::lock_guard lock(mutex_);
        ++stats_.health_checks;
      }
      return encode_frame(MessageType::Health, encode_health(h));
    }
    if (type != MessageType::Predict) return error(ErrorCode::BadType, "clients may only send predict or health");

    const PatchRequest req = decode_predict_request(body);
    if (req.k != model_->config().branches) {
      return error(ErrorCode::Arity, "model expects " + std::to_string(model_->config().branches) +
                                         " patches, request has " + std::to_string(req.k));
    }
    if (req.patch_size != model_->config().patch_size) {
      return error(ErrorCode::Shape, "model expects S=" + std::to_string(model_->config().patch_size) +
                                         ", request has S=" + std::to_string(req.patch_size));
    }
    const auto start = std::chrono::steady_clock::now();
    const auto patches = req.patches();
    const model::Score score = model_->predict_batch(patches).front();
    PredictionResponse resp;
    resp.request_id = req.request_id;
    resp.p_bona_fide = score.p_bona_fide;
    resp.label = model::decide(score, config_.decision);
    resp.inference_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    resp.model_digest = digest_;
    {
      std::lock_guard lock(mutex_);
      ++stats_.predictions;
      stats_.pixel_bytes += req.pixel_bytes();
      if (body.size() == kPredictHeaderSize + req.pixel_bytes()) ++stats_.exact_payloads;
    }
    return encode_frame(MessageType::Predict, encode_response(resp));
  } catch (const FrameError& e) {
    return error(e.code(), e.what());
  } catch (const std::exception& e) {
    return error(ErrorCode::Internal, e.what());
  }
}

void Server::serve_connection(Connection& conn) {
  std::vector<std::uint8_t> header(kFrameHeaderSize);
  std::vector<std::uint8_t> body;
  try {
    while (running_) {
      if (!detail::recv_exact(conn.socket, header, config_.io_timeout_ms)) return;
      FrameHeader fh;
      try {
        fh = parse_frame_header(header);
      } catch (const FrameError& e) {
        {
          std::lock_guard lock(mutex_);
          ++stats_.error_frames;
        }
        detail::send_all(conn.socket, encode_frame(MessageType::Error, encode_error(e.code(), e.what())),
                         config_.io_timeout_ms);
        return;
      }
      body.resize(fh.body_length);
      if (!body.empty() && !detail::recv_exact(conn.socket, body, config_.io_timeout_ms)) return;
      const auto reply = handle(fh.type, body);
      detail::send_all(conn.socket, reply, config_.io_timeout_ms);
      if (static_cast<MessageType>(reply[4]) == MessageType::Error) return;
    }
  } catch (const Error& e) {
    spdlog::debug("connection dropped: {}", e.what());
  }
}

}  // namespace spf::service
