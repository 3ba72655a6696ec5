#pragma once

// Protocol fuzzer: every case opens a fresh connection, writes a byte
// stream, half-closes, and reads whatever comes back until EOF. Well-formed
// predict requests must come back as id-matched predictions; everything
// else must produce an error frame or a disconnect.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdint>
#include <string>
#include <vector>

#include "spf/common/bytes.hpp"
#include "spf/common/rng.hpp"
#include "spf/service/protocol.hpp"

namespace spf::testing {

struct FuzzReport {
  int cases = 0;
  int well_formed = 0;
  int well_formed_answered = 0;  // id-matched prediction frames
  int error_frames = 0;
  int silent_disconnects = 0;
  int bad_replies = 0;  // replies that do not parse
  std::vector<std::string> failures;
};

inline std::vector<std::uint8_t> raw_predict(std::uint64_t id, int k, int size, int channels, Rng& rng,
                                             std::uint16_t version = service::kProtocolVersion) {
  ByteWriter w;
  w.u16(version);
  w.u64(id);
  w.u8(static_cast<std::uint8_t>(k));
  w.u16(static_cast<std::uint16_t>(size));
  w.u8(static_cast<std::uint8_t>(channels));
  const std::size_t n = static_cast<std::size_t>(k) * channels * size * size;
  for (std::size_t i = 0; i < n; ++i) w.u8(static_cast<std::uint8_t>(rng.uniform_int(0, 255)));
  return service::encode_frame(service::MessageType::Predict, w.buffer());
}

// Loopback TCP exchange returning everything the server sent before EOF.
inline std::vector<std::uint8_t> send_raw(std::uint16_t port, const std::vector<std::uint8_t>& bytes,
                                          int timeout_ms = 3000) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  std::vector<std::uint8_t> out;
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw std::runtime_error("fuzz: connect failed");
  }
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) break;  // server may hang up early on garbage
    sent += static_cast<std::size_t>(n);
  }
  ::shutdown(fd, SHUT_WR);
  std::uint8_t buf[4096];
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) break;
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  ::close(fd);
  return out;
}

struct ParsedReply {
  bool ok = false;
  service::MessageType type = service::MessageType::Error;
  std::vector<std::uint8_t> body;
};

inline std::vector<ParsedReply> parse_replies(const std::vector<std::uint8_t>& bytes) {
  std::vector<ParsedReply> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    ParsedReply r;
    if (bytes.size() - pos < service::kFrameHeaderSize) {
      out.push_back(r);
      break;
    }
    try {
      const auto h = service::parse_frame_header(std::span(bytes).subspan(pos, service::kFrameHeaderSize));
      pos += service::kFrameHeaderSize;
      if (bytes.size() - pos < h.body_length) {
        out.push_back(r);
        break;
      }
      r.ok = true;
      r.type = h.type;
      r.body.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + h.body_length));
      pos += h.body_length;
    } catch (const Error&) {
      out.push_back(r);
      break;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline FuzzReport fuzz_server(std::uint16_t port, int cases, int branches, int patch_size, std::uint64_t seed) {
  Rng rng(seed);
  FuzzReport rep;
  for (int c = 0; c < cases; ++c) {
    ++rep.cases;
    const std::uint64_t id = rng.uniform_int(0, 1'000'000'000);
    std::vector<std::uint8_t> bytes;
    bool well_formed = false;
    switch (rng.uniform_int(0, 7)) {
      case 0:
        bytes = raw_predict(id, branches, patch_size, 3, rng);
        well_formed = true;
        break;
      case 1: {  // valid header, random body
        std::vector<std::uint8_t> body(static_cast<std::size_t>(rng.uniform_int(0, 200)));
        for (auto& b : body) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        bytes = service::encode_frame(service::MessageType::Predict, body);
        break;
      }
      case 2:  // pure noise
        bytes.resize(static_cast<std::size_t>(rng.uniform_int(0, 64)));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        break;
      case 3: {  // one flipped byte in the headers
        bytes = raw_predict(id, branches, patch_size, 3, rng);
        const auto at = static_cast<std::size_t>(rng.uniform_int(0, 9 + 14 - 1));
        bytes[at] ^= static_cast<std::uint8_t>(rng.uniform_int(1, 255));
        break;
      }
      case 4: {  // truncated
        bytes = raw_predict(id, branches, patch_size, 3, rng);
        bytes.resize(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bytes.size()) - 1)));
        break;
      }
      case 5: {  // absurd length
        ByteWriter w;
        w.bytes(service::kMagic);
        w.u8(1);
        w.u32(static_cast<std::uint32_t>(rng.uniform_int(service::kMaxBodySize + 1, 0xffffffffLL)));
        bytes = w.take();
        break;
      }
      case 6: {  // wrong arity, size, channels or version
        const int variant = static_cast<int>(rng.uniform_int(0, 3));
        const int k = variant == 0 ? static_cast<int>(rng.uniform_int(4, 9)) : branches;
        const int s = variant == 1 ? patch_size + static_cast<int>(rng.uniform_int(1, 8)) : patch_size;
        const int ch = variant == 2 ? static_cast<int>(rng.uniform_int(1, 2)) : 3;
        const std::uint16_t ver = variant == 3 ? 2 : service::kProtocolVersion;
        bytes = raw_predict(id, k, s, ch, rng, ver);
        break;
      }
      default: {  // a valid request followed by trailing garbage in a second frame
        bytes = raw_predict(id, branches, patch_size, 3, rng);
        for (int i = 0; i < 12; ++i) bytes.push_back(static_cast<std::uint8_t>(rng.uniform_int(0, 255)));
        well_formed = true;
        break;
      }
    }
    const auto replies = parse_replies(send_raw(port, bytes));
    if (replies.empty()) ++rep.silent_disconnects;
    for (const auto& r : replies) {
      if (!r.ok) {
        ++rep.bad_replies;
        rep.failures.push_back("case " + std::to_string(c) + ": unparseable reply");
      } else if (r.type == service::MessageType::Error) {
        ++rep.error_frames;
      }
    }
    if (well_formed) {
      ++rep.well_formed;
      bool answered = false;
      if (!replies.empty() && replies.front().ok && replies.front().type == service::MessageType::Predict) {
        try {
          answered = service::decode_response(replies.front().body).request_id == id;
        } catch (const Error&) {
        }
      }
      if (answered) {
        ++rep.well_formed_answered;
      } else {
        rep.failures.push_back("case " + std::to_string(c) + ": well-formed request unanswered");
      }
    }
  }
  return rep;
}

}  // namespace spf::testing
