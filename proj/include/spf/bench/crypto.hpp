#pragma once

// AES-256-GCM (12-byte nonce, 16-byte tag) over OpenSSL EVP, plus the nonce
// bookkeeping that keeps a key from ever sealing two messages under the same
// nonce.

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

namespace spf::bench {

inline constexpr std::size_t kKeyBytes = 32;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kTagBytes = 16;

using Key = std::array<std::uint8_t, kKeyBytes>;
using Nonce = std::array<std::uint8_t, kNonceBytes>;

struct CipherPayload {
  Nonce nonce{};
  std::vector<std::uint8_t> sealed;  // ciphertext followed by the tag
  std::size_t plaintext_len = 0;

  std::size_t wire_size() const noexcept { return kNonceBytes + 4 + sealed.size(); }
};

// Throws CryptoParameterError when key or nonce has the wrong length.
CipherPayload encrypt(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> key,
                      std::span<const std::uint8_t> nonce);
// Throws AuthenticationError on any tag mismatch (wrong key, tampering),
// PayloadFormatError when the payload is structurally impossible.
std::vector<std::uint8_t> decrypt(const CipherPayload& payload, std::span<const std::uint8_t> key);

// Wire form: nonce | u32 plaintext_len | sealed.
std::vector<std::uint8_t> encode_payload(const CipherPayload& payload);
CipherPayload decode_payload(std::span<const std::uint8_t> bytes);

// Random 32-byte key from the OpenSSL CSPRNG.
Key random_key();

// Counter nonces: 4 fixed prefix bytes then a 64-bit big-endian counter.
// Every issued nonce is remembered; issuing or registering one twice throws
// NonceReuseError.
class NonceLadder {
 public:
  explicit NonceLadder(std::uint32_t prefix = 0) : prefix_(prefix) {}

  Nonce next();
  // Records an externally chosen nonce.
  void claim(const Nonce& nonce);
  std::size_t issued() const noexcept { return used_.size(); }

 private:
  std::uint32_t prefix_;
  std::uint64_t counter_ = 0;
  std::set<Nonce> used_;
};

}  // namespace spf::bench
