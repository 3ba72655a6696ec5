#include "spf/bench/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <memory>

#include "spf/common/bytes.hpp"

namespace spf::bench {
namespace {

using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new(), &EVP_CIPHER_CTX_free);
  if (!ctx) throw Error("EVP_CIPHER_CTX_new failed");
  return ctx;
}

void check_lengths(std::size_t key, std::size_t nonce) {
  if (key != kKeyBytes) {
    throw CryptoParameterError("AES-256-GCM key must be 32 bytes, got " + std::to_string(key));
  }
  if (nonce != kNonceBytes) {
    throw CryptoParameterError("AES-256-GCM nonce must be 12 bytes, got " + std::to_string(nonce));
  }
}

void ok(int rc, const char* what) {
  if (rc != 1) throw Error(std::string("OpenSSL ") + what + " failed");
}

}  // namespace

CipherPayload encrypt(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> key,
                      std::span<const std::uint8_t> nonce) {
  check_lengths(key.size(), nonce.size());
  CipherPayload out;
  std::copy(nonce.begin(), nonce.end(), out.nonce.begin());
  out.plaintext_len = plaintext.size();
  out.sealed.resize(plaintext.size() + kTagBytes);

  auto ctx = new_ctx();
  ok(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr), "EncryptInit");
  ok(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceBytes, nullptr), "set IV length");
  ok(EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()), "EncryptInit key");
  int len = 0;
  std::size_t written = 0;
  // EVP lengths are int; feed large inputs in chunks.
  constexpr std::size_t kChunk = 1 << 20;
  for (std::size_t off = 0; off < plaintext.size(); off += kChunk) {
    const auto n = static_cast<int>(std::min(kChunk, plaintext.size() - off));
    ok(EVP_EncryptUpdate(ctx.get(), out.sealed.data() + written, &len, plaintext.data() + off, n), "EncryptUpdate");
    written += static_cast<std::size_t>(len);
  }
  ok(EVP_EncryptFinal_ex(ctx.get(), out.sealed.data() + written, &len), "EncryptFinal");
  written += static_cast<std::size_t>(len);
  ok(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kTagBytes, out.sealed.data() + written), "get tag");
  return out;
}

std::vector<std::uint8_t> decrypt(const CipherPayload& payload, std::span<const std::uint8_t> key) {
  check_lengths(key.size(), payload.nonce.size());
  if (payload.sealed.size() < kTagBytes || payload.sealed.size() - kTagBytes != payload.plaintext_len) {
    throw PayloadFormatError("cipher payload of " + std::to_string(payload.sealed.size()) +
                             " bytes cannot hold a " + std::to_string(payload.plaintext_len) +
                             "-byte plaintext plus tag");
  }
  std::vector<std::uint8_t> plain(payload.plaintext_len);
  auto ctx = new_ctx();
  ok(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr), "DecryptInit");
  ok(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceBytes, nullptr), "set IV length");
  ok(EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), payload.nonce.data()), "DecryptInit key");
  int len = 0;
  std::size_t written = 0;
  constexpr std::size_t kChunk = 1 << 20;
  for (std::size_t off = 0; off < payload.plaintext_len; off += kChunk) {
    const auto n = static_cast<int>(std::min(kChunk, payload.plaintext_len - off));
    ok(EVP_DecryptUpdate(ctx.get(), plain.data() + written, &len, payload.sealed.data() + off, n), "DecryptUpdate");
    written += static_cast<std::size_t>(len);
  }
  std::array<std::uint8_t, kTagBytes> tag{};
  std::copy(payload.sealed.end() - kTagBytes, payload.sealed.end(), tag.begin());
  ok(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kTagBytes, tag.data()), "set tag");
  if (EVP_DecryptFinal_ex(ctx.get(), plain.data() + written, &len) != 1) {
    // Never hand back unauthenticated bytes.
    std::fill(plain.begin(), plain.end(), 0);
    throw AuthenticationError("AES-256-GCM authentication failed");
  }
  return plain;
}

std::vector<std::uint8_t> encode_payload(const CipherPayload& payload) {
  ByteWriter w;
  w.bytes(payload.nonce);
  w.u32(static_cast<std::uint32_t>(payload.plaintext_len));
  w.bytes(payload.sealed);
  return w.take();
}

CipherPayload decode_payload(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  CipherPayload p;
  const auto nonce = r.bytes(kNonceBytes);
  std::copy(nonce.begin(), nonce.end(), p.nonce.begin());
  p.plaintext_len = r.u32();
  const auto sealed = r.bytes(p.plaintext_len + kTagBytes);
  if (r.remaining() != 0) throw PayloadFormatError("cipher payload has trailing bytes");
  p.sealed.assign(sealed.begin(), sealed.end());
  return p;
}

Key random_key() {
  Key key{};
  ok(RAND_bytes(key.data(), static_cast<int>(key.size())), "RAND_bytes");
  return key;
}

Nonce NonceLadder::next() {
  Nonce n{};
  for (int i = 0; i < 4; ++i) n[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(prefix_ >> (24 - 8 * i));
  for (int i = 0; i < 8; ++i) n[static_cast<std::size_t>(4 + i)] = static_cast<std::uint8_t>(counter_ >> (56 - 8 * i));
  ++counter_;
  claim(n);
  return n;
}

void NonceLadder::claim(const Nonce& nonce) {
  if (!used_.insert(nonce).second) throw NonceReuseError("nonce reused under the same key");
}

}  // namespace spf::bench
