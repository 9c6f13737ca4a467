// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Crypto primitives used across the framework. Hashing, signatures and
// public-key sealing are backed by libsodium; authenticated symmetric
// encryption is AES-256-GCM via OpenSSL. All randomness flows through an
// installable RandomSource so that scenario runs can be made reproducible.

#pragma once

#include <openssl/evp.h>
#include <sodium.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <compare>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "pdo/bytes.hpp"

namespace pdo {

struct CryptoError : Error {
  using Error::Error;
};

/// Thrown when an authenticated decryption or unsealing fails its check.
struct AuthenticationError : CryptoError {
  using CryptoError::CryptoError;
};

namespace crypto::detail {

inline void ensure_init() {
  static const int rc = sodium_init();
  if (rc < 0) throw CryptoError("libsodium initialization failed");
}

// libsodium does not document NULL input pointers for zero-length messages.
inline const uint8_t* ptr(BytesView b) {
  static const uint8_t kDummy = 0;
  return b.empty() ? &kDummy : b.data();
}

}  // namespace crypto::detail

/// Fixed-width byte value with a phantom tag so that digests, keys and
/// signatures cannot be mixed up at compile time.
template <size_t N, typename Tag>
struct FixedBytes {
  std::array<uint8_t, N> bytes{};

  static constexpr size_t kSize = N;

  auto operator<=>(const FixedBytes&) const = default;

  const uint8_t* data() const { return bytes.data(); }
  uint8_t* data() { return bytes.data(); }
  size_t size() const { return N; }
  auto begin() const { return bytes.begin(); }
  auto end() const { return bytes.end(); }
  BytesView view() const { return BytesView(bytes); }

  bool is_zero() const {
    return std::all_of(bytes.begin(), bytes.end(), [](uint8_t b) { return b == 0; });
  }

  static FixedBytes zero() { return FixedBytes{}; }

  std::string hex() const { return hex_encode(bytes); }

  static FixedBytes from_hex(std::string_view h) {
    Bytes raw = hex_decode(h);
    if (raw.size() != N) throw HexError("hex value has wrong length");
    FixedBytes out;
    std::copy(raw.begin(), raw.end(), out.bytes.begin());
    return out;
  }

  static FixedBytes from_bytes(BytesView b) {
    if (b.size() != N) throw CryptoError("byte value has wrong length");
    FixedBytes out;
    std::copy(b.begin(), b.end(), out.bytes.begin());
    return out;
  }
};

using Digest = FixedBytes<32, struct DigestTag>;
using Signature = FixedBytes<64, struct SignatureTag>;
using VerificationKey = FixedBytes<32, struct VerificationKeyTag>;
using EncryptionPublicKey = FixedBytes<32, struct EncryptionPublicKeyTag>;
using SymmetricKey = FixedBytes<32, struct SymmetricKeyTag>;
using Nonce16 = FixedBytes<16, struct Nonce16Tag>;

namespace crypto {

/// A provisioning secret together with the identity of the service that
/// contributed it.
struct Secret {
  std::array<uint8_t, 32> value{};
  VerificationKey ps_id;
};

}  // namespace crypto

// ---------------------------------------------------------------------------
// Randomness

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<uint8_t> out) = 0;
};

class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<uint8_t> out) override {
    crypto::detail::ensure_init();
    randombytes_buf(out.data(), out.size());
  }
};

/// Deterministic stream: each fill() derives a fresh subseed from the root
/// seed and a call counter, so identical call sequences yield identical bytes.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(uint64_t seed) {
    crypto::detail::ensure_init();
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    static constexpr char kLabel[] = "pdo/seeded-random/v1";
    crypto_hash_sha256_update(&st, reinterpret_cast<const uint8_t*>(kLabel), sizeof(kLabel) - 1);
    std::array<uint8_t, 8> be{};
    for (int i = 0; i < 8; ++i) be[i] = static_cast<uint8_t>(seed >> (56 - 8 * i));
    crypto_hash_sha256_update(&st, be.data(), be.size());
    crypto_hash_sha256_final(&st, seed_.data());
  }

  explicit SeededRandom(const std::array<uint8_t, 32>& seed) : seed_(seed) {
    crypto::detail::ensure_init();
  }

  void fill(std::span<uint8_t> out) override {
    std::lock_guard lock(mu_);
    std::array<uint8_t, 32> subseed{};
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, seed_.data(), seed_.size());
    std::array<uint8_t, 8> be{};
    for (int i = 0; i < 8; ++i) be[i] = static_cast<uint8_t>(counter_ >> (56 - 8 * i));
    crypto_hash_sha256_update(&st, be.data(), be.size());
    crypto_hash_sha256_final(&st, subseed.data());
    ++counter_;
    static_assert(randombytes_SEEDBYTES == 32);
    randombytes_buf_deterministic(out.data(), out.size(), subseed.data());
  }

 private:
  std::array<uint8_t, 32> seed_{};
  uint64_t counter_ = 0;
  std::mutex mu_;
};

namespace crypto::detail {
inline std::atomic<RandomSource*>& source_slot() {
  static std::atomic<RandomSource*> slot{nullptr};
  return slot;
}
}  // namespace crypto::detail

inline RandomSource& random_source() {
  static SystemRandom system;
  RandomSource* src = crypto::detail::source_slot().load(std::memory_order_acquire);
  return src ? *src : system;
}

/// Installs `src` as the process-wide randomness source; nullptr restores the
/// system default.
inline void set_random_source(RandomSource* src) {
  crypto::detail::source_slot().store(src, std::memory_order_release);
}

class ScopedRandomSource {
 public:
  explicit ScopedRandomSource(RandomSource& src)
      : prev_(crypto::detail::source_slot().load(std::memory_order_acquire)) {
    set_random_source(&src);
  }
  ~ScopedRandomSource() { set_random_source(prev_); }
  ScopedRandomSource(const ScopedRandomSource&) = delete;
  ScopedRandomSource& operator=(const ScopedRandomSource&) = delete;

 private:
  RandomSource* prev_;
};

inline void random_bytes(std::span<uint8_t> out) { random_source().fill(out); }

template <size_t N>
std::array<uint8_t, N> random_array() {
  std::array<uint8_t, N> out{};
  random_bytes(out);
  return out;
}

namespace crypto {

// ---------------------------------------------------------------------------
// Key pairs

/// Ed25519 signing key pair. Signing is deterministic (RFC 8032), which the
/// replicated-execution comparison relies on.
struct SigningKeyPair {
  std::array<uint8_t, crypto_sign_SECRETKEYBYTES> secret{};
  VerificationKey pub;

  static SigningKeyPair from_seed(const std::array<uint8_t, 32>& seed) {
    detail::ensure_init();
    SigningKeyPair kp;
    crypto_sign_seed_keypair(kp.pub.bytes.data(), kp.secret.data(), seed.data());
    return kp;
  }

  static SigningKeyPair generate() { return from_seed(random_array<32>()); }

  std::array<uint8_t, 32> seed() const {
    std::array<uint8_t, 32> out{};
    crypto_sign_ed25519_sk_to_seed(out.data(), secret.data());
    return out;
  }
};

/// X25519 key pair used for sealing provisioning secrets to an enclave.
struct EncryptionKeyPair {
  std::array<uint8_t, crypto_box_SECRETKEYBYTES> secret{};
  EncryptionPublicKey pub;

  static EncryptionKeyPair from_seed(const std::array<uint8_t, 32>& seed) {
    detail::ensure_init();
    EncryptionKeyPair kp;
    crypto_box_seed_keypair(kp.pub.bytes.data(), kp.secret.data(), seed.data());
    return kp;
  }

  /// Rebuilds the pair from a stored secret scalar. Unlike from_seed, which
  /// hashes its input, this is the inverse of storing `secret`: the public
  /// half is recomputed from it.
  static EncryptionKeyPair from_secret(
      const std::array<uint8_t, crypto_box_SECRETKEYBYTES>& secret) {
    detail::ensure_init();
    EncryptionKeyPair kp;
    kp.secret = secret;
    crypto_scalarmult_base(kp.pub.bytes.data(), kp.secret.data());
    return kp;
  }

  static EncryptionKeyPair generate() { return from_seed(random_array<32>()); }
};

// ---------------------------------------------------------------------------
// Hashing

inline Digest hash(BytesView data) {
  detail::ensure_init();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), detail::ptr(data), data.size());
  return d;
}

inline Digest hash(std::string_view data) {
  return hash(BytesView(reinterpret_cast<const uint8_t*>(data.data()), data.size()));
}

/// Incremental SHA-256, for multi-part inputs without intermediate copies.
class Sha256 {
 public:
  Sha256() {
    detail::ensure_init();
    crypto_hash_sha256_init(&st_);
  }
  Sha256& update(BytesView data) {
    crypto_hash_sha256_update(&st_, detail::ptr(data), data.size());
    return *this;
  }
  Sha256& update(std::string_view data) {
    return update(BytesView(reinterpret_cast<const uint8_t*>(data.data()), data.size()));
  }
  Digest finish() {
    Digest d;
    crypto_hash_sha256_final(&st_, d.bytes.data());
    return d;
  }

 private:
  crypto_hash_sha256_state st_;
};

// ---------------------------------------------------------------------------
// Signatures

inline Signature sign(const SigningKeyPair& key, BytesView msg) {
  detail::ensure_init();
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, detail::ptr(msg), msg.size(),
                       key.secret.data());
  return sig;
}

inline bool verify(const VerificationKey& pub, BytesView msg, const Signature& sig) {
  detail::ensure_init();
  return crypto_sign_verify_detached(sig.bytes.data(), detail::ptr(msg), msg.size(),
                                     pub.bytes.data()) == 0;
}

// ---------------------------------------------------------------------------
// Public-key sealing (X25519 sealed box)
//
// Wire format matches libsodium's crypto_box_seal: ephemeral_pub (32) followed
// by a crypto_box ciphertext under nonce = blake2b-192(ephemeral_pub ||
// recipient_pub). We construct it explicitly so the ephemeral key is drawn
// from the installed RandomSource rather than from sodium's own generator.

inline constexpr size_t kMaxSealSize = 64 * 1024;

inline Bytes seal_to(const EncryptionPublicKey& recipient, BytesView plaintext) {
  detail::ensure_init();
  if (plaintext.empty()) throw CryptoError("seal_to: empty plaintext");
  if (plaintext.size() > kMaxSealSize) throw CryptoError("seal_to: plaintext too large");

  EncryptionKeyPair eph = EncryptionKeyPair::from_seed(random_array<32>());
  uint8_t nonce[crypto_box_NONCEBYTES];
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, sizeof nonce);
  crypto_generichash_update(&st, eph.pub.bytes.data(), eph.pub.bytes.size());
  crypto_generichash_update(&st, recipient.bytes.data(), recipient.bytes.size());
  crypto_generichash_final(&st, nonce, sizeof nonce);

  Bytes out(crypto_box_PUBLICKEYBYTES + plaintext.size() + crypto_box_MACBYTES);
  std::copy(eph.pub.bytes.begin(), eph.pub.bytes.end(), out.begin());
  if (crypto_box_easy(out.data() + crypto_box_PUBLICKEYBYTES, plaintext.data(),
                      plaintext.size(), nonce, recipient.bytes.data(),
                      eph.secret.data()) != 0) {
    throw CryptoError("seal_to: encryption failed");
  }
  sodium_memzero(eph.secret.data(), eph.secret.size());
  return out;
}

inline Bytes unseal(const EncryptionKeyPair& keys, BytesView sealed) {
  detail::ensure_init();
  if (sealed.size() < crypto_box_SEALBYTES) {
    throw AuthenticationError("unseal: truncated input");
  }
  Bytes out(sealed.size() - crypto_box_SEALBYTES);
  if (crypto_box_seal_open(out.data(), sealed.data(), sealed.size(),
                           keys.pub.bytes.data(), keys.secret.data()) != 0) {
    throw AuthenticationError("unseal: authentication failed");
  }
  return out;
}

// ---------------------------------------------------------------------------
// State-key derivation
//
// The contract state key is the hash of a fixed label, the contract id and
// the provisioning secrets ordered by contributor id. Order-independence of
// the input and sensitivity to every secret bit both matter: any single
// honest contributor makes the key unpredictable to everyone else.

inline SymmetricKey derive_state_key(std::vector<Secret> secrets, const Digest& contract_id) {
  if (secrets.empty()) throw CryptoError("derive_state_key: no secrets");
  std::sort(secrets.begin(), secrets.end(), [](const Secret& a, const Secret& b) {
    return a.ps_id.bytes < b.ps_id.bytes;
  });
  for (size_t i = 1; i < secrets.size(); ++i) {
    if (secrets[i].ps_id == secrets[i - 1].ps_id) {
      throw CryptoError("derive_state_key: duplicate provisioning service id");
    }
  }
  Sha256 h;
  h.update("pdo/state-key/v1");
  h.update(contract_id.view());
  for (const Secret& s : secrets) {
    h.update(BytesView(s.ps_id.bytes));  // bind contributor identity, not just value
    h.update(BytesView(s.value));
  }
  SymmetricKey key;
  key.bytes = h.finish().bytes;
  return key;
}

// ---------------------------------------------------------------------------
// Authenticated state encryption (AES-256-GCM)
//
// The nonce is synthesized as the leading 12 bytes of hash(key ||
// hash(plaintext) || aad). Encryption is therefore a pure function of its
// inputs, which lets independent re-executions of the same method be compared
// ciphertext-by-ciphertext. Nonce reuse across distinct plaintexts cannot
// happen because the plaintext digest feeds the nonce.

namespace detail {

struct EvpCtxFree {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using EvpCtx = std::unique_ptr<EVP_CIPHER_CTX, EvpCtxFree>;

inline std::array<uint8_t, 12> state_nonce(const SymmetricKey& key, BytesView plaintext,
                                           BytesView aad) {
  Digest pt = hash(plaintext);
  Digest full = Sha256().update(key.view()).update(pt.view()).update(aad).finish();
  std::array<uint8_t, 12> nonce{};
  std::copy_n(full.bytes.begin(), nonce.size(), nonce.begin());
  return nonce;
}

}  // namespace detail

inline constexpr size_t kGcmNonceSize = 12;
inline constexpr size_t kGcmTagSize = 16;

inline Bytes encrypt_state(const SymmetricKey& key, BytesView plaintext, BytesView aad) {
  if (plaintext.size() > static_cast<size_t>(INT32_MAX) ||
      aad.size() > static_cast<size_t>(INT32_MAX)) {
    throw CryptoError("encrypt_state: input too large");
  }
  auto nonce = detail::state_nonce(key, plaintext, aad);

  detail::EvpCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("encrypt_state: context allocation failed");

  int len = 0;
  Bytes out(kGcmNonceSize + plaintext.size() + kGcmTagSize);
  std::copy(nonce.begin(), nonce.end(), out.begin());
  uint8_t* ct = out.data() + kGcmNonceSize;

  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kGcmNonceSize, nullptr) != 1 ||
      EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes.data(), nonce.data()) != 1) {
    throw CryptoError("encrypt_state: initialization failed");
  }
  if (!aad.empty() &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    throw CryptoError("encrypt_state: aad failed");
  }
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), ct, &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1) {
    throw CryptoError("encrypt_state: update failed");
  }
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), ct + len, &fin) != 1) {
    throw CryptoError("encrypt_state: finalization failed");
  }
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kGcmTagSize,
                          out.data() + kGcmNonceSize + plaintext.size()) != 1) {
    throw CryptoError("encrypt_state: tag extraction failed");
  }
  return out;
}

inline Bytes decrypt_state(const SymmetricKey& key, BytesView ciphertext, BytesView aad) {
  if (ciphertext.size() < kGcmNonceSize + kGcmTagSize) {
    throw AuthenticationError("decrypt_state: truncated ciphertext");
  }
  const uint8_t* nonce = ciphertext.data();
  const uint8_t* ct = ciphertext.data() + kGcmNonceSize;
  const size_t ct_len = ciphertext.size() - kGcmNonceSize - kGcmTagSize;
  const uint8_t* tag = ciphertext.data() + kGcmNonceSize + ct_len;

  detail::EvpCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw CryptoError("decrypt_state: context allocation failed");

  int len = 0;
  Bytes out(ct_len);
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kGcmNonceSize, nullptr) != 1 ||
      EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes.data(), nonce) != 1) {
    throw CryptoError("decrypt_state: initialization failed");
  }
  if (!aad.empty() &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1) {
    throw CryptoError("decrypt_state: aad failed");
  }
  if (ct_len > 0 &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, ct, static_cast<int>(ct_len)) != 1) {
    throw AuthenticationError("decrypt_state: update failed");
  }
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kGcmTagSize,
                          const_cast<uint8_t*>(tag)) != 1) {
    throw CryptoError("decrypt_state: tag set failed");
  }
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) {
    throw AuthenticationError("decrypt_state: authentication failed");
  }
  return out;
}

}  // namespace crypto
}  // namespace pdo
