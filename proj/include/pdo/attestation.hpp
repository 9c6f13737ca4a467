// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Simulated remote attestation. A single attestation root (the stand-in for
// a hardware vendor's verification service) signs reports over enclave
// quotes. A quote binds the enclave's measurement to its two public keys via
// report_data = hash(verif_pub || enc_pub), so a report cannot be replayed
// for a different key pair.

#pragma once

#include <cstdint>
#include <mutex>
#include <set>
#include <utility>
#include <vector>

#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/encoding.hpp"
#include "pdo/interpreter.hpp"

namespace pdo {

/// Build identity folded into the simulated measurement. Bumping either
/// component changes what validators expect enclaves to measure as.
inline constexpr std::string_view kBuildTag = "desk-build/1";

/// Measurement of the contract execution environment: the digest of the
/// interpreter identity and build tag. All honest enclaves in one deployment
/// share this value.
inline Digest current_measurement() {
  return crypto::Sha256()
      .update("pdo/measurement/v1")
      .update(interp::kInterpreterVersion)
      .update(kBuildTag)
      .finish();
}

struct Quote {
  Digest measurement;
  Digest report_data;

  auto operator<=>(const Quote&) const = default;
};

inline Digest quote_report_data(const VerificationKey& verif_pub,
                                const EncryptionPublicKey& enc_pub) {
  return crypto::Sha256().update(verif_pub.view()).update(enc_pub.view()).finish();
}

enum class AttestationVerdict : uint8_t { failed = 0, ok = 1 };

struct VerificationReport {
  Quote quote;
  AttestationVerdict verdict = AttestationVerdict::failed;
  Nonce16 nonce;
  Signature sig;

  auto operator<=>(const VerificationReport&) const = default;
};

inline Bytes report_signing_bytes(const Quote& quote, AttestationVerdict verdict,
                                  const Nonce16& nonce) {
  return enc::Record()
      .put_string("op", "ias-report")
      .put_bytes("measurement", quote.measurement.view())
      .put_bytes("report_data", quote.report_data.view())
      .put_u64("verdict", verdict == AttestationVerdict::ok ? 1 : 0)
      .put_bytes("nonce", nonce.view())
      .encode();
}

class IasApi {
 public:
  virtual ~IasApi() = default;
  virtual VerificationReport ias_verify(const Quote& quote) = 0;
  virtual VerificationKey root_pub() = 0;
};

/// In-process attestation root. Signs every request; the verdict is ok only
/// when the quoted measurement is on the known-good list.
class AttestationService final : public IasApi {
 public:
  AttestationService(crypto::SigningKeyPair root, std::vector<Digest> known_measurements)
      : root_(std::move(root)), known_(known_measurements.begin(), known_measurements.end()) {}

  VerificationReport ias_verify(const Quote& quote) override {
    VerificationReport report;
    report.quote = quote;
    {
      std::lock_guard lock(mu_);
      report.verdict = known_.count(quote.measurement) ? AttestationVerdict::ok
                                                       : AttestationVerdict::failed;
    }
    report.nonce = Nonce16::from_bytes(random_array<16>());
    report.sig =
        crypto::sign(root_, report_signing_bytes(report.quote, report.verdict, report.nonce));
    return report;
  }

  VerificationKey root_pub() override { return root_.pub; }

  void add_known_measurement(const Digest& m) {
    std::lock_guard lock(mu_);
    known_.insert(m);
  }

 private:
  crypto::SigningKeyPair root_;
  std::set<Digest> known_;
  std::mutex mu_;
};

/// Full relying-party check of a report: authentic root signature, passing
/// verdict and the expected measurement.
inline bool check_report(const VerificationReport& report, const VerificationKey& root_pub,
                         const Digest& expected_measurement) {
  if (report.verdict != AttestationVerdict::ok) return false;
  if (report.quote.measurement != expected_measurement) return false;
  return crypto::verify(root_pub, report_signing_bytes(report.quote, report.verdict, report.nonce),
                        report.sig);
}

}  // namespace pdo
