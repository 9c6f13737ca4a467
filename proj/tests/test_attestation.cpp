// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "pdo/attestation.hpp"
#include "pdo/crypto.hpp"

using namespace pdo;

TEST_CASE("verification reports bind quote verdict and root key") {
  auto root = crypto::SigningKeyPair::generate();
  Digest good = current_measurement();
  AttestationService ias(root, {good});

  auto verif = crypto::SigningKeyPair::generate();
  auto enc = crypto::EncryptionKeyPair::generate();
  Quote quote{good, quote_report_data(verif.pub, enc.pub)};

  VerificationReport report = ias.ias_verify(quote);
  CHECK(report.verdict == AttestationVerdict::ok);
  CHECK(report.quote == quote);
  CHECK(check_report(report, root.pub, good));

  // Wrong expectations and tampering all fail the check.
  CHECK_FALSE(check_report(report, root.pub, crypto::hash("other build")));
  auto other_root = crypto::SigningKeyPair::generate();
  CHECK_FALSE(check_report(report, other_root.pub, good));

  VerificationReport forged = report;
  forged.verdict = AttestationVerdict::ok;
  forged.quote.report_data = crypto::hash("swapped keys");
  CHECK_FALSE(check_report(forged, root.pub, good));

  VerificationReport resigned = report;
  resigned.sig.bytes[0] ^= 1;
  CHECK_FALSE(check_report(resigned, root.pub, good));

  VerificationReport renonced = report;
  renonced.nonce.bytes[0] ^= 1;
  CHECK_FALSE(check_report(renonced, root.pub, good));
}

TEST_CASE("unknown measurements get a signed failure verdict") {
  auto root = crypto::SigningKeyPair::generate();
  AttestationService ias(root, {current_measurement()});

  Quote rogue{crypto::hash("patched enclave build"), crypto::hash("rd")};
  VerificationReport report = ias.ias_verify(rogue);
  CHECK(report.verdict == AttestationVerdict::failed);
  // Signed, but never accepted by a verifier expecting the good measurement.
  CHECK(crypto::verify(root.pub, report_signing_bytes(report.quote, report.verdict, report.nonce),
                       report.sig));
  CHECK_FALSE(check_report(report, root.pub, current_measurement()));

  // Teaching the service the new measurement flips the verdict.
  ias.add_known_measurement(rogue.measurement);
  VerificationReport second = ias.ias_verify(rogue);
  CHECK(second.verdict == AttestationVerdict::ok);
  CHECK(check_report(second, root.pub, rogue.measurement));
}

TEST_CASE("report data commits to both enclave keys") {
  auto v1 = crypto::SigningKeyPair::generate();
  auto v2 = crypto::SigningKeyPair::generate();
  auto e1 = crypto::EncryptionKeyPair::generate();
  auto e2 = crypto::EncryptionKeyPair::generate();
  CHECK(quote_report_data(v1.pub, e1.pub) == quote_report_data(v1.pub, e1.pub));
  CHECK(quote_report_data(v1.pub, e1.pub) != quote_report_data(v2.pub, e1.pub));
  CHECK(quote_report_data(v1.pub, e1.pub) != quote_report_data(v1.pub, e2.pub));
}

TEST_CASE("measurement is stable within a build") {
  CHECK(current_measurement() == current_measurement());
  CHECK_FALSE(current_measurement().is_zero());
}
