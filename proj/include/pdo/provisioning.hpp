// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Provisioning service: contributes one secret per contract toward the
// contract's state key. The secret is fixed per (service, contract) pair and
// independent of which enclave asks, so every enclave provisioned for a
// contract derives the same key, and a service never learns whether its
// secret was actually used (any one honest contributor randomizes the key).

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdo/attestation.hpp"
#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/ledger.hpp"
#include "pdo/records.hpp"

namespace pdo {

enum class PsRefusal { unknown_contract, unknown_enclave, not_listed, revoked };

inline std::string_view ps_refusal_name(PsRefusal r) {
  switch (r) {
    case PsRefusal::unknown_contract: return "unknown-contract";
    case PsRefusal::unknown_enclave: return "unknown-enclave";
    case PsRefusal::not_listed: return "not-listed";
    case PsRefusal::revoked: return "revoked";
  }
  throw Error("invalid refusal code");
}

inline std::optional<PsRefusal> ps_refusal_from_name(std::string_view name) {
  if (name == "unknown-contract") return PsRefusal::unknown_contract;
  if (name == "unknown-enclave") return PsRefusal::unknown_enclave;
  if (name == "not-listed") return PsRefusal::not_listed;
  if (name == "revoked") return PsRefusal::revoked;
  return std::nullopt;
}

struct PsProvisionResult {
  bool ok = false;
  Bytes sealed_secret;
  Signature ps_sig;
  std::optional<PsRefusal> refusal;
  std::string detail;

  static PsProvisionResult refused(PsRefusal r, std::string detail = {}) {
    PsProvisionResult out;
    out.refusal = r;
    out.detail = std::move(detail);
    return out;
  }
};

class PsApi {
 public:
  virtual ~PsApi() = default;
  virtual VerificationKey ps_id() = 0;
  virtual PsProvisionResult provision(const Digest& contract_id, const Digest& enclave_id) = 0;
};

class ProvisioningService final : public PsApi {
 public:
  ProvisioningService(crypto::SigningKeyPair keys, LedgerApi& ledger)
      : keys_(std::move(keys)), ledger_(ledger) {}

  /// With a store directory, per-contract secrets survive restarts. Files
  /// are plain hex; the directory itself is the protection boundary here.
  ProvisioningService(crypto::SigningKeyPair keys, LedgerApi& ledger,
                      std::filesystem::path store_dir)
      : keys_(std::move(keys)), ledger_(ledger), store_dir_(std::move(store_dir)) {
    std::filesystem::create_directories(*store_dir_);
  }

  VerificationKey ps_id() override { return keys_.pub; }

  PsProvisionResult provision(const Digest& contract_id, const Digest& enclave_id) override {
    auto contract = ledger_.get_contract(contract_id);
    if (!contract) return PsProvisionResult::refused(PsRefusal::unknown_contract);
    if (contract->revoked) {
      return PsProvisionResult::refused(PsRefusal::revoked, "contract is revoked");
    }
    if (std::find(contract->ps_list.begin(), contract->ps_list.end(), keys_.pub) ==
        contract->ps_list.end()) {
      return PsProvisionResult::refused(PsRefusal::not_listed);
    }
    auto enclave = ledger_.get_enclave(enclave_id);
    if (!enclave) return PsProvisionResult::refused(PsRefusal::unknown_enclave);
    if (enclave->revoked) {
      return PsProvisionResult::refused(PsRefusal::revoked, "enclave is revoked");
    }
    // Independent re-check of the registered attestation; the ledger already
    // gated on it, but a service trusts its own verification, not the
    // validator's.
    GenesisConfig genesis = ledger_.genesis();
    if (!check_report(enclave->report, genesis.attestation_root_pub,
                      genesis.expected_measurement) ||
        enclave->report.quote.report_data !=
            quote_report_data(enclave->verif_pub, enclave->enc_pub)) {
      return PsProvisionResult::refused(PsRefusal::unknown_enclave,
                                        "registered attestation does not verify");
    }

    std::array<uint8_t, 32> secret = secret_for(contract_id);

    // Inner signature travels inside the sealed payload and is checked by the
    // enclave; outer signature covers the sealed blob and is checked by the
    // validator. Both bind (contract, enclave).
    Signature inner = crypto::sign(
        keys_, ps_secret_signing_bytes(contract_id, enclave_id, BytesView(secret)));
    Bytes payload;
    payload.reserve(secret.size() + inner.bytes.size());
    append(payload, BytesView(secret));
    append(payload, inner.view());

    PsProvisionResult out;
    out.ok = true;
    out.sealed_secret = crypto::seal_to(enclave->enc_pub, payload);
    out.ps_sig = crypto::sign(
        keys_, ps_sealed_signing_bytes(contract_id, enclave_id, out.sealed_secret));
    return out;
  }

  /// Models a colluding or subpoenaed service handing out its contribution.
  /// Used by adversarial drills to show that k-1 of k secrets are not enough.
  crypto::Secret reveal_secret_for_testing(const Digest& contract_id) {
    std::lock_guard lock(mu_);
    auto it = secrets_.find(contract_id);
    if (it == secrets_.end()) throw Error("no secret recorded for this contract");
    crypto::Secret s;
    s.value = it->second;
    s.ps_id = keys_.pub;
    return s;
  }

 private:
  std::array<uint8_t, 32> secret_for(const Digest& contract_id) {
    std::lock_guard lock(mu_);
    auto it = secrets_.find(contract_id);
    if (it != secrets_.end()) return it->second;
    if (store_dir_) {
      std::ifstream in(secret_path(contract_id));
      if (in) {
        std::string hex;
        in >> hex;
        Bytes raw = hex_decode(hex);
        if (raw.size() == 32) {
          std::array<uint8_t, 32> loaded{};
          std::copy(raw.begin(), raw.end(), loaded.begin());
          secrets_.emplace(contract_id, loaded);
          return loaded;
        }
      }
    }
    std::array<uint8_t, 32> fresh = random_array<32>();
    secrets_.emplace(contract_id, fresh);
    if (store_dir_) {
      std::ofstream out(secret_path(contract_id), std::ios::trunc);
      out << hex_encode(BytesView(fresh)) << '\n';
    }
    return fresh;
  }

  std::filesystem::path secret_path(const Digest& contract_id) const {
    return *store_dir_ / ("secret-" + contract_id.hex() + ".hex");
  }

  crypto::SigningKeyPair keys_;
  LedgerApi& ledger_;
  std::optional<std::filesystem::path> store_dir_;
  std::map<Digest, std::array<uint8_t, 32>> secrets_;
  std::mutex mu_;
};

}  // namespace pdo
