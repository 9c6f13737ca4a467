// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Enclave service: the untrusted host that runs contract enclaves, registers
// them, relays requests and caches encrypted state blobs. Nothing in the
// protocol trusts this component; its adversarial modes exist to demonstrate
// that every deviation it can attempt is caught downstream by signature or
// hash checks.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdo/attestation.hpp"
#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/enclave.hpp"
#include "pdo/ledger.hpp"
#include "pdo/records.hpp"

namespace pdo {

enum class EsMode {
  honest,
  tamper_state_input,
  tamper_result_blob,
  tamper_update,
  drop_response,
  replay_response,
};

inline std::string_view es_mode_name(EsMode m) {
  switch (m) {
    case EsMode::honest: return "none";
    case EsMode::tamper_state_input: return "tamper-state-input";
    case EsMode::tamper_result_blob: return "tamper-result-blob";
    case EsMode::tamper_update: return "tamper-update";
    case EsMode::drop_response: return "drop-response";
    case EsMode::replay_response: return "replay-response";
  }
  throw Error("invalid mode");
}

inline std::optional<EsMode> es_mode_from_name(std::string_view name) {
  if (name == "none" || name == "honest") return EsMode::honest;
  if (name == "tamper-state-input") return EsMode::tamper_state_input;
  if (name == "tamper-result-blob") return EsMode::tamper_result_blob;
  if (name == "tamper-update") return EsMode::tamper_update;
  if (name == "drop-response") return EsMode::drop_response;
  if (name == "replay-response") return EsMode::replay_response;
  return std::nullopt;
}

struct EsError : Error {
  enum class Code { unknown_enclave, dropped, launch_failed };
  Code code;
  EsError(Code c, const std::string& msg) : Error(msg), code(c) {}
};

struct HostedEnclaveInfo {
  Digest enclave_id;
  VerificationKey verif_pub;
  EncryptionPublicKey enc_pub;
};

struct LaunchOutcome {
  Digest enclave_id;
  SubmitResult registration;
};

class EsApi {
 public:
  virtual ~EsApi() = default;
  virtual std::vector<HostedEnclaveInfo> enclaves() = 0;
  virtual LaunchOutcome launch() = 0;
  virtual Signature relay_provisioning(const Digest& enclave_id,
                                       const ContractDescriptor& contract,
                                       const std::vector<SecretBundle>& bundles) = 0;
  virtual InvokeOutput relay_invoke(const Digest& enclave_id, const InvocationRequest& req) = 0;
  virtual std::optional<Bytes> get_state(const Digest& state_hash) = 0;
};

struct EsOptions {
  EsMode mode = EsMode::honest;
  std::optional<std::filesystem::path> state_dir;
  /// Passed through to launched enclaves (wrong-measurement drills).
  std::optional<Digest> measurement;
  uint64_t step_budget = 1'000'000;
};

class EnclaveService final : public EsApi {
 public:
  using Options = EsOptions;

  EnclaveService(crypto::SigningKeyPair owner, IasApi& ias, LedgerApi& ledger,
                 Options options = {})
      : owner_(std::move(owner)), ias_(ias), ledger_(ledger), options_(options) {
    if (options_.state_dir) {
      std::filesystem::create_directories(*options_.state_dir / "sealed");
      std::filesystem::create_directories(*options_.state_dir / "state");
      load_platform_key();
      recover();
    } else {
      platform_key_ = SymmetricKey::from_bytes(random_array<32>());
    }
  }

  void set_mode(EsMode mode) {
    std::lock_guard lock(mu_);
    options_.mode = mode;
  }

  EsMode mode() const {
    std::lock_guard lock(mu_);
    return options_.mode;
  }

  // -- EsApi ------------------------------------------------------------------

  std::vector<HostedEnclaveInfo> enclaves() override {
    std::lock_guard lock(mu_);
    std::vector<HostedEnclaveInfo> out;
    for (const auto& [id, enclave] : hosted_) {
      out.push_back({id, enclave->verif_pub(), enclave->enc_pub()});
    }
    return out;
  }

  /// Launches a fresh enclave, obtains an attestation report and submits the
  /// registration. The enclave is hosted either way; the outcome reports how
  /// the validator ruled.
  LaunchOutcome launch() override {
    ContractEnclave::Options eopts;
    eopts.step_budget = options_.step_budget;
    eopts.measurement = options_.measurement;
    auto enclave = ContractEnclave::create(platform_key_, eopts);

    VerificationReport report = ias_.ias_verify(enclave->quote());
    EnclaveRegisterPayload payload;
    payload.verif_pub = enclave->verif_pub();
    payload.enc_pub = enclave->enc_pub();
    payload.report = report;
    SubmitResult result = ledger_.submit(make_transaction(payload, owner_));

    LaunchOutcome outcome;
    outcome.enclave_id = enclave->enclave_id();
    outcome.registration = result;

    SealedKeys sealed = enclave->seal_keys();
    {
      std::lock_guard lock(mu_);
      sealed_[outcome.enclave_id] = sealed;
      hosted_[outcome.enclave_id] = std::move(enclave);
    }
    if (options_.state_dir) {
      std::ofstream out(sealed_path(outcome.enclave_id), std::ios::trunc);
      out << hex_encode(sealed.blob) << '\n';
    }
    return outcome;
  }

  Signature relay_provisioning(const Digest& enclave_id, const ContractDescriptor& contract,
                               const std::vector<SecretBundle>& bundles) override {
    return with_enclave(enclave_id)->accept_provisioning(contract, bundles);
  }

  InvokeOutput relay_invoke(const Digest& enclave_id, const InvocationRequest& req) override {
    ContractEnclave* enclave = with_enclave(enclave_id);
    EsMode mode;
    {
      std::lock_guard lock(mu_);
      mode = options_.mode;
      if (mode == EsMode::replay_response && last_output_) {
        return *last_output_;
      }
    }

    InvocationRequest actual = req;
    if (mode == EsMode::tamper_state_input && !actual.encrypted_state.empty()) {
      actual.encrypted_state.back() ^= 0x01;
    }

    InvokeOutput out = enclave->invoke(actual);

    switch (mode) {
      case EsMode::tamper_result_blob:
        if (!out.encrypted_new_state.empty()) out.encrypted_new_state.back() ^= 0x01;
        break;
      case EsMode::tamper_update:
        out.update.new_state_hash.bytes[0] ^= 0x01;
        break;
      case EsMode::drop_response:
        throw EsError(EsError::Code::dropped, "response dropped");
      default:
        break;
    }

    {
      std::lock_guard lock(mu_);
      cache_blob(out.encrypted_new_state);
      last_output_ = out;
    }
    return out;
  }

  std::optional<Bytes> get_state(const Digest& state_hash) override {
    {
      std::lock_guard lock(mu_);
      auto it = blob_cache_.find(state_hash);
      if (it != blob_cache_.end()) return it->second;
    }
    if (options_.state_dir) {
      std::ifstream in(blob_path(state_hash));
      if (in) {
        std::string hex;
        in >> hex;
        try {
          Bytes blob = hex_decode(hex);
          if (crypto::hash(blob) == state_hash) return blob;
        } catch (const HexError&) {
        }
      }
    }
    return std::nullopt;
  }

  // -- Host lifecycle ----------------------------------------------------------

  /// Drops all live enclaves, as a host crash would. Sealed identities and
  /// cached blobs survive; provisioned state keys do not.
  void simulate_crash() {
    std::lock_guard lock(mu_);
    hosted_.clear();
    last_output_.reset();
  }

  /// Restores every enclave whose sealed identity is still present. Restored
  /// enclaves keep their registered identity but hold no contract keys until
  /// re-provisioned.
  void recover() {
    if (options_.state_dir) {
      for (const auto& f :
           std::filesystem::directory_iterator(*options_.state_dir / "sealed")) {
        std::ifstream in(f.path());
        std::string hex;
        in >> hex;
        try {
          SealedKeys sealed{hex_decode(hex)};
          adopt_sealed(sealed);
        } catch (const Error&) {
          // Unreadable blob: that identity is gone.
        }
      }
    }
    std::lock_guard lock(mu_);
    for (const auto& [id, sealed] : sealed_) {
      if (!hosted_.count(id)) adopt_sealed_locked(sealed);
    }
  }

  /// Destroys one sealed identity; after a crash, that enclave can never be
  /// restored (its signing key is unrecoverable).
  void destroy_sealed_keys(const Digest& enclave_id) {
    std::lock_guard lock(mu_);
    sealed_.erase(enclave_id);
    if (options_.state_dir) std::filesystem::remove(sealed_path(enclave_id));
  }

  bool hosts(const Digest& enclave_id) const {
    std::lock_guard lock(mu_);
    return hosted_.count(enclave_id) > 0;
  }

  // -- Adversarial simulation ---------------------------------------------------

  void compromise_enclave(const Digest& enclave_id) {
    with_enclave(enclave_id)->compromise_for_testing();
  }

  SymmetricKey exfiltrate_state_key(const Digest& enclave_id, const Digest& contract_id) {
    return with_enclave(enclave_id)->exfiltrate_state_key(contract_id);
  }

 private:
  ContractEnclave* with_enclave(const Digest& enclave_id) {
    std::lock_guard lock(mu_);
    auto it = hosted_.find(enclave_id);
    if (it == hosted_.end()) {
      throw EsError(EsError::Code::unknown_enclave, "enclave not hosted here");
    }
    return it->second.get();
  }

  void cache_blob(const Bytes& blob) {
    Digest h = crypto::hash(blob);
    blob_cache_[h] = blob;
    if (options_.state_dir) {
      std::ofstream out(blob_path(h), std::ios::trunc);
      out << hex_encode(blob) << '\n';
    }
  }

  void adopt_sealed(const SealedKeys& sealed) {
    std::lock_guard lock(mu_);
    adopt_sealed_locked(sealed);
  }

  void adopt_sealed_locked(const SealedKeys& sealed) {
    ContractEnclave::Options eopts;
    eopts.step_budget = options_.step_budget;
    eopts.measurement = options_.measurement;
    auto enclave = ContractEnclave::restore(platform_key_, sealed, eopts);
    Digest id = enclave->enclave_id();
    sealed_[id] = sealed;
    hosted_[id] = std::move(enclave);
  }

  void load_platform_key() {
    auto path = *options_.state_dir / "platform.key";
    std::ifstream in(path);
    if (in) {
      std::string hex;
      in >> hex;
      platform_key_ = SymmetricKey::from_hex(hex);
      return;
    }
    platform_key_ = SymmetricKey::from_bytes(random_array<32>());
    std::ofstream out(path, std::ios::trunc);
    out << platform_key_.hex() << '\n';
  }

  std::filesystem::path sealed_path(const Digest& enclave_id) const {
    return *options_.state_dir / "sealed" / (enclave_id.hex() + ".hex");
  }

  std::filesystem::path blob_path(const Digest& state_hash) const {
    return *options_.state_dir / "state" / (state_hash.hex() + ".hex");
  }

  crypto::SigningKeyPair owner_;
  IasApi& ias_;
  LedgerApi& ledger_;
  Options options_;
  SymmetricKey platform_key_;
  std::map<Digest, std::unique_ptr<ContractEnclave>> hosted_;
  std::map<Digest, SealedKeys> sealed_;
  std::map<Digest, Bytes> blob_cache_;
  std::optional<InvokeOutput> last_output_;
  mutable std::mutex mu_;
};

}  // namespace pdo
