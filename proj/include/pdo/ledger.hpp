// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Single-validator ledger. Transactions are validated under a mutex and
// applied atomically; accepted transactions are appended to an in-memory log
// and optionally to a log file (one lowercase-hex canonical transaction per
// line). Replaying a log through a fresh validator reproduces the exact same
// state, and any byte flip in the file aborts the replay at that line.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pdo/attestation.hpp"
#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/records.hpp"

namespace pdo {

/// Closed set of rejection reasons. The detail string that accompanies a
/// rejection is diagnostic only; acceptance logic keys off the code.
enum class Reject {
  bad_signature,
  unknown_enclave,
  stale_state,
  missing_dependency,
  revoked,
  duplicate,
  malformed,
  bad_attestation,
  not_owner,
};

inline std::string_view reject_name(Reject r) {
  switch (r) {
    case Reject::bad_signature: return "bad-signature";
    case Reject::unknown_enclave: return "unknown-enclave";
    case Reject::stale_state: return "stale-state";
    case Reject::missing_dependency: return "missing-dependency";
    case Reject::revoked: return "revoked";
    case Reject::duplicate: return "duplicate";
    case Reject::malformed: return "malformed";
    case Reject::bad_attestation: return "bad-attestation";
    case Reject::not_owner: return "not-owner";
  }
  throw Error("invalid reject code");
}

inline std::optional<Reject> reject_from_name(std::string_view name) {
  static const std::map<std::string_view, Reject> kNames = {
      {"bad-signature", Reject::bad_signature},
      {"unknown-enclave", Reject::unknown_enclave},
      {"stale-state", Reject::stale_state},
      {"missing-dependency", Reject::missing_dependency},
      {"revoked", Reject::revoked},
      {"duplicate", Reject::duplicate},
      {"malformed", Reject::malformed},
      {"bad-attestation", Reject::bad_attestation},
      {"not-owner", Reject::not_owner},
  };
  auto it = kNames.find(name);
  if (it == kNames.end()) return std::nullopt;
  return it->second;
}

struct SubmitResult {
  bool accepted = false;
  std::optional<Reject> reason;
  std::string detail;
  Digest txn_id;

  static SubmitResult ok(const Digest& txn_id) {
    SubmitResult r;
    r.accepted = true;
    r.txn_id = txn_id;
    return r;
  }
  static SubmitResult rejected(Reject reason, std::string detail, const Digest& txn_id) {
    SubmitResult r;
    r.reason = reason;
    r.detail = std::move(detail);
    r.txn_id = txn_id;
    return r;
  }
};

class LedgerApi {
 public:
  virtual ~LedgerApi() = default;
  virtual SubmitResult submit(const Transaction& txn) = 0;
  virtual std::optional<EnclaveRecord> get_enclave(const Digest& enclave_id) = 0;
  virtual std::optional<ContractRecord> get_contract(const Digest& contract_id) = 0;
  virtual std::optional<Digest> get_head(const Digest& contract_id) = 0;
  virtual std::optional<CclEntry> get_entry(const Digest& contract_id,
                                            const Digest& state_hash) = 0;
  virtual GenesisConfig genesis() = 0;
};

struct ReplayError : Error {
  size_t line;
  ReplayError(size_t line_, const std::string& msg)
      : Error("replay failed at transaction " + std::to_string(line_) + ": " + msg),
        line(line_) {}
};

class Ledger final : public LedgerApi {
 public:
  explicit Ledger(GenesisConfig genesis) : genesis_(genesis) {}

  // -- LedgerApi ------------------------------------------------------------

  SubmitResult submit(const Transaction& txn) override {
    std::lock_guard lock(mu_);
    SubmitResult result = apply(txn);
    if (result.accepted) {
      log_.push_back(txn);
      if (log_stream_) {
        *log_stream_ << hex_encode(transaction_bytes(txn)) << '\n';
        log_stream_->flush();
      }
    }
    return result;
  }

  std::optional<EnclaveRecord> get_enclave(const Digest& enclave_id) override {
    std::lock_guard lock(mu_);
    auto it = enclaves_.find(enclave_id);
    if (it == enclaves_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ContractRecord> get_contract(const Digest& contract_id) override {
    std::lock_guard lock(mu_);
    auto it = contracts_.find(contract_id);
    if (it == contracts_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<Digest> get_head(const Digest& contract_id) override {
    std::lock_guard lock(mu_);
    auto it = heads_.find(contract_id);
    if (it == heads_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<CclEntry> get_entry(const Digest& contract_id, const Digest& state_hash) override {
    std::lock_guard lock(mu_);
    auto it = entries_.find({contract_id, state_hash});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  GenesisConfig genesis() override { return genesis_; }

  // -- Introspection ----------------------------------------------------------

  size_t log_size() const {
    std::lock_guard lock(mu_);
    return log_.size();
  }

  std::vector<Transaction> log_snapshot() const {
    std::lock_guard lock(mu_);
    return log_;
  }

  std::vector<Digest> contract_ids() const {
    std::lock_guard lock(mu_);
    std::vector<Digest> out;
    for (const auto& [id, rec] : contracts_) out.push_back(id);
    return out;
  }

  std::vector<Digest> enclave_ids() const {
    std::lock_guard lock(mu_);
    std::vector<Digest> out;
    for (const auto& [id, rec] : enclaves_) out.push_back(id);
    return out;
  }

  /// Commit chain for one contract, oldest first (init entry onward).
  std::vector<CclEntry> chain(const Digest& contract_id) const {
    std::lock_guard lock(mu_);
    std::vector<CclEntry> out;
    auto head = heads_.find(contract_id);
    if (head == heads_.end()) return out;
    Digest cursor = head->second;
    while (!cursor.is_zero()) {
      auto it = entries_.find({contract_id, cursor});
      if (it == entries_.end()) break;
      out.push_back(it->second);
      cursor = it->second.update.prev_state_hash;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  /// Digest over the canonical encoding of the entire post-replay state:
  /// registries, heads and commit entries. Two ledgers with equal digests
  /// hold byte-identical state.
  Digest state_digest() const {
    std::lock_guard lock(mu_);
    crypto::Sha256 h;
    h.update("pdo/ledger-state/v1");
    for (const auto& [id, rec] : enclaves_) h.update(enclave_record_bytes(rec));
    for (const auto& [id, rec] : contracts_) h.update(contract_record_bytes(rec));
    for (const auto& [id, head] : heads_) {
      h.update(id.view());
      h.update(head.view());
    }
    for (const auto& [key, entry] : entries_) h.update(ccl_entry_bytes(entry));
    return h.finish();
  }

  // -- Persistence ------------------------------------------------------------

  /// Opens `path` for appending; every subsequently accepted transaction is
  /// written through. Call after replaying an existing file to continue it.
  void attach_log(const std::filesystem::path& path) {
    std::lock_guard lock(mu_);
    log_stream_.emplace(path, std::ios::app | std::ios::binary);
    if (!*log_stream_) throw Error("cannot open transaction log: " + path.string());
  }

  void write_log(const std::filesystem::path& path) const {
    std::lock_guard lock(mu_);
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write transaction log: " + path.string());
    for (const Transaction& txn : log_) out << hex_encode(transaction_bytes(txn)) << '\n';
  }

  /// Rebuilds ledger state by replaying a transaction log into this freshly
  /// constructed instance. Every line must parse canonically and validate
  /// exactly as it did when first accepted; the first deviation aborts the
  /// replay with the offending line number.
  void load_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open transaction log: " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Transaction txn;
      try {
        txn = transaction_decode(hex_decode(line));
      } catch (const Error& e) {
        throw ReplayError(line_no, e.what());
      }
      SubmitResult result;
      {
        std::lock_guard lock(mu_);
        result = apply(txn);
        if (result.accepted) log_.push_back(txn);
      }
      if (!result.accepted) {
        throw ReplayError(line_no, std::string(reject_name(*result.reason)) +
                                       (result.detail.empty() ? "" : ": " + result.detail));
      }
    }
  }

 private:
  // All validation runs with mu_ held: validate-then-apply is atomic, so two
  // racing updates against the same head serialize and the loser sees
  // stale-state.
  SubmitResult apply(const Transaction& txn) {
    Digest expect_id = crypto::hash(transaction_envelope_bytes(
        family_of(txn.payload), txn.payload_bytes, txn.submitter_pub, txn.submitter_sig));
    if (txn.txn_id != expect_id) {
      return SubmitResult::rejected(Reject::malformed, "txn_id mismatch", txn.txn_id);
    }
    if (seen_txns_.count(txn.txn_id)) {
      return SubmitResult::rejected(Reject::duplicate, "transaction already committed",
                                    txn.txn_id);
    }
    Bytes canonical = payload_canonical(txn.payload);
    if (canonical != txn.payload_bytes) {
      return SubmitResult::rejected(Reject::malformed, "payload encoding not canonical",
                                    txn.txn_id);
    }
    if (!crypto::verify(txn.submitter_pub, txn.payload_bytes, txn.submitter_sig)) {
      return SubmitResult::rejected(Reject::bad_signature, "submitter signature invalid",
                                    txn.txn_id);
    }

    SubmitResult result = std::visit(
        [&](const auto& p) -> SubmitResult {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, EnclaveRegisterPayload>) {
            return apply_enclave_register(txn, p);
          } else if constexpr (std::is_same_v<T, EnclaveRevokePayload>) {
            return apply_enclave_revoke(txn, p);
          } else if constexpr (std::is_same_v<T, EvidencePayload>) {
            return apply_evidence(txn, p);
          } else if constexpr (std::is_same_v<T, ContractRegisterPayload>) {
            return apply_contract_register(txn, p);
          } else if constexpr (std::is_same_v<T, ContractRevokePayload>) {
            return apply_contract_revoke(txn, p);
          } else if constexpr (std::is_same_v<T, AddEnclavePayload>) {
            return apply_add_enclave(txn, p);
          } else {
            static_assert(std::is_same_v<T, CclUpdatePayload>);
            return apply_ccl_update(txn, p);
          }
        },
        txn.payload);
    if (result.accepted) seen_txns_.insert(txn.txn_id);
    return result;
  }

  SubmitResult apply_enclave_register(const Transaction& txn, const EnclaveRegisterPayload& p) {
    Digest enclave_id = enclave_id_from(p.verif_pub);
    if (enclaves_.count(enclave_id)) {
      return SubmitResult::rejected(Reject::duplicate, "enclave already registered", txn.txn_id);
    }
    if (!check_report(p.report, genesis_.attestation_root_pub, genesis_.expected_measurement)) {
      return SubmitResult::rejected(Reject::bad_attestation,
                                    "attestation report check failed", txn.txn_id);
    }
    if (p.report.quote.report_data != quote_report_data(p.verif_pub, p.enc_pub)) {
      return SubmitResult::rejected(Reject::bad_attestation,
                                    "report does not bind these enclave keys", txn.txn_id);
    }
    EnclaveRecord rec;
    rec.enclave_id = enclave_id;
    rec.verif_pub = p.verif_pub;
    rec.enc_pub = p.enc_pub;
    rec.owner_pub = txn.submitter_pub;
    rec.report = p.report;
    enclaves_.emplace(enclave_id, std::move(rec));
    return SubmitResult::ok(txn.txn_id);
  }

  SubmitResult apply_enclave_revoke(const Transaction& txn, const EnclaveRevokePayload& p) {
    auto it = enclaves_.find(p.enclave_id);
    if (it == enclaves_.end()) {
      return SubmitResult::rejected(Reject::unknown_enclave, "no such enclave", txn.txn_id);
    }
    if (txn.submitter_pub != it->second.owner_pub) {
      return SubmitResult::rejected(Reject::not_owner, "submitter does not own enclave",
                                    txn.txn_id);
    }
    if (it->second.revoked) {
      return SubmitResult::rejected(Reject::duplicate, "enclave already revoked", txn.txn_id);
    }
    it->second.revoked = true;
    return SubmitResult::ok(txn.txn_id);
  }

  SubmitResult apply_evidence(const Transaction& txn, const EvidencePayload& p) {
    auto it = enclaves_.find(p.enclave_id);
    if (it == enclaves_.end()) {
      return SubmitResult::rejected(Reject::unknown_enclave, "no such enclave", txn.txn_id);
    }
    if (it->second.revoked) {
      return SubmitResult::rejected(Reject::duplicate, "enclave already revoked", txn.txn_id);
    }
    // Equivocation: same execution context, contradictory output.
    if (p.first.contract_id != p.second.contract_id ||
        p.first.prev_state_hash != p.second.prev_state_hash ||
        p.first.message_hash != p.second.message_hash) {
      return SubmitResult::rejected(Reject::malformed, "updates are not comparable", txn.txn_id);
    }
    if (p.first.new_state_hash == p.second.new_state_hash) {
      return SubmitResult::rejected(Reject::malformed, "updates do not conflict", txn.txn_id);
    }
    const VerificationKey& pub = it->second.verif_pub;
    if (!crypto::verify(pub, state_update_signing_bytes(p.first), p.first.enclave_sig) ||
        !crypto::verify(pub, state_update_signing_bytes(p.second), p.second.enclave_sig)) {
      return SubmitResult::rejected(Reject::bad_signature,
                                    "evidence signature does not verify", txn.txn_id);
    }
    it->second.revoked = true;
    return SubmitResult::ok(txn.txn_id);
  }

  SubmitResult apply_contract_register(const Transaction& txn, const ContractRegisterPayload& p) {
    if (p.ps_list.empty()) {
      return SubmitResult::rejected(Reject::malformed, "ps_list must be non-empty", txn.txn_id);
    }
    Digest contract_id = contract_id_from(p.code_hash, txn.submitter_pub, p.nonce);
    if (contracts_.count(contract_id)) {
      return SubmitResult::rejected(Reject::duplicate, "contract already registered", txn.txn_id);
    }
    ContractRecord rec;
    rec.contract_id = contract_id;
    rec.code_hash = p.code_hash;
    rec.owner_pub = txn.submitter_pub;
    rec.ps_list = p.ps_list;
    contracts_.emplace(contract_id, std::move(rec));
    return SubmitResult::ok(txn.txn_id);
  }

  SubmitResult apply_contract_revoke(const Transaction& txn, const ContractRevokePayload& p) {
    auto it = contracts_.find(p.contract_id);
    if (it == contracts_.end()) {
      return SubmitResult::rejected(Reject::malformed, "no such contract", txn.txn_id);
    }
    if (txn.submitter_pub != it->second.owner_pub) {
      return SubmitResult::rejected(Reject::not_owner, "submitter does not own contract",
                                    txn.txn_id);
    }
    if (it->second.revoked) {
      return SubmitResult::rejected(Reject::duplicate, "contract already revoked", txn.txn_id);
    }
    it->second.revoked = true;
    return SubmitResult::ok(txn.txn_id);
  }

  SubmitResult apply_add_enclave(const Transaction& txn, const AddEnclavePayload& p) {
    auto cit = contracts_.find(p.contract_id);
    if (cit == contracts_.end()) {
      return SubmitResult::rejected(Reject::malformed, "no such contract", txn.txn_id);
    }
    ContractRecord& contract = cit->second;
    if (contract.revoked) {
      return SubmitResult::rejected(Reject::revoked, "contract is revoked", txn.txn_id);
    }
    if (txn.submitter_pub != contract.owner_pub) {
      return SubmitResult::rejected(Reject::not_owner, "submitter does not own contract",
                                    txn.txn_id);
    }
    auto eit = enclaves_.find(p.enclave.enclave_id);
    if (eit == enclaves_.end()) {
      return SubmitResult::rejected(Reject::unknown_enclave, "enclave not registered", txn.txn_id);
    }
    if (eit->second.revoked) {
      return SubmitResult::rejected(Reject::revoked, "enclave is revoked", txn.txn_id);
    }
    if (contract.find_enclave(p.enclave.enclave_id)) {
      return SubmitResult::rejected(Reject::duplicate, "enclave already provisioned",
                                    txn.txn_id);
    }
    // One bundle per listed provisioning service, no extras, no omissions.
    std::set<VerificationKey> listed(contract.ps_list.begin(), contract.ps_list.end());
    std::set<VerificationKey> bundled;
    for (const SecretBundle& b : p.enclave.sealed_secrets) {
      if (!bundled.insert(b.ps_id).second) {
        return SubmitResult::rejected(Reject::malformed, "duplicate ps_id in bundles",
                                      txn.txn_id);
      }
    }
    if (bundled != listed) {
      return SubmitResult::rejected(Reject::malformed,
                                    "bundles do not match the contract's ps_list", txn.txn_id);
    }
    for (const SecretBundle& b : p.enclave.sealed_secrets) {
      Bytes signed_bytes =
          ps_sealed_signing_bytes(p.contract_id, p.enclave.enclave_id, b.sealed_secret);
      if (!crypto::verify(b.ps_id, signed_bytes, b.ps_sig)) {
        return SubmitResult::rejected(Reject::bad_signature,
                                      "provisioning service signature invalid", txn.txn_id);
      }
    }
    Bytes proof_bytes = provisioning_proof_signing_bytes(p.contract_id, contract.ps_list,
                                                         bundles_hash(p.enclave.sealed_secrets));
    if (!crypto::verify(eit->second.verif_pub, proof_bytes, p.enclave.provisioning_proof)) {
      return SubmitResult::rejected(Reject::bad_signature, "provisioning proof invalid",
                                    txn.txn_id);
    }
    contract.enclaves.push_back(p.enclave);
    return SubmitResult::ok(txn.txn_id);
  }

  SubmitResult apply_ccl_update(const Transaction& txn, const CclUpdatePayload& p) {
    const CclEntry& entry = p.entry;
    const StateUpdate& u = entry.update;
    auto cit = contracts_.find(u.contract_id);
    if (cit == contracts_.end()) {
      return SubmitResult::rejected(Reject::malformed, "no such contract", txn.txn_id);
    }
    ContractRecord& contract = cit->second;
    if (contract.revoked) {
      return SubmitResult::rejected(Reject::revoked, "contract is revoked", txn.txn_id);
    }
    if (!contract.find_enclave(entry.enclave_id)) {
      return SubmitResult::rejected(Reject::unknown_enclave,
                                    "enclave not provisioned for contract", txn.txn_id);
    }
    auto eit = enclaves_.find(entry.enclave_id);
    if (eit == enclaves_.end()) {
      return SubmitResult::rejected(Reject::unknown_enclave, "enclave not registered",
                                    txn.txn_id);
    }
    if (eit->second.revoked) {
      return SubmitResult::rejected(Reject::revoked, "enclave is revoked", txn.txn_id);
    }
    if (u.new_state_hash.is_zero()) {
      return SubmitResult::rejected(Reject::malformed, "new state hash is reserved", txn.txn_id);
    }
    if (u.new_state_hash == u.prev_state_hash) {
      return SubmitResult::rejected(Reject::malformed, "no-op state transition", txn.txn_id);
    }
    if (!crypto::verify(eit->second.verif_pub, state_update_signing_bytes(u), u.enclave_sig)) {
      return SubmitResult::rejected(Reject::bad_signature, "enclave signature invalid",
                                    txn.txn_id);
    }
    // Channel discipline: the transaction must be submitted under the very
    // key the update was produced for, and signed by it.
    if (txn.submitter_pub != u.channel_pub) {
      return SubmitResult::rejected(Reject::bad_signature,
                                    "submitter is not the channel holder", txn.txn_id);
    }
    if (!crypto::verify(u.channel_pub, ccl_channel_signing_bytes(entry), entry.channel_sig)) {
      return SubmitResult::rejected(Reject::bad_signature, "channel signature invalid",
                                    txn.txn_id);
    }
    // Serial progression.
    auto head = heads_.find(u.contract_id);
    if (u.prev_state_hash.is_zero()) {
      if (head != heads_.end()) {
        return SubmitResult::rejected(Reject::stale_state, "contract already initialized",
                                      txn.txn_id);
      }
    } else {
      if (head == heads_.end() || head->second != u.prev_state_hash) {
        return SubmitResult::rejected(Reject::stale_state,
                                      "prev_state_hash is not the current head", txn.txn_id);
      }
    }
    // Cross-contract dependencies must already be committed.
    for (const Dependency& d : u.dependencies) {
      if (!entries_.count({d.contract_id, d.state_hash})) {
        return SubmitResult::rejected(Reject::missing_dependency,
                                      "dependency not committed: " + d.state_hash.hex(),
                                      txn.txn_id);
      }
    }
    heads_[u.contract_id] = u.new_state_hash;
    entries_.emplace(std::make_pair(u.contract_id, u.new_state_hash), entry);
    return SubmitResult::ok(txn.txn_id);
  }

  GenesisConfig genesis_;
  mutable std::mutex mu_;
  std::map<Digest, EnclaveRecord> enclaves_;
  std::map<Digest, ContractRecord> contracts_;
  std::map<Digest, Digest> heads_;
  std::map<std::pair<Digest, Digest>, CclEntry> entries_;
  std::set<Digest> seen_txns_;
  std::vector<Transaction> log_;
  mutable std::optional<std::ofstream> log_stream_;
};

}  // namespace pdo
