// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Client-side protocol flows: contract creation with enclave provisioning,
// the three-phase invocation (prepare locally, verify everything, then
// commit), replicated invocation with majority agreement, and misbehavior
// evidence handling.
//
// Trust model: the client trusts the validator for ordering and the
// attestation root for enclave identity, and verifies everything else
// itself. Every invocation uses a fresh channel key pair, and commit
// transactions are signed only by that channel key, so ledger entries from
// the same user are unlinkable to each other and to the user's long-term
// identity.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/enclave.hpp"
#include "pdo/enclave_service.hpp"
#include "pdo/interpreter.hpp"
#include "pdo/ledger.hpp"
#include "pdo/provisioning.hpp"
#include "pdo/records.hpp"

namespace pdo {

struct ClientError : Error {
  enum class Code {
    ps_refused,
    es_error,
    enclave_error,
    verification_failed,
    ledger_rejected,
    stale_conflict,
    no_majority,
    not_found,
  };
  Code code;
  ClientError(Code c, const std::string& msg) : Error(msg), code(c) {}
};

/// Everything a user needs to keep using a contract: identity material to
/// verify against the ledger, the code, and the latest known state blob.
struct PdoHandle {
  Digest contract_id;
  std::string code;  // canonical text
  Digest code_hash;
  VerificationKey owner_pub;
  Nonce16 nonce;
  std::vector<VerificationKey> ps_list;
  Digest head = Digest::zero();  // zero until the contract is initialized
  Bytes state_blob;              // blob whose digest is head

  ContractDescriptor descriptor() const {
    return ContractDescriptor{contract_id, code_hash, owner_pub, nonce, ps_list};
  }
};

struct ProvisioningCheck {
  struct PerEnclave {
    Digest enclave_id;
    bool report_ok = false;
    bool proof_ok = false;
    bool revoked = false;
  };
  bool ok = false;
  size_t ps_count = 0;
  std::vector<PerEnclave> enclaves;
  std::vector<std::string> problems;
};

struct Prepared {
  InvokeOutput output;
  CclEntry entry;
  Transaction txn;
  Digest enclave_id;
  VerificationKey channel_pub;
};

struct InvokeOutcome {
  interp::Value result;
  Digest new_head;
  size_t attempts = 1;
};

/// Two contradictory signed updates from one enclave; accepted by the
/// validator as grounds for revocation.
struct MisbehaviorEvidence {
  Digest enclave_id;
  StateUpdate first;
  StateUpdate second;
};

struct ReplicatedOutcome {
  bool committed = false;
  interp::Value result;
  Digest new_head;
  size_t agreeing = 0;
  size_t total = 0;
  std::vector<Digest> dissenters;  // enclaves whose answers disagreed or failed
  std::vector<MisbehaviorEvidence> evidence;
};

struct ClientConfig {
  /// Minimum number of provisioning services a contract must list for the
  /// client to consider it trustworthy.
  size_t min_ps = 1;
  /// Stale-state retries per invoke.
  size_t max_retries = 3;
};

class Client {
 public:
  using Config = ClientConfig;

  Client(LedgerApi& ledger, std::vector<PsApi*> ps, std::vector<EsApi*> es, Config cfg = {})
      : ledger_(ledger), ps_(std::move(ps)), es_(std::move(es)), cfg_(cfg) {}

  // -- Creation ---------------------------------------------------------------

  /// Registers the contract, launches and provisions `enclave_count`
  /// enclaves across the configured enclave services, adds them to the
  /// contract record and runs the initialization method.
  PdoHandle create_contract(const crypto::SigningKeyPair& owner, std::string_view source,
                            size_t enclave_count, const std::string& init_method = "init",
                            interp::List init_args = {}) {
    if (es_.empty()) throw ClientError(ClientError::Code::not_found, "no enclave services");
    if (ps_.empty()) throw ClientError(ClientError::Code::not_found, "no provisioning services");
    if (enclave_count == 0) {
      throw ClientError(ClientError::Code::verification_failed, "need at least one enclave");
    }

    interp::Program prog = interp::parse_program(source);

    PdoHandle handle;
    handle.code = prog.canonical_text;
    handle.code_hash = prog.code_hash;
    handle.owner_pub = owner.pub;
    handle.nonce = Nonce16::from_bytes(random_array<16>());
    for (PsApi* ps : ps_) handle.ps_list.push_back(ps->ps_id());
    std::sort(handle.ps_list.begin(), handle.ps_list.end());
    for (size_t i = 1; i < handle.ps_list.size(); ++i) {
      if (handle.ps_list[i] == handle.ps_list[i - 1]) {
        throw ClientError(ClientError::Code::verification_failed,
                          "duplicate provisioning service identity");
      }
    }
    if (handle.ps_list.size() < cfg_.min_ps) {
      throw ClientError(ClientError::Code::verification_failed,
                        "fewer provisioning services than required");
    }
    handle.contract_id = contract_id_from(handle.code_hash, owner.pub, handle.nonce);

    ContractRegisterPayload reg;
    reg.code_hash = handle.code_hash;
    reg.nonce = handle.nonce;
    reg.ps_list = handle.ps_list;
    expect_accept(ledger_.submit(make_transaction(reg, owner)), "contract registration");

    for (size_t i = 0; i < enclave_count; ++i) {
      EsApi* es = es_[i % es_.size()];
      LaunchOutcome launched = launch_via(*es);
      if (!launched.registration.accepted) {
        throw ClientError(ClientError::Code::ledger_rejected,
                          "enclave registration rejected: " +
                              std::string(reject_name(*launched.registration.reason)));
      }
      provision_enclave(owner, handle, *es, launched.enclave_id);
    }

    InvokeOutcome init = invoke(handle, init_method, std::move(init_args));
    (void)init;
    return handle;
  }

  /// Provisions one already-registered enclave for the contract and records
  /// it on the ledger.
  void provision_enclave(const crypto::SigningKeyPair& owner, const PdoHandle& handle, EsApi& es,
                         const Digest& enclave_id) {
    std::vector<SecretBundle> bundles;
    for (PsApi* ps : ps_) {
      PsProvisionResult r = ps->provision(handle.contract_id, enclave_id);
      if (!r.ok) {
        throw ClientError(ClientError::Code::ps_refused,
                          "provisioning refused (" + std::string(ps_refusal_name(*r.refusal)) +
                              (r.detail.empty() ? ")" : "): " + r.detail));
      }
      bundles.push_back(SecretBundle{ps->ps_id(), std::move(r.sealed_secret), r.ps_sig});
    }
    Signature proof;
    try {
      proof = es.relay_provisioning(enclave_id, handle.descriptor(), bundles);
    } catch (const EnclaveError& e) {
      throw ClientError(ClientError::Code::enclave_error,
                        std::string("enclave rejected provisioning: ") + e.what());
    }
    AddEnclavePayload add;
    add.contract_id = handle.contract_id;
    add.enclave = ProvisionedEnclave{enclave_id, std::move(bundles), proof};
    expect_accept(ledger_.submit(make_transaction(add, owner)), "add-enclave");
  }

  // -- Invocation ---------------------------------------------------------------

  /// Brings the handle up to date with the committed head, fetching the state
  /// blob from enclave-service caches when the local copy is stale.
  void refresh(PdoHandle& handle) {
    auto head = ledger_.get_head(handle.contract_id);
    if (!head) {
      handle.head = Digest::zero();
      handle.state_blob.clear();
      return;
    }
    if (handle.head == *head && !handle.state_blob.empty() &&
        crypto::hash(handle.state_blob) == *head) {
      return;
    }
    for (EsApi* es : es_) {
      auto blob = es->get_state(*head);
      if (blob && crypto::hash(*blob) == *head) {
        handle.head = *head;
        handle.state_blob = std::move(*blob);
        return;
      }
    }
    throw ClientError(ClientError::Code::not_found,
                      "no enclave service holds the current state blob");
  }

  /// Phases 1 and 2: execute on one enclave and verify every link of the
  /// response. Returns the fully verified, ready-to-submit transaction.
  Prepared prepare(PdoHandle& handle, const std::string& method, interp::List args,
                   std::vector<Dependency> deps = {},
                   std::optional<Digest> enclave_choice = std::nullopt) {
    refresh(handle);
    ContractRecord record = contract_record(handle.contract_id);

    Digest enclave_id = pick_enclave(record, enclave_choice);
    EsApi& es = es_hosting(enclave_id);

    crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();
    InvokeOutput output =
        run_on_enclave(es, enclave_id, handle, channel, method, args, deps);
    verify_output(handle, record, enclave_id, channel.pub, method, args, deps, output);

    CclEntry entry;
    entry.update = output.update;
    entry.enclave_id = enclave_id;
    entry.channel_sig = crypto::sign(channel, ccl_channel_signing_bytes(entry));

    Prepared prepared;
    prepared.output = std::move(output);
    prepared.entry = entry;
    prepared.txn = make_transaction(CclUpdatePayload{entry}, channel);
    prepared.enclave_id = enclave_id;
    prepared.channel_pub = channel.pub;
    return prepared;
  }

  /// Phase 3: submit. On acceptance the handle advances to the new state.
  SubmitResult commit(PdoHandle& handle, const Prepared& prepared) {
    SubmitResult r = ledger_.submit(prepared.txn);
    if (r.accepted) {
      handle.head = prepared.entry.update.new_state_hash;
      handle.state_blob = prepared.output.encrypted_new_state;
    }
    return r;
  }

  /// Full invocation with bounded retry on stale-state (another writer got
  /// in first). Each retry re-executes against the new head with a fresh
  /// channel key.
  InvokeOutcome invoke(PdoHandle& handle, const std::string& method, interp::List args,
                       std::vector<Dependency> deps = {}) {
    for (size_t attempt = 1; attempt <= cfg_.max_retries + 1; ++attempt) {
      Prepared prepared = prepare(handle, method, args, deps);
      SubmitResult r = commit(handle, prepared);
      if (r.accepted) {
        return InvokeOutcome{std::move(prepared.output.result),
                             prepared.entry.update.new_state_hash, attempt};
      }
      if (r.reason == Reject::stale_state) continue;
      throw ClientError(ClientError::Code::ledger_rejected,
                        "commit rejected (" + std::string(reject_name(*r.reason)) +
                            (r.detail.empty() ? ")" : "): " + r.detail));
    }
    throw ClientError(ClientError::Code::stale_conflict,
                      "could not commit: head kept moving");
  }

  /// Executes without committing: the result is verified exactly like a
  /// committed invocation, but no ledger entry is produced and the chain
  /// head does not move.
  interp::Value read(PdoHandle& handle, const std::string& method, interp::List args = {}) {
    Prepared prepared = prepare(handle, method, std::move(args));
    return prepared.output.result;
  }

  // -- Replicated invocation ------------------------------------------------------

  /// Sends the identical request to `replicas` provisioned enclaves, commits
  /// only with strict-majority byte-identical agreement, and collects
  /// self-contradiction evidence from dissenting enclaves by re-asking them.
  ReplicatedOutcome replicated_invoke(PdoHandle& handle, const std::string& method,
                                      interp::List args, std::vector<Dependency> deps = {},
                                      size_t replicas = 3) {
    refresh(handle);
    ContractRecord record = contract_record(handle.contract_id);

    std::vector<Digest> chosen;
    for (const ProvisionedEnclave& pe : record.enclaves) {
      auto er = ledger_.get_enclave(pe.enclave_id);
      if (er && !er->revoked) chosen.push_back(pe.enclave_id);
      if (chosen.size() == replicas) break;
    }
    if (chosen.size() < replicas) {
      throw ClientError(ClientError::Code::not_found,
                        "fewer unrevoked provisioned enclaves than replicas requested");
    }

    crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();

    ReplicatedOutcome outcome;
    outcome.total = chosen.size();

    std::vector<std::pair<Digest, InvokeOutput>> answers;
    for (const Digest& enclave_id : chosen) {
      try {
        answers.emplace_back(enclave_id,
                             run_on_enclave(es_hosting(enclave_id), enclave_id, handle, channel,
                                            method, args, deps));
      } catch (const Error&) {
        outcome.dissenters.push_back(enclave_id);
      }
    }

    // Group by the enclave-signed tuple bytes: byte-identical agreement.
    std::map<Bytes, std::vector<size_t>> groups;
    for (size_t i = 0; i < answers.size(); ++i) {
      groups[state_update_signing_bytes(answers[i].second.update)].push_back(i);
    }
    const std::vector<size_t>* majority = nullptr;
    for (const auto& [bytes, members] : groups) {
      if (members.size() * 2 > chosen.size()) majority = &members;
    }

    if (majority) {
      outcome.agreeing = majority->size();
      for (const auto& [bytes, members] : groups) {
        if (&members == majority) continue;
        for (size_t i : members) outcome.dissenters.push_back(answers[i].first);
      }
    } else {
      for (const auto& [id, out] : answers) outcome.dissenters.push_back(id);
    }

    // Re-ask each dissenter the identical question. An enclave that answers
    // the same context twice with different output has signed its own
    // indictment.
    for (const Digest& enclave_id : outcome.dissenters) {
      const InvokeOutput* first = nullptr;
      for (const auto& [id, out] : answers) {
        if (id == enclave_id) first = &out;
      }
      if (!first) continue;
      try {
        InvokeOutput second = run_on_enclave(es_hosting(enclave_id), enclave_id, handle, channel,
                                             method, args, deps);
        if (second.update.new_state_hash != first->update.new_state_hash) {
          outcome.evidence.push_back(
              MisbehaviorEvidence{enclave_id, first->update, second.update});
        }
      } catch (const Error&) {
      }
    }

    if (!majority) {
      return outcome;  // nothing safe to commit
    }

    // Verify and commit one representative of the majority.
    const auto& [enclave_id, output] = answers[majority->front()];
    verify_output(handle, record, enclave_id, channel.pub, method, args, deps, output);
    CclEntry entry;
    entry.update = output.update;
    entry.enclave_id = enclave_id;
    entry.channel_sig = crypto::sign(channel, ccl_channel_signing_bytes(entry));
    SubmitResult r = ledger_.submit(make_transaction(CclUpdatePayload{entry}, channel));
    if (r.accepted) {
      outcome.committed = true;
      outcome.result = output.result;
      outcome.new_head = entry.update.new_state_hash;
      handle.head = entry.update.new_state_hash;
      handle.state_blob = output.encrypted_new_state;
    }
    return outcome;
  }

  /// Submits equivocation evidence under a fresh throwaway key; anyone can.
  SubmitResult submit_evidence(const MisbehaviorEvidence& ev) {
    EvidencePayload payload;
    payload.enclave_id = ev.enclave_id;
    payload.first = ev.first;
    payload.second = ev.second;
    crypto::SigningKeyPair ephemeral = crypto::SigningKeyPair::generate();
    return ledger_.submit(make_transaction(payload, ephemeral));
  }

  // -- Verification ---------------------------------------------------------------

  /// Checks a contract's entire provisioning story against the ledger: every
  /// provisioned enclave's attestation report and proof of provisioning, and
  /// the provisioning-service count.
  ProvisioningCheck verify_provisioning(const ContractRecord& record) {
    ProvisioningCheck check;
    check.ps_count = record.ps_list.size();
    GenesisConfig genesis = ledger_.genesis();
    bool all_ok = true;
    for (const ProvisionedEnclave& pe : record.enclaves) {
      ProvisioningCheck::PerEnclave per;
      per.enclave_id = pe.enclave_id;
      auto er = ledger_.get_enclave(pe.enclave_id);
      if (!er) {
        check.problems.push_back("enclave missing from registry: " + pe.enclave_id.hex());
        all_ok = false;
        check.enclaves.push_back(per);
        continue;
      }
      per.revoked = er->revoked;
      per.report_ok =
          check_report(er->report, genesis.attestation_root_pub, genesis.expected_measurement) &&
          er->report.quote.report_data == quote_report_data(er->verif_pub, er->enc_pub);
      per.proof_ok = crypto::verify(
          er->verif_pub,
          provisioning_proof_signing_bytes(record.contract_id, record.ps_list,
                                           bundles_hash(pe.sealed_secrets)),
          pe.provisioning_proof);
      if (!per.report_ok) {
        check.problems.push_back("attestation check failed: " + pe.enclave_id.hex());
        all_ok = false;
      }
      if (!per.proof_ok) {
        check.problems.push_back("provisioning proof invalid: " + pe.enclave_id.hex());
        all_ok = false;
      }
      check.enclaves.push_back(per);
    }
    if (record.ps_list.size() < cfg_.min_ps) {
      check.problems.push_back("fewer provisioning services than required");
      all_ok = false;
    }
    check.ok = all_ok && !record.enclaves.empty();
    return check;
  }

 private:
  static void expect_accept(const SubmitResult& r, std::string_view what) {
    if (!r.accepted) {
      throw ClientError(ClientError::Code::ledger_rejected,
                        std::string(what) + " rejected (" +
                            std::string(reject_name(*r.reason)) +
                            (r.detail.empty() ? ")" : "): " + r.detail));
    }
  }

  LaunchOutcome launch_via(EsApi& es) {
    try {
      return es.launch();
    } catch (const EsError& e) {
      throw ClientError(ClientError::Code::es_error,
                        std::string("enclave launch failed: ") + e.what());
    }
  }

  ContractRecord contract_record(const Digest& contract_id) {
    auto record = ledger_.get_contract(contract_id);
    if (!record) {
      throw ClientError(ClientError::Code::not_found, "contract not on ledger");
    }
    if (record->revoked) {
      throw ClientError(ClientError::Code::verification_failed, "contract is revoked");
    }
    return *record;
  }

  Digest pick_enclave(const ContractRecord& record, const std::optional<Digest>& choice) {
    if (choice) {
      if (!record.find_enclave(*choice)) {
        throw ClientError(ClientError::Code::verification_failed,
                          "chosen enclave is not provisioned for this contract");
      }
      auto er = ledger_.get_enclave(*choice);
      if (!er || er->revoked) {
        throw ClientError(ClientError::Code::verification_failed,
                          "chosen enclave is revoked");
      }
      return *choice;
    }
    for (const ProvisionedEnclave& pe : record.enclaves) {
      auto er = ledger_.get_enclave(pe.enclave_id);
      if (er && !er->revoked) return pe.enclave_id;
    }
    throw ClientError(ClientError::Code::not_found,
                      "no unrevoked enclave provisioned for this contract");
  }

  EsApi& es_hosting(const Digest& enclave_id) {
    for (EsApi* es : es_) {
      for (const HostedEnclaveInfo& info : es->enclaves()) {
        if (info.enclave_id == enclave_id) return *es;
      }
    }
    throw ClientError(ClientError::Code::not_found, "no enclave service hosts this enclave");
  }

  InvokeOutput run_on_enclave(EsApi& es, const Digest& enclave_id, const PdoHandle& handle,
                              const crypto::SigningKeyPair& channel, const std::string& method,
                              const interp::List& args, const std::vector<Dependency>& deps) {
    InvocationRequest req;
    req.contract_id = handle.contract_id;
    req.code = handle.code;
    req.encrypted_state = handle.head.is_zero() ? Bytes{} : handle.state_blob;
    req.message.method = method;
    req.message.args = args;
    req.dependencies = deps;
    req.channel_pub = channel.pub;
    Digest message_hash = crypto::hash(invocation_message_bytes(req.message, channel.pub));
    req.channel_sig = crypto::sign(
        channel, invocation_request_signing_bytes(handle.contract_id, handle.code_hash,
                                                  handle.head, message_hash, deps, channel.pub));
    try {
      return es.relay_invoke(enclave_id, req);
    } catch (const EnclaveError& e) {
      throw ClientError(ClientError::Code::enclave_error,
                        std::string("enclave error: ") + e.what());
    } catch (const EsError& e) {
      throw ClientError(ClientError::Code::es_error,
                        std::string("enclave service error: ") + e.what());
    }
  }

  /// Phase 2: every check a prudent user makes before signing the commit.
  void verify_output(const PdoHandle& handle, const ContractRecord& record,
                     const Digest& enclave_id, const VerificationKey& channel_pub,
                     const std::string& method, const interp::List& args,
                     const std::vector<Dependency>& deps, const InvokeOutput& output) {
    const StateUpdate& u = output.update;
    auto fail = [](const std::string& msg) {
      throw ClientError(ClientError::Code::verification_failed, "response verification: " + msg);
    };

    if (u.contract_id != handle.contract_id) fail("update names a different contract");
    if (u.channel_pub != channel_pub) fail("update bound to a different channel key");
    if (u.prev_state_hash != handle.head) fail("update does not extend the expected state");
    InvocationMessage msg{method, args};
    if (u.message_hash != crypto::hash(invocation_message_bytes(msg, channel_pub))) {
      fail("update answers a different message");
    }
    if (u.dependencies != deps) fail("update carries different dependencies");
    if (u.new_state_hash != crypto::hash(output.encrypted_new_state)) {
      fail("returned state blob does not match the signed new state hash");
    }
    if (!record.find_enclave(enclave_id)) fail("enclave is not provisioned for this contract");
    auto er = ledger_.get_enclave(enclave_id);
    if (!er) fail("enclave is not registered");
    if (er->revoked) fail("enclave is revoked");
    if (!crypto::verify(er->verif_pub, state_update_signing_bytes(u), u.enclave_sig)) {
      fail("enclave signature over the update is invalid");
    }
    ProvisioningCheck check = verify_provisioning(record);
    if (!check.ok) {
      std::string detail = "provisioning verification failed";
      for (const std::string& p : check.problems) detail += "; " + p;
      fail(detail);
    }
  }

  LedgerApi& ledger_;
  std::vector<PsApi*> ps_;
  std::vector<EsApi*> es_;
  Config cfg_;
};

}  // namespace pdo
