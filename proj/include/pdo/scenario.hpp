// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Self-contained demonstration scenarios: each builds a complete rig
// (validator, attestation root, provisioning services, enclave services,
// client) inside one process, drives a short story through it and checks the
// outcome at every step. All randomness is drawn from a seeded source, so a
// scenario's transcript is a pure function of its seed; the returned digest
// makes that checkable.
//
// Scenarios throw ScenarioError the moment reality deviates from the story.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pdo/client.hpp"
#include "pdo/http.hpp"
#include "pdo/sample_contracts.hpp"

namespace pdo::scenario {

struct ScenarioError : Error {
  using Error::Error;
};

using LogFn = std::function<void(const std::string&)>;

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames = {
      "counter-happy-path",
      "tampering-es",
      "equivocation-revocation",
      "escrow-dependency",
  };
  return kNames;
}

namespace detail {

inline std::string short_hex(const Digest& d) {
  return d.hex().substr(0, 12);
}

inline void expect(bool ok, const std::string& what) {
  if (!ok) throw ScenarioError("expectation failed: " + what);
}

inline std::string_view client_error_name(ClientError::Code c) {
  switch (c) {
    case ClientError::Code::ps_refused: return "ps_refused";
    case ClientError::Code::es_error: return "es_error";
    case ClientError::Code::enclave_error: return "enclave_error";
    case ClientError::Code::verification_failed: return "verification_failed";
    case ClientError::Code::ledger_rejected: return "ledger_rejected";
    case ClientError::Code::stale_conflict: return "stale_conflict";
    case ClientError::Code::no_majority: return "no_majority";
    case ClientError::Code::not_found: return "not_found";
  }
  return "unknown";
}

/// Complete single-process deployment. Every scenario starts from one of
/// these; the pieces are wired directly, not over HTTP, so scenarios are
/// fast and free of port allocation nondeterminism.
struct Rig {
  crypto::SigningKeyPair ias_root = crypto::SigningKeyPair::generate();
  AttestationService ias{ias_root, {current_measurement()}};
  GenesisConfig genesis{ias_root.pub, current_measurement()};
  Ledger ledger{genesis};

  crypto::SigningKeyPair owner = crypto::SigningKeyPair::generate();
  crypto::SigningKeyPair es_owner = crypto::SigningKeyPair::generate();

  ProvisioningService ps1{crypto::SigningKeyPair::generate(), ledger};
  ProvisioningService ps2{crypto::SigningKeyPair::generate(), ledger};
  EnclaveService es{es_owner, ias, ledger};
  Client client{ledger, {&ps1, &ps2}, {&es}};
};

/// Collects the transcript and hashes it, line by line.
class Transcript {
 public:
  Transcript(const LogFn& sink) : sink_(sink) {}

  void line(const std::string& text) {
    if (sink_) sink_(text);
    append(buf_, to_bytes(text));
    buf_.push_back('\n');
  }

  Digest digest() const { return crypto::hash(buf_); }

 private:
  const LogFn& sink_;
  Bytes buf_;
};

// ---------------------------------------------------------------------------

inline Digest counter_happy_path(const LogFn& log) {
  Transcript t(log);
  Rig rig;
  t.line("deploying validator, attestation root, 2 provisioning services, 1 enclave service");

  PdoHandle handle = rig.client.create_contract(rig.owner, samples::kCounter, 2);
  t.line("contract " + short_hex(handle.contract_id) + " created with 2 provisioned enclaves");
  t.line("initial head " + short_hex(handle.head));

  for (int i = 1; i <= 10; ++i) {
    InvokeOutcome out = rig.client.invoke(handle, "inc", {});
    expect(out.result == interp::Value::integer(i), "counter is " + std::to_string(i));
    t.line("inc -> " + out.result.as_int().str() + ", head " + short_hex(out.new_head));
  }

  interp::Value final_count = rig.client.read(handle, "get");
  expect(final_count == interp::Value::integer(10), "final read is 10");
  t.line("read get -> " + final_count.as_int().str() + " (no ledger entry)");

  std::vector<CclEntry> chain = rig.ledger.chain(handle.contract_id);
  expect(chain.size() == 11, "chain has init plus 10 updates");
  t.line("ledger chain has " + std::to_string(chain.size()) + " entries");
  return t.digest();
}

inline Digest tampering_es(const LogFn& log) {
  Transcript t(log);
  Rig rig;
  PdoHandle handle = rig.client.create_contract(rig.owner, samples::kCounter, 2);
  t.line("contract " + short_hex(handle.contract_id) + " created");

  rig.client.invoke(handle, "inc", {});
  Digest before = handle.head;
  t.line("honest inc committed, head " + short_hex(before));

  struct Attempt {
    EsMode mode;
    const char* label;
  };
  for (Attempt a : {Attempt{EsMode::tamper_state_input, "corrupts the input state"},
                    Attempt{EsMode::tamper_result_blob, "corrupts the result blob"},
                    Attempt{EsMode::tamper_update, "corrupts the signed update"},
                    Attempt{EsMode::drop_response, "drops the response"},
                    Attempt{EsMode::replay_response, "replays a stale response"}}) {
    rig.es.set_mode(a.mode);
    bool failed = false;
    std::string code = "none";
    try {
      rig.client.invoke(handle, "inc", {});
    } catch (const ClientError& e) {
      failed = true;
      code = std::string(client_error_name(e.code));
    }
    expect(failed, std::string("tampering detected when the service ") + a.label);
    auto head = rig.ledger.get_head(handle.contract_id);
    expect(head && *head == before, "head unchanged after tampering");
    t.line(std::string("service ") + a.label + " -> rejected (" + code + "), head unchanged");
  }

  rig.es.set_mode(EsMode::honest);
  InvokeOutcome out = rig.client.invoke(handle, "inc", {});
  expect(out.result == interp::Value::integer(2), "counter resumes at 2");
  t.line("service honest again, inc -> 2, head " + short_hex(out.new_head));
  return t.digest();
}

inline Digest equivocation_revocation(const LogFn& log) {
  Transcript t(log);
  Rig rig;
  PdoHandle handle = rig.client.create_contract(rig.owner, samples::kCounter, 3);
  t.line("contract " + short_hex(handle.contract_id) + " created with 3 provisioned enclaves");

  rig.client.invoke(handle, "inc", {});
  t.line("honest inc committed");

  ContractRecord record = *rig.ledger.get_contract(handle.contract_id);
  Digest victim = record.enclaves[0].enclave_id;
  rig.es.compromise_enclave(victim);
  t.line("enclave " + short_hex(victim) + " is now compromised");

  ReplicatedOutcome out = rig.client.replicated_invoke(handle, "inc", {}, {}, 3);
  expect(out.committed, "majority still commits");
  expect(out.agreeing == 2 && out.total == 3, "2 of 3 replicas agree");
  expect(out.dissenters.size() == 1 && out.dissenters[0] == victim,
         "the compromised enclave is the dissenter");
  expect(!out.evidence.empty(), "re-probing produced contradiction evidence");
  t.line("replicated inc: 2/3 agree, committed head " + short_hex(out.new_head));
  t.line("dissenter " + short_hex(out.dissenters[0]) + " contradicted itself, evidence captured");

  SubmitResult sr = rig.client.submit_evidence(out.evidence[0]);
  expect(sr.accepted, "validator accepts the evidence");
  expect(rig.ledger.get_enclave(victim)->revoked, "enclave revoked on the ledger");
  t.line("evidence submitted, enclave " + short_hex(victim) + " revoked");

  InvokeOutcome after = rig.client.invoke(handle, "inc", {});
  t.line("next inc routes around the revoked enclave -> " + after.result.as_int().str());

  bool refused = false;
  try {
    rig.client.replicated_invoke(handle, "inc", {}, {}, 3);
  } catch (const ClientError& e) {
    refused = e.code == ClientError::Code::not_found;
  }
  expect(refused, "only 2 trustworthy enclaves remain for 3-way replication");
  t.line("3-way replication now refused: only 2 trustworthy enclaves remain");
  return t.digest();
}

inline Digest escrow_dependency(const LogFn& log) {
  Transcript t(log);
  Rig rig;

  PdoHandle token = rig.client.create_contract(rig.owner, samples::kEscrow, 2, "init",
                                               {interp::Value::str("alice")});
  t.line("escrow token " + short_hex(token.contract_id) + " created, owner alice");

  PdoHandle book = rig.client.create_contract(rig.owner, samples::kCounter, 2);
  t.line("settlement book " + short_hex(book.contract_id) + " created");

  InvokeOutcome escrowed =
      rig.client.invoke(token, "escrow", {interp::Value::str("carol")});
  expect(escrowed.result == interp::Value::str("escrowed"), "token enters escrow");
  t.line("token escrowed with agent carol, head " + short_hex(token.head));

  InvokeOutcome moved = rig.client.invoke(token, "transfer", {interp::Value::str("bob")});
  expect(moved.result == interp::Value::str("owner:bob"), "agent transfers to bob");
  t.line("agent transfers token to bob, head " + short_hex(token.head));

  // The settlement is only valid against the committed transfer: it carries
  // a dependency on the token contract at its post-transfer state.
  std::vector<Dependency> deps{{token.contract_id, token.head}};
  InvokeOutcome settled = rig.client.invoke(book, "inc", {}, deps);
  t.line("settlement committed against the transferred token, head " +
         short_hex(settled.new_head));

  CclEntry entry = *rig.ledger.get_entry(book.contract_id, settled.new_head);
  expect(entry.update.dependencies.size() == 1 &&
             entry.update.dependencies[0].state_hash == token.head,
         "committed entry records the cross-contract dependency");
  t.line("ledger entry records dependency on " + short_hex(token.contract_id) + " @ " +
         short_hex(token.head));

  bool rejected = false;
  try {
    rig.client.invoke(book, "inc", {}, {{token.contract_id, crypto::hash("never happened")}});
  } catch (const ClientError& e) {
    rejected = e.code == ClientError::Code::ledger_rejected;
  }
  expect(rejected, "a settlement against a state that never existed is rejected");
  t.line("settlement against a fabricated token state -> rejected");

  interp::Value holder = rig.client.read(token, "holder");
  expect(holder == interp::Value::str("bob"), "bob holds the token");
  t.line("token holder is bob");
  return t.digest();
}

}  // namespace detail

/// Runs one scenario under a deterministic randomness source. Returns the
/// transcript digest: equal seeds give equal digests.
inline Digest run(std::string_view name, uint64_t seed, const LogFn& log = {}) {
  SeededRandom rng(seed);
  ScopedRandomSource scope(rng);
  if (name == "counter-happy-path") return detail::counter_happy_path(log);
  if (name == "tampering-es") return detail::tampering_es(log);
  if (name == "equivocation-revocation") return detail::equivocation_revocation(log);
  if (name == "escrow-dependency") return detail::escrow_dependency(log);
  throw ScenarioError("unknown scenario: " + std::string(name));
}

}  // namespace pdo::scenario
