// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// JSON representations for everything that crosses a process boundary:
// HTTP request and response bodies, and files the command line tool persists.
// Binary material travels as lowercase hex. Decoding is strict; anything
// missing, mistyped or malformed raises WireError rather than defaulting.
//
// These are transport encodings only. Signatures and transaction ids are
// always computed over the canonical binary encoding, never over JSON.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdo/attestation.hpp"
#include "pdo/bytes.hpp"
#include "pdo/client.hpp"
#include "pdo/crypto.hpp"
#include "pdo/enclave.hpp"
#include "pdo/enclave_service.hpp"
#include "pdo/interpreter.hpp"
#include "pdo/ledger.hpp"
#include "pdo/provisioning.hpp"
#include "pdo/records.hpp"

namespace pdo::wire {

using json = nlohmann::json;

struct WireError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Strict field access

inline const json& member(const json& j, const char* key) {
  if (!j.is_object()) throw WireError(std::string("expected an object with '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw WireError(std::string("missing field '") + key + "'");
  return *it;
}

inline std::string take_string(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_string()) throw WireError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline bool take_bool(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_boolean()) throw WireError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

inline const json& take_array(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_array()) throw WireError(std::string("field '") + key + "' must be an array");
  return v;
}

inline Bytes take_hex(const json& j, const char* key) {
  try {
    return hex_decode(take_string(j, key));
  } catch (const HexError& e) {
    throw WireError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T take_fixed(const json& j, const char* key) {
  try {
    return T::from_hex(take_string(j, key));
  } catch (const HexError& e) {
    throw WireError(std::string("field '") + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Interpreter values. Tagged form round-trips every value a contract can
// produce, including arbitrarily large integers and symbols:
//   {"t":"i","v":"42"} {"t":"b","v":true} {"t":"s","v":"text"}
//   {"t":"y","v":"sym"} {"t":"l","v":[...]} {"t":"a","v":[["k",...],...]}

inline json value_to_json(const interp::Value& val) {
  if (val.is_int()) return json{{"t", "i"}, {"v", val.as_int().str()}};
  if (val.is_bool()) return json{{"t", "b"}, {"v", val.as_bool()}};
  if (val.is_string()) return json{{"t", "s"}, {"v", val.as_string()}};
  if (val.is_symbol()) return json{{"t", "y"}, {"v", val.as_symbol().name}};
  if (val.is_list()) {
    json items = json::array();
    for (const interp::Value& item : val.as_list()) items.push_back(value_to_json(item));
    return json{{"t", "l"}, {"v", std::move(items)}};
  }
  if (val.is_assoc()) {
    json items = json::array();
    for (const auto& e : val.as_assoc().entries()) {
      items.push_back(json::array({e.key, value_to_json(e.value)}));
    }
    return json{{"t", "a"}, {"v", std::move(items)}};
  }
  throw WireError("value cannot be represented on the wire");
}

inline interp::Value value_from_json(const json& j) {
  std::string tag = take_string(j, "t");
  const json& v = member(j, "v");
  if (tag == "i") {
    if (!v.is_string()) throw WireError("integer value must be a decimal string");
    std::string text = v.get<std::string>();
    if (!interp::is_canonical_int_text(text)) {
      throw WireError("non-canonical integer literal: " + text);
    }
    return interp::Value::integer(interp::Int(text));
  }
  if (tag == "b") {
    if (!v.is_boolean()) throw WireError("boolean value must be a JSON boolean");
    return interp::Value::boolean(v.get<bool>());
  }
  if (tag == "s") {
    if (!v.is_string()) throw WireError("string value must be a JSON string");
    return interp::Value::str(v.get<std::string>());
  }
  if (tag == "y") {
    if (!v.is_string()) throw WireError("symbol value must be a JSON string");
    return interp::Value::symbol(v.get<std::string>());
  }
  if (tag == "l") {
    if (!v.is_array()) throw WireError("list value must be a JSON array");
    interp::List items;
    for (const json& item : v) items.push_back(value_from_json(item));
    return interp::Value::list(std::move(items));
  }
  if (tag == "a") {
    if (!v.is_array()) throw WireError("assoc value must be a JSON array of pairs");
    interp::Assoc a;
    for (const json& pair : v) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string()) {
        throw WireError("assoc entry must be [key, value]");
      }
      std::string key = pair[0].get<std::string>();
      if (a.has(key)) throw WireError("duplicate assoc key: " + key);
      a = a.set(std::move(key), value_from_json(pair[1]));
    }
    return interp::Value::assoc(std::move(a));
  }
  throw WireError("unknown value tag: " + tag);
}

/// Plain JSON to value, for human-written method arguments: numbers (64-bit
/// integers only), strings, booleans, arrays and objects. Symbols and larger
/// integers need the tagged form, which is accepted anywhere a plain value
/// is, recognized by the {"t","v"} shape.
inline interp::Value value_from_plain_json(const json& j) {
  if (j.is_object() && j.size() == 2 && j.contains("t") && j.contains("v")) {
    return value_from_json(j);
  }
  if (j.is_number_integer()) {
    return interp::Value::integer(interp::Int(j.get<int64_t>()));
  }
  if (j.is_number_unsigned()) {
    return interp::Value::integer(interp::Int(j.get<uint64_t>()));
  }
  if (j.is_number()) throw WireError("non-integer numbers are not contract values");
  if (j.is_boolean()) return interp::Value::boolean(j.get<bool>());
  if (j.is_string()) return interp::Value::str(j.get<std::string>());
  if (j.is_array()) {
    interp::List items;
    for (const json& item : j) items.push_back(value_from_plain_json(item));
    return interp::Value::list(std::move(items));
  }
  if (j.is_object()) {
    interp::Assoc a;
    for (const auto& [key, val] : j.items()) a = a.set(key, value_from_plain_json(val));
    return interp::Value::assoc(std::move(a));
  }
  throw WireError("JSON null is not a contract value");
}

// ---------------------------------------------------------------------------
// Attestation records

inline json quote_to_json(const Quote& q) {
  return json{{"measurement", q.measurement.hex()}, {"report_data", q.report_data.hex()}};
}

inline Quote quote_from_json(const json& j) {
  Quote q;
  q.measurement = take_fixed<Digest>(j, "measurement");
  q.report_data = take_fixed<Digest>(j, "report_data");
  return q;
}

inline json report_to_json(const VerificationReport& r) {
  return json{{"quote", quote_to_json(r.quote)},
              {"verdict", r.verdict == AttestationVerdict::ok ? "ok" : "failed"},
              {"nonce", r.nonce.hex()},
              {"sig", r.sig.hex()}};
}

inline VerificationReport report_from_json(const json& j) {
  VerificationReport r;
  r.quote = quote_from_json(member(j, "quote"));
  std::string verdict = take_string(j, "verdict");
  if (verdict == "ok") {
    r.verdict = AttestationVerdict::ok;
  } else if (verdict == "failed") {
    r.verdict = AttestationVerdict::failed;
  } else {
    throw WireError("unknown verdict: " + verdict);
  }
  r.nonce = take_fixed<Nonce16>(j, "nonce");
  r.sig = take_fixed<Signature>(j, "sig");
  return r;
}

// ---------------------------------------------------------------------------
// Protocol records

inline json dependency_to_json(const Dependency& d) {
  return json{{"contract_id", d.contract_id.hex()}, {"state_hash", d.state_hash.hex()}};
}

inline Dependency dependency_from_json(const json& j) {
  return Dependency{take_fixed<Digest>(j, "contract_id"), take_fixed<Digest>(j, "state_hash")};
}

inline json state_update_to_json(const StateUpdate& u) {
  json deps = json::array();
  for (const Dependency& d : u.dependencies) deps.push_back(dependency_to_json(d));
  return json{{"contract_id", u.contract_id.hex()},
              {"prev_state_hash", u.prev_state_hash.hex()},
              {"new_state_hash", u.new_state_hash.hex()},
              {"message_hash", u.message_hash.hex()},
              {"dependencies", std::move(deps)},
              {"channel_pub", u.channel_pub.hex()},
              {"enclave_sig", u.enclave_sig.hex()}};
}

inline StateUpdate state_update_from_json(const json& j) {
  StateUpdate u;
  u.contract_id = take_fixed<Digest>(j, "contract_id");
  u.prev_state_hash = take_fixed<Digest>(j, "prev_state_hash");
  u.new_state_hash = take_fixed<Digest>(j, "new_state_hash");
  u.message_hash = take_fixed<Digest>(j, "message_hash");
  for (const json& d : take_array(j, "dependencies")) {
    u.dependencies.push_back(dependency_from_json(d));
  }
  u.channel_pub = take_fixed<VerificationKey>(j, "channel_pub");
  u.enclave_sig = take_fixed<Signature>(j, "enclave_sig");
  return u;
}

inline json ccl_entry_to_json(const CclEntry& e) {
  return json{{"update", state_update_to_json(e.update)},
              {"enclave_id", e.enclave_id.hex()},
              {"channel_sig", e.channel_sig.hex()}};
}

inline CclEntry ccl_entry_from_json(const json& j) {
  CclEntry e;
  e.update = state_update_from_json(member(j, "update"));
  e.enclave_id = take_fixed<Digest>(j, "enclave_id");
  e.channel_sig = take_fixed<Signature>(j, "channel_sig");
  return e;
}

inline json secret_bundle_to_json(const SecretBundle& b) {
  return json{{"ps_id", b.ps_id.hex()},
              {"sealed_secret", hex_encode(b.sealed_secret)},
              {"ps_sig", b.ps_sig.hex()}};
}

inline SecretBundle secret_bundle_from_json(const json& j) {
  SecretBundle b;
  b.ps_id = take_fixed<VerificationKey>(j, "ps_id");
  b.sealed_secret = take_hex(j, "sealed_secret");
  b.ps_sig = take_fixed<Signature>(j, "ps_sig");
  return b;
}

inline json provisioned_enclave_to_json(const ProvisionedEnclave& p) {
  json bundles = json::array();
  for (const SecretBundle& b : p.sealed_secrets) bundles.push_back(secret_bundle_to_json(b));
  return json{{"enclave_id", p.enclave_id.hex()},
              {"sealed_secrets", std::move(bundles)},
              {"provisioning_proof", p.provisioning_proof.hex()}};
}

inline ProvisionedEnclave provisioned_enclave_from_json(const json& j) {
  ProvisionedEnclave p;
  p.enclave_id = take_fixed<Digest>(j, "enclave_id");
  for (const json& b : take_array(j, "sealed_secrets")) {
    p.sealed_secrets.push_back(secret_bundle_from_json(b));
  }
  p.provisioning_proof = take_fixed<Signature>(j, "provisioning_proof");
  return p;
}

inline json key_list_to_json(const std::vector<VerificationKey>& keys) {
  json out = json::array();
  for (const VerificationKey& k : keys) out.push_back(k.hex());
  return out;
}

inline std::vector<VerificationKey> key_list_from_json(const json& j, const char* key) {
  std::vector<VerificationKey> out;
  for (const json& item : take_array(j, key)) {
    if (!item.is_string()) throw WireError(std::string("field '") + key + "' must hold hex keys");
    try {
      out.push_back(VerificationKey::from_hex(item.get<std::string>()));
    } catch (const HexError& e) {
      throw WireError(std::string("field '") + key + "': " + e.what());
    }
  }
  return out;
}

inline json enclave_record_to_json(const EnclaveRecord& r) {
  return json{{"enclave_id", r.enclave_id.hex()},   {"verif_pub", r.verif_pub.hex()},
              {"enc_pub", r.enc_pub.hex()},         {"owner_pub", r.owner_pub.hex()},
              {"report", report_to_json(r.report)}, {"revoked", r.revoked}};
}

inline EnclaveRecord enclave_record_from_json(const json& j) {
  EnclaveRecord r;
  r.enclave_id = take_fixed<Digest>(j, "enclave_id");
  r.verif_pub = take_fixed<VerificationKey>(j, "verif_pub");
  r.enc_pub = take_fixed<EncryptionPublicKey>(j, "enc_pub");
  r.owner_pub = take_fixed<VerificationKey>(j, "owner_pub");
  r.report = report_from_json(member(j, "report"));
  r.revoked = take_bool(j, "revoked");
  return r;
}

inline json contract_record_to_json(const ContractRecord& r) {
  json enclaves = json::array();
  for (const ProvisionedEnclave& p : r.enclaves) enclaves.push_back(provisioned_enclave_to_json(p));
  return json{{"contract_id", r.contract_id.hex()},
              {"code_hash", r.code_hash.hex()},
              {"owner_pub", r.owner_pub.hex()},
              {"ps_list", key_list_to_json(r.ps_list)},
              {"enclaves", std::move(enclaves)},
              {"revoked", r.revoked}};
}

inline ContractRecord contract_record_from_json(const json& j) {
  ContractRecord r;
  r.contract_id = take_fixed<Digest>(j, "contract_id");
  r.code_hash = take_fixed<Digest>(j, "code_hash");
  r.owner_pub = take_fixed<VerificationKey>(j, "owner_pub");
  r.ps_list = key_list_from_json(j, "ps_list");
  for (const json& p : take_array(j, "enclaves")) {
    r.enclaves.push_back(provisioned_enclave_from_json(p));
  }
  r.revoked = take_bool(j, "revoked");
  return r;
}

inline json genesis_to_json(const GenesisConfig& g) {
  return json{{"attestation_root_pub", g.attestation_root_pub.hex()},
              {"expected_measurement", g.expected_measurement.hex()}};
}

inline GenesisConfig genesis_from_json(const json& j) {
  GenesisConfig g;
  g.attestation_root_pub = take_fixed<VerificationKey>(j, "attestation_root_pub");
  g.expected_measurement = take_fixed<Digest>(j, "expected_measurement");
  return g;
}

inline json descriptor_to_json(const ContractDescriptor& d) {
  return json{{"contract_id", d.contract_id.hex()},
              {"code_hash", d.code_hash.hex()},
              {"owner_pub", d.owner_pub.hex()},
              {"nonce", d.nonce.hex()},
              {"ps_list", key_list_to_json(d.ps_list)}};
}

inline ContractDescriptor descriptor_from_json(const json& j) {
  ContractDescriptor d;
  d.contract_id = take_fixed<Digest>(j, "contract_id");
  d.code_hash = take_fixed<Digest>(j, "code_hash");
  d.owner_pub = take_fixed<VerificationKey>(j, "owner_pub");
  d.nonce = take_fixed<Nonce16>(j, "nonce");
  d.ps_list = key_list_from_json(j, "ps_list");
  return d;
}

// ---------------------------------------------------------------------------
// Service requests and results

inline json submit_result_to_json(const SubmitResult& r) {
  json j{{"accepted", r.accepted}, {"detail", r.detail}, {"txn_id", r.txn_id.hex()}};
  if (r.reason) j["reason"] = std::string(reject_name(*r.reason));
  return j;
}

inline SubmitResult submit_result_from_json(const json& j) {
  SubmitResult r;
  r.accepted = take_bool(j, "accepted");
  r.detail = take_string(j, "detail");
  r.txn_id = take_fixed<Digest>(j, "txn_id");
  if (j.contains("reason")) {
    auto reason = reject_from_name(take_string(j, "reason"));
    if (!reason) throw WireError("unknown reject reason");
    r.reason = *reason;
  }
  if (!r.accepted && !r.reason) throw WireError("rejected result must carry a reason");
  return r;
}

inline json invocation_message_to_json(const InvocationMessage& m) {
  json args = json::array();
  for (const interp::Value& a : m.args) args.push_back(value_to_json(a));
  return json{{"method", m.method}, {"args", std::move(args)}};
}

inline InvocationMessage invocation_message_from_json(const json& j) {
  InvocationMessage m;
  m.method = take_string(j, "method");
  for (const json& a : take_array(j, "args")) m.args.push_back(value_from_json(a));
  return m;
}

inline json invocation_request_to_json(const InvocationRequest& r) {
  json deps = json::array();
  for (const Dependency& d : r.dependencies) deps.push_back(dependency_to_json(d));
  return json{{"contract_id", r.contract_id.hex()},
              {"code", r.code},
              {"encrypted_state", hex_encode(r.encrypted_state)},
              {"message", invocation_message_to_json(r.message)},
              {"dependencies", std::move(deps)},
              {"channel_pub", r.channel_pub.hex()},
              {"channel_sig", r.channel_sig.hex()}};
}

inline InvocationRequest invocation_request_from_json(const json& j) {
  InvocationRequest r;
  r.contract_id = take_fixed<Digest>(j, "contract_id");
  r.code = take_string(j, "code");
  r.encrypted_state = take_hex(j, "encrypted_state");
  r.message = invocation_message_from_json(member(j, "message"));
  for (const json& d : take_array(j, "dependencies")) {
    r.dependencies.push_back(dependency_from_json(d));
  }
  r.channel_pub = take_fixed<VerificationKey>(j, "channel_pub");
  r.channel_sig = take_fixed<Signature>(j, "channel_sig");
  return r;
}

inline json invoke_output_to_json(const InvokeOutput& o) {
  return json{{"encrypted_new_state", hex_encode(o.encrypted_new_state)},
              {"result", value_to_json(o.result)},
              {"update", state_update_to_json(o.update)}};
}

inline InvokeOutput invoke_output_from_json(const json& j) {
  InvokeOutput o;
  o.encrypted_new_state = take_hex(j, "encrypted_new_state");
  o.result = value_from_json(member(j, "result"));
  o.update = state_update_from_json(member(j, "update"));
  return o;
}

inline json ps_result_to_json(const PsProvisionResult& r) {
  json j{{"ok", r.ok},
         {"sealed_secret", hex_encode(r.sealed_secret)},
         {"ps_sig", r.ps_sig.hex()},
         {"detail", r.detail}};
  if (r.refusal) j["refusal"] = std::string(ps_refusal_name(*r.refusal));
  return j;
}

inline PsProvisionResult ps_result_from_json(const json& j) {
  PsProvisionResult r;
  r.ok = take_bool(j, "ok");
  r.sealed_secret = take_hex(j, "sealed_secret");
  r.ps_sig = take_fixed<Signature>(j, "ps_sig");
  r.detail = take_string(j, "detail");
  if (j.contains("refusal")) {
    auto refusal = ps_refusal_from_name(take_string(j, "refusal"));
    if (!refusal) throw WireError("unknown refusal code");
    r.refusal = *refusal;
  }
  if (!r.ok && !r.refusal) throw WireError("refused result must carry a refusal code");
  return r;
}

inline json hosted_info_to_json(const HostedEnclaveInfo& i) {
  return json{{"enclave_id", i.enclave_id.hex()},
              {"verif_pub", i.verif_pub.hex()},
              {"enc_pub", i.enc_pub.hex()}};
}

inline HostedEnclaveInfo hosted_info_from_json(const json& j) {
  HostedEnclaveInfo i;
  i.enclave_id = take_fixed<Digest>(j, "enclave_id");
  i.verif_pub = take_fixed<VerificationKey>(j, "verif_pub");
  i.enc_pub = take_fixed<EncryptionPublicKey>(j, "enc_pub");
  return i;
}

inline json launch_outcome_to_json(const LaunchOutcome& o) {
  return json{{"enclave_id", o.enclave_id.hex()},
              {"registration", submit_result_to_json(o.registration)}};
}

inline LaunchOutcome launch_outcome_from_json(const json& j) {
  LaunchOutcome o;
  o.enclave_id = take_fixed<Digest>(j, "enclave_id");
  o.registration = submit_result_from_json(member(j, "registration"));
  return o;
}

// ---------------------------------------------------------------------------
// The contract handle, as persisted by the command line tool.

inline json handle_to_json(const PdoHandle& h) {
  return json{{"contract_id", h.contract_id.hex()},
              {"code", h.code},
              {"code_hash", h.code_hash.hex()},
              {"owner_pub", h.owner_pub.hex()},
              {"nonce", h.nonce.hex()},
              {"ps_list", key_list_to_json(h.ps_list)},
              {"head", h.head.hex()},
              {"state_blob", hex_encode(h.state_blob)}};
}

inline PdoHandle handle_from_json(const json& j) {
  PdoHandle h;
  h.contract_id = take_fixed<Digest>(j, "contract_id");
  h.code = take_string(j, "code");
  h.code_hash = take_fixed<Digest>(j, "code_hash");
  h.owner_pub = take_fixed<VerificationKey>(j, "owner_pub");
  h.nonce = take_fixed<Nonce16>(j, "nonce");
  h.ps_list = key_list_from_json(j, "ps_list");
  h.head = take_fixed<Digest>(j, "head");
  h.state_blob = take_hex(j, "state_blob");
  return h;
}

inline json parse_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw WireError("body is not valid JSON");
  return j;
}

}  // namespace pdo::wire
