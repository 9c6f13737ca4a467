// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Ledger-facing record and transaction types for the three transaction
// families (enclave-registry, contract-registry, ccl), their canonical
// encodings, and the exact byte strings each signature covers.
//
// Hygiene rules applied throughout:
//   - every signed payload carries an "op" tag, so no two message kinds can
//     collide byte-for-byte (domain separation)
//   - ps_list is kept strictly ascending; a duplicate or out-of-order list is
//     rejected at decode time, which removes order ambiguity from proofs
//   - a transaction's txn_id is the digest of its canonical envelope and is
//     recomputed on decode, so any byte flip in a stored transaction is
//     detected at parse time

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pdo/attestation.hpp"
#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/encoding.hpp"

namespace pdo {

/// Sentinel for "no previous state": the all-zero digest. Initialization
/// entries use it as prev_state_hash; no real blob hashes to it.
inline const Digest kEmptyState = Digest::zero();

enum class Family { enclave_registry, contract_registry, ccl };

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::enclave_registry: return "enclave-registry";
    case Family::contract_registry: return "contract-registry";
    case Family::ccl: return "ccl";
  }
  throw Error("invalid family");
}

inline Family family_from_name(std::string_view name) {
  if (name == "enclave-registry") return Family::enclave_registry;
  if (name == "contract-registry") return Family::contract_registry;
  if (name == "ccl") return Family::ccl;
  throw DecodeError("unknown transaction family");
}

// ---------------------------------------------------------------------------
// Identity derivations

inline Digest enclave_id_from(const VerificationKey& verif_pub) {
  return crypto::hash(verif_pub.view());
}

inline Digest contract_id_from(const Digest& code_hash, const VerificationKey& owner_pub,
                               const Nonce16& nonce) {
  return crypto::Sha256()
      .update(code_hash.view())
      .update(owner_pub.view())
      .update(nonce.view())
      .finish();
}

// ---------------------------------------------------------------------------
// Small shared pieces

struct Dependency {
  Digest contract_id;
  Digest state_hash;

  auto operator<=>(const Dependency&) const = default;
};

inline Bytes dependency_bytes(const Dependency& d) {
  return enc::Record()
      .put_bytes("contract_id", d.contract_id.view())
      .put_bytes("state_hash", d.state_hash.view())
      .encode();
}

inline std::vector<Bytes> dependency_list_bytes(const std::vector<Dependency>& deps) {
  std::vector<Bytes> out;
  out.reserve(deps.size());
  for (const Dependency& d : deps) out.push_back(dependency_bytes(d));
  return out;
}

inline Bytes report_bytes(const VerificationReport& r) {
  return enc::Record()
      .put_bytes("measurement", r.quote.measurement.view())
      .put_bytes("report_data", r.quote.report_data.view())
      .put_u64("verdict", r.verdict == AttestationVerdict::ok ? 1 : 0)
      .put_bytes("nonce", r.nonce.view())
      .put_bytes("sig", r.sig.view())
      .encode();
}

inline std::vector<Bytes> key_list_bytes(const std::vector<VerificationKey>& keys) {
  std::vector<Bytes> out;
  out.reserve(keys.size());
  for (const VerificationKey& k : keys) out.push_back(enc::v_bytes(k.view()));
  return out;
}

inline void check_sorted_key_list(const std::vector<VerificationKey>& keys,
                                  std::string_view what) {
  for (size_t i = 1; i < keys.size(); ++i) {
    if (!(keys[i - 1].bytes < keys[i].bytes)) {
      throw DecodeError(std::string(what) + " must be strictly ascending");
    }
  }
}

// ---------------------------------------------------------------------------
// State updates and CCL entries

/// The enclave-signed statement at the heart of the protocol: "running this
/// contract against prev produced new, in response to message_hash, assuming
/// these dependencies, for the channel key channel_pub".
struct StateUpdate {
  Digest contract_id;
  Digest prev_state_hash;
  Digest new_state_hash;
  Digest message_hash;
  std::vector<Dependency> dependencies;
  VerificationKey channel_pub;
  Signature enclave_sig;

  auto operator<=>(const StateUpdate&) const = default;
};

inline Bytes state_update_signing_bytes(const StateUpdate& u) {
  return enc::Record()
      .put_string("op", "state-update")
      .put_bytes("contract_id", u.contract_id.view())
      .put_bytes("prev_state_hash", u.prev_state_hash.view())
      .put_bytes("new_state_hash", u.new_state_hash.view())
      .put_bytes("message_hash", u.message_hash.view())
      .put_list("dependencies", dependency_list_bytes(u.dependencies))
      .put_bytes("channel_pub", u.channel_pub.view())
      .encode();
}

/// Full update including the enclave signature, as embedded in transactions.
inline Bytes state_update_bytes(const StateUpdate& u) {
  return enc::Record()
      .put_string("op", "state-update")
      .put_bytes("contract_id", u.contract_id.view())
      .put_bytes("prev_state_hash", u.prev_state_hash.view())
      .put_bytes("new_state_hash", u.new_state_hash.view())
      .put_bytes("message_hash", u.message_hash.view())
      .put_list("dependencies", dependency_list_bytes(u.dependencies))
      .put_bytes("channel_pub", u.channel_pub.view())
      .put_bytes("enclave_sig", u.enclave_sig.view())
      .encode();
}

struct CclEntry {
  StateUpdate update;
  Digest enclave_id;
  Signature channel_sig;

  auto operator<=>(const CclEntry&) const = default;
};

/// Bytes covered by the channel holder's signature: the complete entry minus
/// channel_sig itself. Only the creator of the channel key can produce this,
/// which is what gives the holder exclusive commit rights for the update.
inline Bytes ccl_channel_signing_bytes(const CclEntry& e) {
  return enc::Record()
      .put_string("op", "ccl-entry")
      .put_bytes("update", state_update_bytes(e.update))
      .put_bytes("enclave_id", e.enclave_id.view())
      .encode();
}

inline Bytes ccl_entry_bytes(const CclEntry& e) {
  return enc::Record()
      .put_string("op", "ccl-entry")
      .put_bytes("update", state_update_bytes(e.update))
      .put_bytes("enclave_id", e.enclave_id.view())
      .put_bytes("channel_sig", e.channel_sig.view())
      .encode();
}

// ---------------------------------------------------------------------------
// Provisioning records

struct SecretBundle {
  VerificationKey ps_id;
  Bytes sealed_secret;
  Signature ps_sig;

  auto operator<=>(const SecretBundle&) const = default;
};

/// Bytes signed by a provisioning service over the plaintext secret. This
/// signature travels inside the sealed blob and is checked by the enclave
/// after unsealing, proving the secret's origin end to end.
inline Bytes ps_secret_signing_bytes(const Digest& contract_id, const Digest& enclave_id,
                                     BytesView secret) {
  return enc::Record()
      .put_string("op", "ps-secret")
      .put_bytes("contract_id", contract_id.view())
      .put_bytes("enclave_id", enclave_id.view())
      .put_bytes("secret", secret)
      .encode();
}

/// Bytes signed by a provisioning service over the sealed blob. This is the
/// publicly checkable signature carried in the bundle; the validator verifies
/// it without ever seeing the plaintext secret.
inline Bytes ps_sealed_signing_bytes(const Digest& contract_id, const Digest& enclave_id,
                                     BytesView sealed_secret) {
  return enc::Record()
      .put_string("op", "ps-sealed-secret")
      .put_bytes("contract_id", contract_id.view())
      .put_bytes("enclave_id", enclave_id.view())
      .put_bytes("sealed_secret", sealed_secret)
      .encode();
}

inline Bytes secret_bundle_bytes(const SecretBundle& b) {
  return enc::Record()
      .put_bytes("ps_id", b.ps_id.view())
      .put_bytes("sealed_secret", b.sealed_secret)
      .put_bytes("ps_sig", b.ps_sig.view())
      .encode();
}

/// Digest of a bundle set, order-normalized by ps_id.
inline Digest bundles_hash(std::vector<SecretBundle> bundles) {
  std::sort(bundles.begin(), bundles.end(),
            [](const SecretBundle& a, const SecretBundle& b) { return a.ps_id < b.ps_id; });
  std::vector<Bytes> items;
  items.reserve(bundles.size());
  for (const SecretBundle& b : bundles) items.push_back(secret_bundle_bytes(b));
  return crypto::hash(enc::v_list(items));
}

inline Bytes provisioning_proof_signing_bytes(const Digest& contract_id,
                                              const std::vector<VerificationKey>& ps_list,
                                              const Digest& bundles_digest) {
  return enc::Record()
      .put_string("op", "provisioning-proof")
      .put_bytes("contract_id", contract_id.view())
      .put_list("ps_list", key_list_bytes(ps_list))
      .put_bytes("bundles_hash", bundles_digest.view())
      .encode();
}

struct ProvisionedEnclave {
  Digest enclave_id;
  std::vector<SecretBundle> sealed_secrets;
  Signature provisioning_proof;

  auto operator<=>(const ProvisionedEnclave&) const = default;
};

inline Bytes provisioned_enclave_bytes(const ProvisionedEnclave& p) {
  std::vector<Bytes> bundles;
  bundles.reserve(p.sealed_secrets.size());
  for (const SecretBundle& b : p.sealed_secrets) bundles.push_back(secret_bundle_bytes(b));
  return enc::Record()
      .put_bytes("enclave_id", p.enclave_id.view())
      .put_list("sealed_secrets", bundles)
      .put_bytes("provisioning_proof", p.provisioning_proof.view())
      .encode();
}

// ---------------------------------------------------------------------------
// Transaction payloads

struct EnclaveRegisterPayload {
  VerificationKey verif_pub;
  EncryptionPublicKey enc_pub;
  VerificationReport report;
};

struct EnclaveRevokePayload {
  Digest enclave_id;
};

/// Two signed updates from the same enclave that contradict each other.
struct EvidencePayload {
  Digest enclave_id;
  StateUpdate first;
  StateUpdate second;
};

struct ContractRegisterPayload {
  Digest code_hash;
  Nonce16 nonce;
  std::vector<VerificationKey> ps_list;  // strictly ascending
};

struct ContractRevokePayload {
  Digest contract_id;
};

struct AddEnclavePayload {
  Digest contract_id;
  ProvisionedEnclave enclave;
};

struct CclUpdatePayload {
  CclEntry entry;
};

using Payload = std::variant<EnclaveRegisterPayload, EnclaveRevokePayload, EvidencePayload,
                             ContractRegisterPayload, ContractRevokePayload, AddEnclavePayload,
                             CclUpdatePayload>;

inline Family family_of(const Payload& p) {
  if (std::holds_alternative<EnclaveRegisterPayload>(p) ||
      std::holds_alternative<EnclaveRevokePayload>(p) ||
      std::holds_alternative<EvidencePayload>(p)) {
    return Family::enclave_registry;
  }
  if (std::holds_alternative<ContractRegisterPayload>(p) ||
      std::holds_alternative<ContractRevokePayload>(p) ||
      std::holds_alternative<AddEnclavePayload>(p)) {
    return Family::contract_registry;
  }
  return Family::ccl;
}

inline Bytes payload_canonical(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> Bytes {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, EnclaveRegisterPayload>) {
          return enc::Record()
              .put_string("op", "enclave-register")
              .put_bytes("verif_pub", p.verif_pub.view())
              .put_bytes("enc_pub", p.enc_pub.view())
              .put_bytes("report", report_bytes(p.report))
              .encode();
        } else if constexpr (std::is_same_v<T, EnclaveRevokePayload>) {
          return enc::Record()
              .put_string("op", "enclave-revoke")
              .put_bytes("enclave_id", p.enclave_id.view())
              .encode();
        } else if constexpr (std::is_same_v<T, EvidencePayload>) {
          return enc::Record()
              .put_string("op", "evidence")
              .put_bytes("enclave_id", p.enclave_id.view())
              .put_bytes("first", state_update_bytes(p.first))
              .put_bytes("second", state_update_bytes(p.second))
              .encode();
        } else if constexpr (std::is_same_v<T, ContractRegisterPayload>) {
          return enc::Record()
              .put_string("op", "contract-register")
              .put_bytes("code_hash", p.code_hash.view())
              .put_bytes("nonce", p.nonce.view())
              .put_list("ps_list", key_list_bytes(p.ps_list))
              .encode();
        } else if constexpr (std::is_same_v<T, ContractRevokePayload>) {
          return enc::Record()
              .put_string("op", "contract-revoke")
              .put_bytes("contract_id", p.contract_id.view())
              .encode();
        } else if constexpr (std::is_same_v<T, AddEnclavePayload>) {
          return enc::Record()
              .put_string("op", "add-enclave")
              .put_bytes("contract_id", p.contract_id.view())
              .put_bytes("enclave", provisioned_enclave_bytes(p.enclave))
              .encode();
        } else {
          static_assert(std::is_same_v<T, CclUpdatePayload>);
          return enc::Record()
              .put_string("op", "ccl-update")
              .put_bytes("entry", ccl_entry_bytes(p.entry))
              .encode();
        }
      },
      payload);
}

// ---------------------------------------------------------------------------
// Payload decoding

namespace detail {

inline Digest take_digest(const enc::TValue& t) { return Digest::from_bytes(t.as_bytes()); }
inline Signature take_sig(const enc::TValue& t) { return Signature::from_bytes(t.as_bytes()); }
inline VerificationKey take_vkey(const enc::TValue& t) {
  return VerificationKey::from_bytes(t.as_bytes());
}
inline EncryptionPublicKey take_ekey(const enc::TValue& t) {
  return EncryptionPublicKey::from_bytes(t.as_bytes());
}
inline Nonce16 take_nonce(const enc::TValue& t) { return Nonce16::from_bytes(t.as_bytes()); }

inline void check_field_count(const enc::TValue& t, size_t n) {
  if (t.field_count() != n) throw DecodeError("unexpected record field count");
}

inline VerificationReport decode_report(BytesView data) {
  enc::TValue t = enc::parse(data);
  check_field_count(t, 5);
  VerificationReport r;
  r.quote.measurement = take_digest(t.field("measurement"));
  r.quote.report_data = take_digest(t.field("report_data"));
  uint64_t verdict = t.field("verdict").as_u64();
  if (verdict > 1) throw DecodeError("malformed verdict");
  r.verdict = verdict == 1 ? AttestationVerdict::ok : AttestationVerdict::failed;
  r.nonce = take_nonce(t.field("nonce"));
  r.sig = take_sig(t.field("sig"));
  return r;
}

inline std::vector<Dependency> decode_dependencies(const enc::TValue& t) {
  std::vector<Dependency> out;
  for (const enc::TValue& item : t.as_list()) {
    check_field_count(item, 2);
    Dependency d;
    d.contract_id = take_digest(item.field("contract_id"));
    d.state_hash = take_digest(item.field("state_hash"));
    out.push_back(d);
  }
  return out;
}

inline std::vector<VerificationKey> decode_key_list(const enc::TValue& t, std::string_view what) {
  std::vector<VerificationKey> out;
  for (const enc::TValue& item : t.as_list()) out.push_back(take_vkey(item));
  check_sorted_key_list(out, what);
  return out;
}

inline StateUpdate decode_state_update(BytesView data) {
  enc::TValue t = enc::parse(data);
  check_field_count(t, 8);
  if (t.field("op").as_string() != "state-update") throw DecodeError("expected state-update");
  StateUpdate u;
  u.contract_id = take_digest(t.field("contract_id"));
  u.prev_state_hash = take_digest(t.field("prev_state_hash"));
  u.new_state_hash = take_digest(t.field("new_state_hash"));
  u.message_hash = take_digest(t.field("message_hash"));
  u.dependencies = decode_dependencies(t.field("dependencies"));
  u.channel_pub = take_vkey(t.field("channel_pub"));
  u.enclave_sig = take_sig(t.field("enclave_sig"));
  return u;
}

inline CclEntry decode_ccl_entry(BytesView data) {
  enc::TValue t = enc::parse(data);
  check_field_count(t, 4);
  if (t.field("op").as_string() != "ccl-entry") throw DecodeError("expected ccl-entry");
  CclEntry e;
  e.update = decode_state_update(t.field("update").as_bytes());
  e.enclave_id = take_digest(t.field("enclave_id"));
  e.channel_sig = take_sig(t.field("channel_sig"));
  return e;
}

inline SecretBundle decode_secret_bundle(const enc::TValue& t) {
  check_field_count(t, 3);
  SecretBundle b;
  b.ps_id = take_vkey(t.field("ps_id"));
  b.sealed_secret = t.field("sealed_secret").as_bytes();
  b.ps_sig = take_sig(t.field("ps_sig"));
  return b;
}

inline ProvisionedEnclave decode_provisioned_enclave(BytesView data) {
  enc::TValue t = enc::parse(data);
  check_field_count(t, 3);
  ProvisionedEnclave p;
  p.enclave_id = take_digest(t.field("enclave_id"));
  for (const enc::TValue& item : t.field("sealed_secrets").as_list()) {
    p.sealed_secrets.push_back(decode_secret_bundle(item));
  }
  p.provisioning_proof = take_sig(t.field("provisioning_proof"));
  return p;
}

}  // namespace detail

inline Payload payload_decode(BytesView data) {
  enc::TValue t = enc::parse(data);
  const std::string& op = t.field("op").as_string();
  if (op == "enclave-register") {
    detail::check_field_count(t, 4);
    EnclaveRegisterPayload p;
    p.verif_pub = detail::take_vkey(t.field("verif_pub"));
    p.enc_pub = detail::take_ekey(t.field("enc_pub"));
    p.report = detail::decode_report(t.field("report").as_bytes());
    return p;
  }
  if (op == "enclave-revoke") {
    detail::check_field_count(t, 2);
    return EnclaveRevokePayload{detail::take_digest(t.field("enclave_id"))};
  }
  if (op == "evidence") {
    detail::check_field_count(t, 4);
    EvidencePayload p;
    p.enclave_id = detail::take_digest(t.field("enclave_id"));
    p.first = detail::decode_state_update(t.field("first").as_bytes());
    p.second = detail::decode_state_update(t.field("second").as_bytes());
    return p;
  }
  if (op == "contract-register") {
    detail::check_field_count(t, 4);
    ContractRegisterPayload p;
    p.code_hash = detail::take_digest(t.field("code_hash"));
    p.nonce = detail::take_nonce(t.field("nonce"));
    p.ps_list = detail::decode_key_list(t.field("ps_list"), "ps_list");
    return p;
  }
  if (op == "contract-revoke") {
    detail::check_field_count(t, 2);
    return ContractRevokePayload{detail::take_digest(t.field("contract_id"))};
  }
  if (op == "add-enclave") {
    detail::check_field_count(t, 3);
    AddEnclavePayload p;
    p.contract_id = detail::take_digest(t.field("contract_id"));
    p.enclave = detail::decode_provisioned_enclave(t.field("enclave").as_bytes());
    return p;
  }
  if (op == "ccl-update") {
    detail::check_field_count(t, 2);
    return CclUpdatePayload{detail::decode_ccl_entry(t.field("entry").as_bytes())};
  }
  throw DecodeError("unknown payload op: " + op);
}

// ---------------------------------------------------------------------------
// Transactions

struct Transaction {
  Payload payload;
  Bytes payload_bytes;  // canonical encoding of payload; the signed bytes
  VerificationKey submitter_pub;
  Signature submitter_sig;
  Digest txn_id;
};

inline Bytes transaction_envelope_bytes(Family family, BytesView payload_bytes,
                                        const VerificationKey& submitter_pub,
                                        const Signature& submitter_sig) {
  return enc::Record()
      .put_string("family", family_name(family))
      .put_bytes("payload", payload_bytes)
      .put_bytes("submitter_pub", submitter_pub.view())
      .put_bytes("submitter_sig", submitter_sig.view())
      .encode();
}

inline Transaction make_transaction(Payload payload, const crypto::SigningKeyPair& submitter) {
  Transaction txn;
  txn.payload = std::move(payload);
  txn.payload_bytes = payload_canonical(txn.payload);
  txn.submitter_pub = submitter.pub;
  txn.submitter_sig = crypto::sign(submitter, txn.payload_bytes);
  txn.txn_id = crypto::hash(transaction_envelope_bytes(
      family_of(txn.payload), txn.payload_bytes, txn.submitter_pub, txn.submitter_sig));
  return txn;
}

/// Serialized form, as written to the transaction log: envelope plus txn_id.
inline Bytes transaction_bytes(const Transaction& txn) {
  return enc::Record()
      .put_string("family", family_name(family_of(txn.payload)))
      .put_bytes("payload", txn.payload_bytes)
      .put_bytes("submitter_pub", txn.submitter_pub.view())
      .put_bytes("submitter_sig", txn.submitter_sig.view())
      .put_bytes("txn_id", txn.txn_id.view())
      .encode();
}

/// Parses a serialized transaction. The declared family must match the
/// payload and the stored txn_id must equal the recomputed envelope digest;
/// any single-byte difference from what transaction_bytes produced fails one
/// of these checks or the canonical parse itself.
inline Transaction transaction_decode(BytesView data) {
  enc::TValue t = enc::parse(data);
  detail::check_field_count(t, 5);
  Transaction txn;
  Family declared = family_from_name(t.field("family").as_string());
  txn.payload_bytes = t.field("payload").as_bytes();
  txn.payload = payload_decode(txn.payload_bytes);
  if (family_of(txn.payload) != declared) {
    throw DecodeError("transaction family does not match payload");
  }
  txn.submitter_pub = detail::take_vkey(t.field("submitter_pub"));
  txn.submitter_sig = detail::take_sig(t.field("submitter_sig"));
  txn.txn_id = detail::take_digest(t.field("txn_id"));
  Digest expect = crypto::hash(transaction_envelope_bytes(declared, txn.payload_bytes,
                                                          txn.submitter_pub, txn.submitter_sig));
  if (txn.txn_id != expect) throw DecodeError("txn_id does not match envelope digest");
  return txn;
}

// ---------------------------------------------------------------------------
// Ledger records

struct EnclaveRecord {
  Digest enclave_id;
  VerificationKey verif_pub;
  EncryptionPublicKey enc_pub;
  VerificationKey owner_pub;
  VerificationReport report;
  bool revoked = false;
};

inline Bytes enclave_record_bytes(const EnclaveRecord& r) {
  return enc::Record()
      .put_bytes("enclave_id", r.enclave_id.view())
      .put_bytes("verif_pub", r.verif_pub.view())
      .put_bytes("enc_pub", r.enc_pub.view())
      .put_bytes("owner_pub", r.owner_pub.view())
      .put_bytes("report", report_bytes(r.report))
      .put_u64("revoked", r.revoked ? 1 : 0)
      .encode();
}

struct ContractRecord {
  Digest contract_id;
  Digest code_hash;
  VerificationKey owner_pub;
  std::vector<VerificationKey> ps_list;  // strictly ascending
  std::vector<ProvisionedEnclave> enclaves;
  bool revoked = false;

  const ProvisionedEnclave* find_enclave(const Digest& enclave_id) const {
    for (const ProvisionedEnclave& p : enclaves) {
      if (p.enclave_id == enclave_id) return &p;
    }
    return nullptr;
  }
};

inline Bytes contract_record_bytes(const ContractRecord& r) {
  std::vector<Bytes> enclaves;
  enclaves.reserve(r.enclaves.size());
  for (const ProvisionedEnclave& p : r.enclaves) enclaves.push_back(provisioned_enclave_bytes(p));
  return enc::Record()
      .put_bytes("contract_id", r.contract_id.view())
      .put_bytes("code_hash", r.code_hash.view())
      .put_bytes("owner_pub", r.owner_pub.view())
      .put_list("ps_list", key_list_bytes(r.ps_list))
      .put_list("enclaves", enclaves)
      .put_u64("revoked", r.revoked ? 1 : 0)
      .encode();
}

/// What the validator is configured with at startup.
struct GenesisConfig {
  VerificationKey attestation_root_pub;
  Digest expected_measurement;
};

/// Contract identity data a client hands to enclaves and provisioning
/// services; enough to re-derive and therefore verify the contract_id.
struct ContractDescriptor {
  Digest contract_id;
  Digest code_hash;
  VerificationKey owner_pub;
  Nonce16 nonce;
  std::vector<VerificationKey> ps_list;  // strictly ascending
};

}  // namespace pdo
