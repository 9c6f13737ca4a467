// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Simulated contract enclave. The class boundary stands in for the hardware
// trust boundary: everything private lives in members (identity keys, the
// per-contract state keys) and only attested, signed artifacts leave through
// the public interface. Identity keys can be sealed to a platform key and
// restored later; losing the sealed blob (or the platform key) permanently
// retires that enclave identity, exactly like losing hardware-sealed storage.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pdo/attestation.hpp"
#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/encoding.hpp"
#include "pdo/interpreter.hpp"
#include "pdo/records.hpp"

namespace pdo {

struct EnclaveError : Error {
  enum class Code {
    not_provisioned,
    tampered_state,
    execution_failed,
    bad_request,
    provisioning_failed,
    unseal_failed,
  };
  Code code;
  EnclaveError(Code c, const std::string& msg) : Error(msg), code(c) {}
};

// ---------------------------------------------------------------------------
// Invocation messages and requests

struct InvocationMessage {
  std::string method;
  interp::List args;
};

/// Canonical bytes of a method invocation as the contract sees it. The
/// channel public key is folded in, so the same (method, args) sent by two
/// different channels hashes differently: an enclave answering both can never
/// be framed as equivocating, and caller-sensitive contracts stay sound.
inline Bytes invocation_message_bytes(const InvocationMessage& msg,
                                      const VerificationKey& channel_pub) {
  std::vector<Bytes> args;
  args.reserve(msg.args.size());
  for (const interp::Value& a : msg.args) args.push_back(interp::encode_value(a));
  return enc::Record()
      .put_string("op", "invocation-message")
      .put_string("method", msg.method)
      .put_list("args", args)
      .put_bytes("channel_pub", channel_pub.view())
      .encode();
}

struct InvocationRequest {
  Digest contract_id;
  std::string code;
  Bytes encrypted_state;  // empty for the initialization call
  InvocationMessage message;
  std::vector<Dependency> dependencies;
  VerificationKey channel_pub;
  Signature channel_sig;
};

/// Bytes covered by the request's channel signature: they pin the contract,
/// the exact code, the exact input state blob, the message and the declared
/// dependencies to this channel key.
inline Bytes invocation_request_signing_bytes(const Digest& contract_id, const Digest& code_hash,
                                              const Digest& state_hash, const Digest& message_hash,
                                              const std::vector<Dependency>& deps,
                                              const VerificationKey& channel_pub) {
  return enc::Record()
      .put_string("op", "invocation-request")
      .put_bytes("contract_id", contract_id.view())
      .put_bytes("code_hash", code_hash.view())
      .put_bytes("state_hash", state_hash.view())
      .put_bytes("message_hash", message_hash.view())
      .put_list("dependencies", dependency_list_bytes(deps))
      .put_bytes("channel_pub", channel_pub.view())
      .encode();
}

struct InvokeOutput {
  Bytes encrypted_new_state;
  interp::Value result;
  StateUpdate update;
};

/// Identity keys sealed under a platform key for at-rest storage.
struct SealedKeys {
  Bytes blob;
};

// ---------------------------------------------------------------------------

struct EnclaveOptions {
  uint64_t step_budget = 1'000'000;
  /// Overrides the reported measurement; models a build that does not match
  /// what validators expect.
  std::optional<Digest> measurement;
};

class ContractEnclave {
 public:
  using Options = EnclaveOptions;

  static std::unique_ptr<ContractEnclave> create(const SymmetricKey& platform_key,
                                                 Options options = {}) {
    auto enclave = std::unique_ptr<ContractEnclave>(new ContractEnclave());
    enclave->platform_key_ = platform_key;
    enclave->options_ = options;
    enclave->verif_ = crypto::SigningKeyPair::generate();
    enclave->enc_ = crypto::EncryptionKeyPair::generate();
    enclave->enclave_id_ = enclave_id_from(enclave->verif_.pub);
    return enclave;
  }

  /// Restores an enclave from its sealed identity. Provisioned contract keys
  /// are not sealed; they must be re-provisioned after a restart.
  static std::unique_ptr<ContractEnclave> restore(const SymmetricKey& platform_key,
                                                  const SealedKeys& sealed,
                                                  Options options = {}) {
    Bytes plain;
    try {
      plain = crypto::decrypt_state(platform_key, sealed.blob, to_bytes(kSealAad));
    } catch (const AuthenticationError&) {
      throw EnclaveError(EnclaveError::Code::unseal_failed,
                         "sealed identity does not authenticate under this platform key");
    }
    enc::TValue t = enc::parse(plain);
    std::array<uint8_t, 32> vseed{};
    std::array<uint8_t, 32> esecret{};
    const Bytes& vb = t.field("verif_seed").as_bytes();
    const Bytes& eb = t.field("enc_secret").as_bytes();
    if (vb.size() != 32 || eb.size() != 32) {
      throw EnclaveError(EnclaveError::Code::unseal_failed, "sealed identity malformed");
    }
    std::copy(vb.begin(), vb.end(), vseed.begin());
    std::copy(eb.begin(), eb.end(), esecret.begin());

    auto enclave = std::unique_ptr<ContractEnclave>(new ContractEnclave());
    enclave->platform_key_ = platform_key;
    enclave->options_ = options;
    enclave->verif_ = crypto::SigningKeyPair::from_seed(vseed);
    enclave->enc_ = crypto::EncryptionKeyPair::from_secret(esecret);
    enclave->enclave_id_ = enclave_id_from(enclave->verif_.pub);
    return enclave;
  }

  SealedKeys seal_keys() const {
    Bytes plain = enc::Record()
                      .put_bytes("verif_seed", BytesView(verif_.seed()))
                      .put_bytes("enc_secret", BytesView(enc_.secret))
                      .encode();
    return SealedKeys{crypto::encrypt_state(platform_key_, plain, to_bytes(kSealAad))};
  }

  const Digest& enclave_id() const { return enclave_id_; }
  const VerificationKey& verif_pub() const { return verif_.pub; }
  const EncryptionPublicKey& enc_pub() const { return enc_.pub; }

  Quote quote() const {
    Quote q;
    q.measurement = options_.measurement ? *options_.measurement : current_measurement();
    q.report_data = quote_report_data(verif_.pub, enc_.pub);
    return q;
  }

  bool is_provisioned(const Digest& contract_id) const {
    std::lock_guard lock(mu_);
    return keystore_.count(contract_id) > 0;
  }

  /// Installs the state key for one contract from the provisioning bundles.
  /// All-or-nothing: any failed check leaves the enclave without a key for
  /// this contract. Returns the proof of provisioning signature.
  Signature accept_provisioning(const ContractDescriptor& contract,
                                const std::vector<SecretBundle>& bundles) {
    if (contract.contract_id !=
        contract_id_from(contract.code_hash, contract.owner_pub, contract.nonce)) {
      throw EnclaveError(EnclaveError::Code::provisioning_failed,
                         "contract_id does not match its derivation");
    }
    try {
      check_sorted_key_list(contract.ps_list, "ps_list");
    } catch (const DecodeError& e) {
      throw EnclaveError(EnclaveError::Code::provisioning_failed, e.what());
    }
    if (contract.ps_list.empty()) {
      throw EnclaveError(EnclaveError::Code::provisioning_failed, "ps_list is empty");
    }
    if (bundles.size() != contract.ps_list.size()) {
      throw EnclaveError(EnclaveError::Code::provisioning_failed,
                         "bundle count does not match ps_list");
    }
    std::vector<crypto::Secret> secrets;
    std::set<VerificationKey> seen;
    for (const SecretBundle& b : bundles) {
      if (std::find(contract.ps_list.begin(), contract.ps_list.end(), b.ps_id) ==
          contract.ps_list.end()) {
        throw EnclaveError(EnclaveError::Code::provisioning_failed,
                           "bundle from a service not in ps_list");
      }
      if (!seen.insert(b.ps_id).second) {
        throw EnclaveError(EnclaveError::Code::provisioning_failed, "duplicate bundle");
      }
      if (!crypto::verify(b.ps_id,
                          ps_sealed_signing_bytes(contract.contract_id, enclave_id_,
                                                  b.sealed_secret),
                          b.ps_sig)) {
        throw EnclaveError(EnclaveError::Code::provisioning_failed,
                           "bundle signature over sealed secret invalid");
      }
      Bytes plain;
      try {
        plain = crypto::unseal(enc_, b.sealed_secret);
      } catch (const AuthenticationError&) {
        throw EnclaveError(EnclaveError::Code::provisioning_failed,
                           "sealed secret does not unseal for this enclave");
      }
      // Sealed payload layout: secret (32) followed by the service's
      // signature over the plaintext secret (64).
      if (plain.size() != 32 + Signature::kSize) {
        throw EnclaveError(EnclaveError::Code::provisioning_failed, "sealed payload malformed");
      }
      crypto::Secret s;
      std::copy_n(plain.begin(), 32, s.value.begin());
      s.ps_id = b.ps_id;
      Signature inner = Signature::from_bytes(BytesView(plain).subspan(32));
      if (!crypto::verify(b.ps_id,
                          ps_secret_signing_bytes(contract.contract_id, enclave_id_,
                                                  BytesView(s.value)),
                          inner)) {
        throw EnclaveError(EnclaveError::Code::provisioning_failed,
                           "inner signature over plaintext secret invalid");
      }
      secrets.push_back(s);
    }

    SymmetricKey state_key = crypto::derive_state_key(std::move(secrets), contract.contract_id);
    {
      std::lock_guard lock(mu_);
      keystore_[contract.contract_id] = KeyEntry{state_key, contract.code_hash};
    }
    return crypto::sign(verif_, provisioning_proof_signing_bytes(
                                    contract.contract_id, contract.ps_list,
                                    bundles_hash(bundles)));
  }

  /// Decrypts state, runs the method, re-encrypts and signs the transition.
  /// One invocation at a time; the lock models the single-threaded enclave.
  InvokeOutput invoke(const InvocationRequest& req) {
    std::lock_guard lock(mu_);

    auto key_it = keystore_.find(req.contract_id);
    if (key_it == keystore_.end()) {
      throw EnclaveError(EnclaveError::Code::not_provisioned,
                         "no state key for this contract");
    }
    const KeyEntry& entry = key_it->second;

    interp::Program prog;
    try {
      prog = interp::parse_program(req.code);
    } catch (const interp::ParseError& e) {
      throw EnclaveError(EnclaveError::Code::bad_request,
                         std::string("contract code does not parse: ") + e.what());
    }
    if (prog.code_hash != entry.code_hash) {
      throw EnclaveError(EnclaveError::Code::bad_request,
                         "code hash does not match the provisioned contract");
    }

    // State authentication is diagnosed before the channel signature: a blob
    // that fails its AEAD tag is tampered state no matter what else is wrong
    // with the request, and the tag check leaks nothing.
    interp::Value state = interp::Value::assoc(interp::Assoc());
    if (!req.encrypted_state.empty()) {
      Bytes plain;
      try {
        plain = crypto::decrypt_state(entry.state_key, req.encrypted_state,
                                      req.contract_id.view());
      } catch (const AuthenticationError&) {
        throw EnclaveError(EnclaveError::Code::tampered_state,
                           "state blob does not authenticate");
      }
      try {
        state = interp::decode_value(plain);
      } catch (const Error&) {
        throw EnclaveError(EnclaveError::Code::tampered_state, "state payload malformed");
      }
    }

    Digest prev_hash = req.encrypted_state.empty() ? kEmptyState
                                                   : crypto::hash(req.encrypted_state);
    Digest message_hash = crypto::hash(invocation_message_bytes(req.message, req.channel_pub));
    Bytes request_bytes =
        invocation_request_signing_bytes(req.contract_id, entry.code_hash, prev_hash,
                                         message_hash, req.dependencies, req.channel_pub);
    if (!crypto::verify(req.channel_pub, request_bytes, req.channel_sig)) {
      throw EnclaveError(EnclaveError::Code::bad_request, "channel signature invalid");
    }

    interp::EvalOptions opts;
    opts.step_budget = options_.step_budget;
    opts.caller = req.channel_pub.hex();
    interp::Outcome outcome;
    try {
      outcome = interp::eval_method(prog, req.message.method, state, req.message.args, opts);
    } catch (const interp::EvalError& e) {
      throw EnclaveError(EnclaveError::Code::execution_failed, e.what());
    }

    if (compromised_) {
      outcome.new_state = corrupt_state(outcome.new_state);
    }

    InvokeOutput out;
    out.result = outcome.result;
    out.encrypted_new_state = crypto::encrypt_state(
        entry.state_key, interp::encode_value(outcome.new_state), req.contract_id.view());
    out.update.contract_id = req.contract_id;
    out.update.prev_state_hash = prev_hash;
    out.update.new_state_hash = crypto::hash(out.encrypted_new_state);
    out.update.message_hash = message_hash;
    out.update.dependencies = req.dependencies;
    out.update.channel_pub = req.channel_pub;
    out.update.enclave_sig = crypto::sign(verif_, state_update_signing_bytes(out.update));
    return out;
  }

  // -- Adversarial simulation hooks ------------------------------------------
  // These model a broken trust boundary for replication and revocation
  // drills. A compromised enclave substitutes a different (and, on repeated
  // queries, ever-changing) new state while still signing coherently.

  void compromise_for_testing() {
    std::lock_guard lock(mu_);
    compromised_ = true;
  }

  bool is_compromised() const {
    std::lock_guard lock(mu_);
    return compromised_;
  }

  /// Models key exfiltration from a compromised enclave.
  SymmetricKey exfiltrate_state_key(const Digest& contract_id) const {
    std::lock_guard lock(mu_);
    if (!compromised_) throw Error("enclave is not compromised");
    auto it = keystore_.find(contract_id);
    if (it == keystore_.end()) throw Error("no state key for this contract");
    return it->second.state_key;
  }

 private:
  ContractEnclave() = default;

  static constexpr std::string_view kSealAad = "pdo/sealed-identity/v1";

  struct KeyEntry {
    SymmetricKey state_key;
    Digest code_hash;
  };

  interp::Value corrupt_state(const interp::Value& honest) {
    interp::Assoc base =
        honest.is_assoc() ? honest.as_assoc() : interp::Assoc();
    ++corruption_counter_;
    // Enclave-specific and never repeating: independently compromised
    // replicas do not accidentally agree with each other, and repeated
    // identical queries get contradictory answers.
    return interp::Value::assoc(base.set(
        "__compromised", interp::Value::str(enclave_id_.hex().substr(0, 16) + ":" +
                                            std::to_string(corruption_counter_))));
  }

  SymmetricKey platform_key_;
  Options options_;
  crypto::SigningKeyPair verif_;
  crypto::EncryptionKeyPair enc_;
  Digest enclave_id_;
  std::map<Digest, KeyEntry> keystore_;
  bool compromised_ = false;
  uint64_t corruption_counter_ = 0;
  mutable std::mutex mu_;
};

}  // namespace pdo
