// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Contract enclave behavior: identity sealing, provisioning checks, and the
// invoke path that turns an encrypted state blob plus a signed request into a
// signed state transition. Provisioning bundles are produced with bare key
// pairs so every failure mode can be staged precisely.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "pdo/crypto.hpp"
#include "pdo/enclave.hpp"
#include "pdo/interpreter.hpp"
#include "pdo/records.hpp"
#include "pdo/sample_contracts.hpp"

using namespace pdo;

namespace {

Bytes enc_val(const interp::Value& v) { return interp::encode_value(v); }

/// A provisioning service reduced to its key pair and bundle construction.
struct PsSim {
  crypto::SigningKeyPair key = crypto::SigningKeyPair::generate();

  SecretBundle provision(const Digest& cid, const Digest& enclave_id,
                         const EncryptionPublicKey& enclave_enc,
                         const std::array<uint8_t, 32>& secret) const {
    Bytes plain(secret.begin(), secret.end());
    Signature inner =
        crypto::sign(key, ps_secret_signing_bytes(cid, enclave_id, BytesView(secret)));
    plain.insert(plain.end(), inner.bytes.begin(), inner.bytes.end());
    Bytes sealed = crypto::seal_to(enclave_enc, plain);
    return SecretBundle{key.pub, sealed,
                        crypto::sign(key, ps_sealed_signing_bytes(cid, enclave_id, sealed))};
  }
};

struct Fixture {
  SymmetricKey platform = SymmetricKey::from_bytes(random_array<32>());
  std::unique_ptr<ContractEnclave> enclave = ContractEnclave::create(platform);
  crypto::SigningKeyPair owner = crypto::SigningKeyPair::generate();
  std::vector<PsSim> pss;
  std::vector<std::array<uint8_t, 32>> secrets;
  std::string code;
  ContractDescriptor desc;

  explicit Fixture(size_t n_ps = 2, std::string contract_code = std::string(samples::kCounter)) {
    code = std::move(contract_code);
    pss.resize(n_ps);
    std::sort(pss.begin(), pss.end(),
              [](const PsSim& a, const PsSim& b) { return a.key.pub < b.key.pub; });
    for (size_t i = 0; i < n_ps; ++i) secrets.push_back(random_array<32>());
    desc.code_hash = interp::parse_program(code).code_hash;
    desc.owner_pub = owner.pub;
    desc.nonce = Nonce16::from_bytes(random_array<16>());
    for (const PsSim& ps : pss) desc.ps_list.push_back(ps.key.pub);
    desc.contract_id = contract_id_from(desc.code_hash, desc.owner_pub, desc.nonce);
  }

  std::vector<SecretBundle> bundles_for(const ContractEnclave& e) const {
    std::vector<SecretBundle> out;
    for (size_t i = 0; i < pss.size(); ++i) {
      out.push_back(pss[i].provision(desc.contract_id, e.enclave_id(), e.enc_pub(), secrets[i]));
    }
    return out;
  }

  void provision(ContractEnclave& e) const { e.accept_provisioning(desc, bundles_for(e)); }

  InvocationRequest request(const Bytes& state, const std::string& method, interp::List args,
                            const crypto::SigningKeyPair& channel,
                            std::vector<Dependency> deps = {}) const {
    InvocationRequest req;
    req.contract_id = desc.contract_id;
    req.code = code;
    req.encrypted_state = state;
    req.message = InvocationMessage{method, std::move(args)};
    req.dependencies = std::move(deps);
    req.channel_pub = channel.pub;
    Digest state_hash = state.empty() ? kEmptyState : crypto::hash(state);
    Digest message_hash = crypto::hash(invocation_message_bytes(req.message, channel.pub));
    req.channel_sig = crypto::sign(
        channel, invocation_request_signing_bytes(desc.contract_id, desc.code_hash, state_hash,
                                                  message_hash, req.dependencies, channel.pub));
    return req;
  }
};

void expect_error(EnclaveError::Code want, const std::function<void()>& f) {
  try {
    f();
    FAIL("expected an enclave error");
  } catch (const EnclaveError& e) {
    INFO(e.what());
    CHECK(e.code == want);
  }
}

}  // namespace

TEST_CASE("enclave identity is sealed and restored") {
  Fixture fx;
  ContractEnclave& e = *fx.enclave;
  CHECK(e.enclave_id() == enclave_id_from(e.verif_pub()));

  Quote q = e.quote();
  CHECK(q.measurement == current_measurement());
  CHECK(q.report_data == quote_report_data(e.verif_pub(), e.enc_pub()));

  SealedKeys sealed = e.seal_keys();

  SECTION("restore under the same platform key preserves identity") {
    auto again = ContractEnclave::restore(fx.platform, sealed);
    CHECK(again->enclave_id() == e.enclave_id());
    CHECK(again->verif_pub() == e.verif_pub());
    CHECK(again->enc_pub() == e.enc_pub());
    // Contract keys are not part of the sealed identity.
    fx.provision(e);
    CHECK(e.is_provisioned(fx.desc.contract_id));
    CHECK_FALSE(again->is_provisioned(fx.desc.contract_id));
  }

  SECTION("wrong platform key cannot unseal") {
    SymmetricKey other = SymmetricKey::from_bytes(random_array<32>());
    expect_error(EnclaveError::Code::unseal_failed,
                 [&] { ContractEnclave::restore(other, sealed); });
  }

  SECTION("corrupted sealed blob cannot unseal") {
    SealedKeys bad = sealed;
    bad.blob[bad.blob.size() / 2] ^= 0x20;
    expect_error(EnclaveError::Code::unseal_failed,
                 [&] { ContractEnclave::restore(fx.platform, bad); });
  }

  SECTION("a measurement override shows up in the quote") {
    EnclaveOptions opts;
    opts.measurement = crypto::hash("rogue build");
    auto rogue = ContractEnclave::create(fx.platform, opts);
    CHECK(rogue->quote().measurement == crypto::hash("rogue build"));
  }
}

TEST_CASE("provisioning is all-or-nothing") {
  Fixture fx;
  ContractEnclave& e = *fx.enclave;

  SECTION("valid bundles install the key and yield a checkable proof") {
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    Signature proof = e.accept_provisioning(fx.desc, bundles);
    CHECK(e.is_provisioned(fx.desc.contract_id));
    CHECK(crypto::verify(e.verif_pub(),
                         provisioning_proof_signing_bytes(fx.desc.contract_id, fx.desc.ps_list,
                                                          bundles_hash(bundles)),
                         proof));
  }

  SECTION("mismatched contract id is refused") {
    ContractDescriptor bad = fx.desc;
    bad.contract_id = crypto::hash("not the derivation");
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(bad, fx.bundles_for(e)); });
    CHECK_FALSE(e.is_provisioned(fx.desc.contract_id));
  }

  SECTION("missing bundle is refused") {
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    bundles.pop_back();
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
    CHECK_FALSE(e.is_provisioned(fx.desc.contract_id));
  }

  SECTION("duplicate bundle is refused") {
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    bundles.back() = bundles.front();
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
  }

  SECTION("bundle from a service outside the list is refused") {
    PsSim rogue;
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    bundles.back() =
        rogue.provision(fx.desc.contract_id, e.enclave_id(), e.enc_pub(), random_array<32>());
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
  }

  SECTION("tampered outer signature is refused") {
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    bundles[0].ps_sig.bytes[5] ^= 1;
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
  }

  SECTION("a bundle sealed for a different enclave does not unseal") {
    auto other = ContractEnclave::create(fx.platform);
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    // Same service, same secret, sealed to the other enclave's key, then
    // re-signed so the outer signature is consistent with the swap.
    Bytes foreign = crypto::seal_to(other->enc_pub(), to_bytes("whatever"));
    bundles[0].sealed_secret = foreign;
    bundles[0].ps_sig = crypto::sign(
        fx.pss[0].key, ps_sealed_signing_bytes(fx.desc.contract_id, e.enclave_id(), foreign));
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
  }

  SECTION("an inner signature from the wrong service is refused") {
    // Outer consistency is preserved; only the signature inside the sealed
    // payload is wrong. This catches a service that signs blobs it never
    // produced.
    PsSim& honest = fx.pss[0];
    PsSim rogue;
    std::array<uint8_t, 32> secret = random_array<32>();
    Bytes plain(secret.begin(), secret.end());
    Signature inner = crypto::sign(
        rogue.key, ps_secret_signing_bytes(fx.desc.contract_id, e.enclave_id(),
                                           BytesView(secret)));
    plain.insert(plain.end(), inner.bytes.begin(), inner.bytes.end());
    Bytes sealed = crypto::seal_to(e.enc_pub(), plain);
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    bundles[0] = SecretBundle{
        honest.key.pub, sealed,
        crypto::sign(honest.key,
                     ps_sealed_signing_bytes(fx.desc.contract_id, e.enclave_id(), sealed))};
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
    CHECK_FALSE(e.is_provisioned(fx.desc.contract_id));
  }

  SECTION("a truncated sealed payload is refused") {
    PsSim& honest = fx.pss[0];
    Bytes sealed = crypto::seal_to(e.enc_pub(), to_bytes("short"));
    std::vector<SecretBundle> bundles = fx.bundles_for(e);
    bundles[0] = SecretBundle{
        honest.key.pub, sealed,
        crypto::sign(honest.key,
                     ps_sealed_signing_bytes(fx.desc.contract_id, e.enclave_id(), sealed))};
    expect_error(EnclaveError::Code::provisioning_failed,
                 [&] { e.accept_provisioning(fx.desc, bundles); });
  }

  SECTION("enclaves provisioned from the same secrets share the state key") {
    auto sibling = ContractEnclave::create(fx.platform);
    fx.provision(e);
    fx.provision(*sibling);
    crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();
    InvokeOutput init = e.invoke(fx.request({}, "init", {}, channel));
    // The sibling can decrypt and advance the state the first enclave wrote.
    crypto::SigningKeyPair channel2 = crypto::SigningKeyPair::generate();
    InvokeOutput inc =
        sibling->invoke(fx.request(init.encrypted_new_state, "inc", {}, channel2));
    CHECK(enc_val(inc.result) == enc_val(interp::Value::integer(1)));
  }
}

TEST_CASE("invoke runs methods over encrypted state") {
  Fixture fx;
  ContractEnclave& e = *fx.enclave;
  fx.provision(e);
  crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();

  SECTION("initialization starts from the empty state") {
    InvocationRequest req = fx.request({}, "init", {}, channel);
    InvokeOutput out = e.invoke(req);
    CHECK(out.update.prev_state_hash == kEmptyState);
    CHECK(out.update.new_state_hash == crypto::hash(out.encrypted_new_state));
    CHECK(out.update.contract_id == fx.desc.contract_id);
    CHECK(out.update.channel_pub == channel.pub);
    CHECK(out.update.message_hash ==
          crypto::hash(invocation_message_bytes(req.message, channel.pub)));
    CHECK(out.update.dependencies.empty());
    CHECK(crypto::verify(e.verif_pub(), state_update_signing_bytes(out.update),
                         out.update.enclave_sig));
    CHECK(enc_val(out.result) == enc_val(interp::Value::integer(0)));

    // Advance twice; values and hash links stay consistent.
    auto ch2 = crypto::SigningKeyPair::generate();
    InvokeOutput first = e.invoke(fx.request(out.encrypted_new_state, "inc", {}, ch2));
    CHECK(first.update.prev_state_hash == out.update.new_state_hash);
    CHECK(enc_val(first.result) == enc_val(interp::Value::integer(1)));
    auto ch3 = crypto::SigningKeyPair::generate();
    InvokeOutput second = e.invoke(fx.request(first.encrypted_new_state, "get", {}, ch3));
    CHECK(enc_val(second.result) == enc_val(interp::Value::integer(1)));
  }

  SECTION("dependencies ride through into the signed update") {
    std::vector<Dependency> deps = {{crypto::hash("other contract"), crypto::hash("its state")}};
    InvokeOutput out = e.invoke(fx.request({}, "init", {}, channel, deps));
    REQUIRE(out.update.dependencies.size() == 1);
    CHECK(out.update.dependencies[0].contract_id == deps[0].contract_id);
    CHECK(out.update.dependencies[0].state_hash == deps[0].state_hash);
    CHECK(crypto::verify(e.verif_pub(), state_update_signing_bytes(out.update),
                         out.update.enclave_sig));
  }

  SECTION("not provisioned") {
    auto blank = ContractEnclave::create(fx.platform);
    expect_error(EnclaveError::Code::not_provisioned,
                 [&] { blank->invoke(fx.request({}, "init", {}, channel)); });
  }

  SECTION("code substitution is caught by the hash check") {
    InvocationRequest req = fx.request({}, "init", {}, channel);
    req.code = std::string(samples::kEscrow);
    // Signature no longer matters; the hash check runs on the provisioned
    // contract and must fire first.
    expect_error(EnclaveError::Code::bad_request, [&] { e.invoke(req); });
  }

  SECTION("unparseable code is a bad request") {
    InvocationRequest req = fx.request({}, "init", {}, channel);
    req.code = "(method broken";
    expect_error(EnclaveError::Code::bad_request, [&] { e.invoke(req); });
  }

  SECTION("channel signature must cover the exact request") {
    InvocationRequest req = fx.request({}, "init", {}, channel);
    req.channel_sig.bytes[0] ^= 1;
    expect_error(EnclaveError::Code::bad_request, [&] { e.invoke(req); });

    // Signed by a different key than channel_pub.
    InvocationRequest req2 = fx.request({}, "init", {}, channel);
    auto other = crypto::SigningKeyPair::generate();
    req2.channel_sig = crypto::sign(
        other, invocation_request_signing_bytes(
                   fx.desc.contract_id, fx.desc.code_hash, kEmptyState,
                   crypto::hash(invocation_message_bytes(req2.message, req2.channel_pub)),
                   req2.dependencies, req2.channel_pub));
    expect_error(EnclaveError::Code::bad_request, [&] { e.invoke(req2); });

    // Signed request, then the message is swapped out from under it.
    InvocationRequest req3 = fx.request({}, "init", {}, channel);
    req3.message.method = "inc";
    expect_error(EnclaveError::Code::bad_request, [&] { e.invoke(req3); });

    // Or the dependencies are.
    InvocationRequest req4 = fx.request({}, "init", {}, channel);
    req4.dependencies.push_back({crypto::hash("dep"), crypto::hash("state")});
    expect_error(EnclaveError::Code::bad_request, [&] { e.invoke(req4); });
  }

  SECTION("tampered state fails authentication") {
    InvokeOutput out = e.invoke(fx.request({}, "init", {}, channel));
    Bytes blob = out.encrypted_new_state;
    for (size_t pos : {size_t{0}, blob.size() / 2, blob.size() - 1}) {
      Bytes bad = blob;
      bad[pos] ^= 0x01;
      auto ch = crypto::SigningKeyPair::generate();
      expect_error(EnclaveError::Code::tampered_state,
                   [&] { e.invoke(fx.request(bad, "get", {}, ch)); });
    }
  }

  SECTION("state from a different contract does not decrypt") {
    // Same code, different nonce: a distinct contract with distinct secrets.
    Fixture other;
    other.provision(e);
    auto ch = crypto::SigningKeyPair::generate();
    InvokeOutput foreign = e.invoke(other.request({}, "init", {}, ch));
    auto ch2 = crypto::SigningKeyPair::generate();
    expect_error(EnclaveError::Code::tampered_state, [&] {
      e.invoke(fx.request(foreign.encrypted_new_state, "get", {}, ch2));
    });
  }

  SECTION("contract errors become execution failures") {
    expect_error(EnclaveError::Code::execution_failed,
                 [&] { e.invoke(fx.request({}, "no-such-method", {}, channel)); });

    Fixture spinner(2, "(method spin () (spin))\n(method init () (list state 0))");
    spinner.provision(e);
    auto ch = crypto::SigningKeyPair::generate();
    expect_error(EnclaveError::Code::execution_failed,
                 [&] { e.invoke(spinner.request({}, "spin", {}, ch)); });
  }

  SECTION("two honest enclaves produce byte-identical outputs") {
    auto sibling = ContractEnclave::create(fx.platform);
    fx.provision(*sibling);
    InvocationRequest req = fx.request({}, "init", {}, channel);
    InvokeOutput a = e.invoke(req);
    InvokeOutput b = sibling->invoke(req);
    CHECK(a.encrypted_new_state == b.encrypted_new_state);
    CHECK(enc_val(a.result) == enc_val(b.result));
    // Everything except the signing key is identical.
    CHECK(state_update_signing_bytes(a.update) == state_update_signing_bytes(b.update));
    CHECK(a.update.enclave_sig != b.update.enclave_sig);
  }
}

TEST_CASE("a compromised enclave diverges but still signs") {
  Fixture fx;
  ContractEnclave& honest = *fx.enclave;
  auto broken = ContractEnclave::create(fx.platform);
  fx.provision(honest);
  fx.provision(*broken);

  CHECK_FALSE(broken->is_compromised());
  CHECK_THROWS(broken->exfiltrate_state_key(fx.desc.contract_id));
  broken->compromise_for_testing();
  CHECK(broken->is_compromised());

  crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();
  InvocationRequest req = fx.request({}, "init", {}, channel);
  InvokeOutput good = honest.invoke(req);
  InvokeOutput bad1 = broken->invoke(req);
  InvokeOutput bad2 = broken->invoke(req);

  // The corrupted outputs differ from the honest one and from each other;
  // repeated identical questions get different answers, which is exactly the
  // evidence the revocation flow needs.
  CHECK(bad1.update.new_state_hash != good.update.new_state_hash);
  CHECK(bad2.update.new_state_hash != bad1.update.new_state_hash);
  CHECK(bad1.update.prev_state_hash == good.update.prev_state_hash);
  CHECK(bad1.update.message_hash == good.update.message_hash);

  // Yet each corrupted update is coherently signed by the enclave key.
  CHECK(crypto::verify(broken->verif_pub(), state_update_signing_bytes(bad1.update),
                       bad1.update.enclave_sig));
  CHECK(crypto::verify(broken->verif_pub(), state_update_signing_bytes(bad2.update),
                       bad2.update.enclave_sig));

  // The stolen key decrypts what the honest enclave wrote.
  SymmetricKey stolen = broken->exfiltrate_state_key(fx.desc.contract_id);
  Bytes plain = crypto::decrypt_state(stolen, good.encrypted_new_state,
                                      fx.desc.contract_id.view());
  CHECK(interp::decode_value(plain).is_assoc());
}
