// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Validator rules, exercised with hand-crafted transactions. Nothing here
// uses the enclave runtime: every signature is produced directly with key
// pairs, the way a hostile or buggy client could.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "pdo/attestation.hpp"
#include "pdo/crypto.hpp"
#include "pdo/ledger.hpp"
#include "pdo/records.hpp"

using namespace pdo;

namespace {

struct TestEnclave {
  crypto::SigningKeyPair verif = crypto::SigningKeyPair::generate();
  crypto::EncryptionKeyPair enc = crypto::EncryptionKeyPair::generate();
  Digest id;
};

struct Fixture {
  crypto::SigningKeyPair ias_root = crypto::SigningKeyPair::generate();
  AttestationService ias{ias_root, {current_measurement()}};
  GenesisConfig genesis{ias_root.pub, current_measurement()};
  Ledger ledger{genesis};
  crypto::SigningKeyPair owner = crypto::SigningKeyPair::generate();
  std::vector<crypto::SigningKeyPair> pss;
  std::vector<VerificationKey> ps_list;

  Fixture(size_t n_ps = 2) {
    for (size_t i = 0; i < n_ps; ++i) pss.push_back(crypto::SigningKeyPair::generate());
    for (const auto& ps : pss) ps_list.push_back(ps.pub);
    std::sort(ps_list.begin(), ps_list.end());
  }

  TestEnclave fresh_enclave() {
    TestEnclave e;
    e.id = enclave_id_from(e.verif.pub);
    return e;
  }

  Transaction register_txn(const TestEnclave& e) {
    Quote q{current_measurement(), quote_report_data(e.verif.pub, e.enc.pub)};
    return make_transaction(EnclaveRegisterPayload{e.verif.pub, e.enc.pub, ias.ias_verify(q)},
                            owner);
  }

  TestEnclave registered_enclave() {
    TestEnclave e = fresh_enclave();
    REQUIRE(ledger.submit(register_txn(e)).accepted);
    return e;
  }

  Digest register_contract(const Digest& code_hash) {
    Nonce16 nonce = Nonce16::from_bytes(random_array<16>());
    REQUIRE(ledger.submit(make_transaction(ContractRegisterPayload{code_hash, nonce, ps_list},
                                           owner))
                .accepted);
    return contract_id_from(code_hash, owner.pub, nonce);
  }

  SecretBundle bundle(const crypto::SigningKeyPair& ps, const Digest& cid, const TestEnclave& e) {
    // The validator never unseals; opaque bytes with a valid outer signature
    // are all it checks.
    Bytes sealed = to_bytes("sealed-for-" + e.id.hex().substr(0, 8));
    return SecretBundle{ps.pub, sealed,
                        crypto::sign(ps, ps_sealed_signing_bytes(cid, e.id, sealed))};
  }

  Transaction add_enclave_txn(const Digest& cid, const TestEnclave& e,
                              const crypto::SigningKeyPair& submitter) {
    std::vector<SecretBundle> bundles;
    for (const auto& ps : pss) bundles.push_back(bundle(ps, cid, e));
    Signature proof =
        crypto::sign(e.verif, provisioning_proof_signing_bytes(cid, ps_list, bundles_hash(bundles)));
    return make_transaction(AddEnclavePayload{cid, ProvisionedEnclave{e.id, bundles, proof}},
                            submitter);
  }

  Digest provisioned_contract(const TestEnclave& e) {
    Digest cid = register_contract(crypto::hash("some contract code"));
    REQUIRE(ledger.submit(add_enclave_txn(cid, e, owner)).accepted);
    return cid;
  }

  /// Builds a fully signed commit transaction; `mutate` can corrupt any stage.
  Transaction ccl_txn(const TestEnclave& e, const Digest& cid, const Digest& prev,
                      const Digest& next, std::vector<Dependency> deps = {}) {
    crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();
    return ccl_txn_with_channel(e, cid, prev, next, std::move(deps), channel);
  }

  Transaction ccl_txn_with_channel(const TestEnclave& e, const Digest& cid, const Digest& prev,
                                   const Digest& next, std::vector<Dependency> deps,
                                   const crypto::SigningKeyPair& channel) {
    StateUpdate u;
    u.contract_id = cid;
    u.prev_state_hash = prev;
    u.new_state_hash = next;
    u.message_hash = crypto::hash("message went here " + next.hex());
    u.dependencies = std::move(deps);
    u.channel_pub = channel.pub;
    u.enclave_sig = crypto::sign(e.verif, state_update_signing_bytes(u));
    CclEntry entry;
    entry.update = u;
    entry.enclave_id = e.id;
    entry.channel_sig = crypto::sign(channel, ccl_channel_signing_bytes(entry));
    return make_transaction(CclUpdatePayload{entry}, channel);
  }
};

void expect_reject(const SubmitResult& r, Reject why) {
  INFO("detail: " << r.detail);
  REQUIRE_FALSE(r.accepted);
  REQUIRE(r.reason.has_value());
  CHECK(*r.reason == why);
}

}  // namespace

TEST_CASE("enclave registration verifies the attestation chain") {
  Fixture fx;
  TestEnclave e = fx.fresh_enclave();

  SECTION("valid registration is accepted once") {
    REQUIRE(fx.ledger.submit(fx.register_txn(e)).accepted);
    auto rec = fx.ledger.get_enclave(e.id);
    REQUIRE(rec.has_value());
    CHECK(rec->verif_pub == e.verif.pub);
    CHECK(rec->enc_pub == e.enc.pub);
    CHECK(rec->owner_pub == fx.owner.pub);
    CHECK_FALSE(rec->revoked);
    expect_reject(fx.ledger.submit(fx.register_txn(e)), Reject::duplicate);
  }

  SECTION("failed verdict is rejected") {
    AttestationService other_ias(fx.ias_root, {crypto::hash("different build")});
    Quote q{current_measurement(), quote_report_data(e.verif.pub, e.enc.pub)};
    VerificationReport failed = other_ias.ias_verify(q);
    REQUIRE(failed.verdict == AttestationVerdict::failed);
    expect_reject(fx.ledger.submit(make_transaction(
                      EnclaveRegisterPayload{e.verif.pub, e.enc.pub, failed}, fx.owner)),
                  Reject::bad_attestation);
  }

  SECTION("report signed by the wrong root is rejected") {
    auto rogue_root = crypto::SigningKeyPair::generate();
    AttestationService rogue(rogue_root, {current_measurement()});
    Quote q{current_measurement(), quote_report_data(e.verif.pub, e.enc.pub)};
    expect_reject(fx.ledger.submit(make_transaction(
                      EnclaveRegisterPayload{e.verif.pub, e.enc.pub, rogue.ias_verify(q)},
                      fx.owner)),
                  Reject::bad_attestation);
  }

  SECTION("report data must bind the registered keys") {
    TestEnclave imposter = fx.fresh_enclave();
    Quote q{current_measurement(), quote_report_data(imposter.verif.pub, imposter.enc.pub)};
    expect_reject(fx.ledger.submit(make_transaction(
                      EnclaveRegisterPayload{e.verif.pub, e.enc.pub, fx.ias.ias_verify(q)},
                      fx.owner)),
                  Reject::bad_attestation);
  }

  SECTION("tampered submitter signature is rejected") {
    Transaction txn = fx.register_txn(e);
    txn.submitter_sig.bytes[3] ^= 1;
    txn.txn_id = crypto::hash(transaction_envelope_bytes(Family::enclave_registry,
                                                         txn.payload_bytes, txn.submitter_pub,
                                                         txn.submitter_sig));
    expect_reject(fx.ledger.submit(txn), Reject::bad_signature);
  }

  SECTION("txn id must match the envelope") {
    Transaction txn = fx.register_txn(e);
    txn.txn_id.bytes[0] ^= 1;
    expect_reject(fx.ledger.submit(txn), Reject::malformed);
  }
}

TEST_CASE("contract registration and provisioning rules") {
  Fixture fx;
  TestEnclave e = fx.registered_enclave();

  SECTION("happy path") {
    Digest cid = fx.register_contract(crypto::hash("code"));
    auto rec = fx.ledger.get_contract(cid);
    REQUIRE(rec.has_value());
    CHECK(rec->ps_list == fx.ps_list);
    CHECK(rec->owner_pub == fx.owner.pub);
    REQUIRE(fx.ledger.submit(fx.add_enclave_txn(cid, e, fx.owner)).accepted);
    CHECK(fx.ledger.get_contract(cid)->find_enclave(e.id) != nullptr);
  }

  SECTION("empty provisioning list is malformed") {
    expect_reject(
        fx.ledger.submit(make_transaction(
            ContractRegisterPayload{crypto::hash("code"), Nonce16{}, {}}, fx.owner)),
        Reject::malformed);
  }

  SECTION("same registration twice is a duplicate") {
    Nonce16 nonce = Nonce16::from_bytes(random_array<16>());
    ContractRegisterPayload p{crypto::hash("code"), nonce, fx.ps_list};
    REQUIRE(fx.ledger.submit(make_transaction(p, fx.owner)).accepted);
    expect_reject(fx.ledger.submit(make_transaction(p, fx.owner)), Reject::duplicate);
  }

  SECTION("add-enclave rejects wrong submitter unknown ids and bad proofs") {
    Digest cid = fx.register_contract(crypto::hash("code"));

    auto interloper = crypto::SigningKeyPair::generate();
    expect_reject(fx.ledger.submit(fx.add_enclave_txn(cid, e, interloper)), Reject::not_owner);

    expect_reject(fx.ledger.submit(fx.add_enclave_txn(crypto::hash("no such contract"), e,
                                                      fx.owner)),
                  Reject::malformed);

    TestEnclave unregistered = fx.fresh_enclave();
    expect_reject(fx.ledger.submit(fx.add_enclave_txn(cid, unregistered, fx.owner)),
                  Reject::unknown_enclave);

    // Bundles from only one of the two listed services.
    std::vector<SecretBundle> partial = {fx.bundle(fx.pss[0], cid, e)};
    Signature proof = crypto::sign(
        e.verif, provisioning_proof_signing_bytes(cid, fx.ps_list, bundles_hash(partial)));
    expect_reject(fx.ledger.submit(make_transaction(
                      AddEnclavePayload{cid, ProvisionedEnclave{e.id, partial, proof}}, fx.owner)),
                  Reject::malformed);

    // Outer signature from a service not on the list.
    auto rogue_ps = crypto::SigningKeyPair::generate();
    std::vector<SecretBundle> rogue = {fx.bundle(fx.pss[0], cid, e),
                                       fx.bundle(rogue_ps, cid, e)};
    Signature rogue_proof = crypto::sign(
        e.verif, provisioning_proof_signing_bytes(cid, fx.ps_list, bundles_hash(rogue)));
    expect_reject(
        fx.ledger.submit(make_transaction(
            AddEnclavePayload{cid, ProvisionedEnclave{e.id, rogue, rogue_proof}}, fx.owner)),
        Reject::malformed);

    // Valid bundle set but the sealed bytes were swapped after signing.
    std::vector<SecretBundle> swapped;
    for (const auto& ps : fx.pss) swapped.push_back(fx.bundle(ps, cid, e));
    swapped[0].sealed_secret = to_bytes("different sealed bytes");
    Signature swapped_proof = crypto::sign(
        e.verif, provisioning_proof_signing_bytes(cid, fx.ps_list, bundles_hash(swapped)));
    expect_reject(
        fx.ledger.submit(make_transaction(
            AddEnclavePayload{cid, ProvisionedEnclave{e.id, swapped, swapped_proof}}, fx.owner)),
        Reject::bad_signature);

    // Proof signed over a different bundle set than the one submitted.
    std::vector<SecretBundle> good;
    for (const auto& ps : fx.pss) good.push_back(fx.bundle(ps, cid, e));
    Signature stale_proof = crypto::sign(
        e.verif, provisioning_proof_signing_bytes(cid, fx.ps_list, crypto::hash("other set")));
    expect_reject(
        fx.ledger.submit(make_transaction(
            AddEnclavePayload{cid, ProvisionedEnclave{e.id, good, stale_proof}}, fx.owner)),
        Reject::bad_signature);

    // Same enclave provisioned twice.
    REQUIRE(fx.ledger.submit(fx.add_enclave_txn(cid, e, fx.owner)).accepted);
    expect_reject(fx.ledger.submit(fx.add_enclave_txn(cid, e, fx.owner)), Reject::duplicate);
  }
}

TEST_CASE("commit log enforces serial progression") {
  Fixture fx;
  TestEnclave e = fx.registered_enclave();
  Digest cid = fx.provisioned_contract(e);
  Digest s1 = crypto::hash("state one");
  Digest s2 = crypto::hash("state two");
  Digest s3 = crypto::hash("state three");

  SECTION("init then advance") {
    REQUIRE(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s1)).accepted);
    CHECK(fx.ledger.get_head(cid) == s1);
    REQUIRE(fx.ledger.submit(fx.ccl_txn(e, cid, s1, s2)).accepted);
    CHECK(fx.ledger.get_head(cid) == s2);
    auto chain = fx.ledger.chain(cid);
    REQUIRE(chain.size() == 2);
    CHECK(chain[0].update.new_state_hash == s1);
    CHECK(chain[1].update.new_state_hash == s2);
    CHECK(fx.ledger.get_entry(cid, s1).has_value());
    CHECK_FALSE(fx.ledger.get_entry(cid, s3).has_value());
  }

  SECTION("stale or skipped heads are rejected") {
    REQUIRE(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s1)).accepted);
    // A second init races behind and loses.
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s2)), Reject::stale_state);
    // An update against a never-committed head loses too.
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, s2, s3)), Reject::stale_state);
    // Update before init.
    Digest other = fx.provisioned_contract(e);
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, other, s1, s2)), Reject::stale_state);
  }

  SECTION("degenerate transitions are malformed") {
    REQUIRE(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s1)).accepted);
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, s1, s1)), Reject::malformed);
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, s1, Digest::zero())), Reject::malformed);
  }

  SECTION("only the channel holder can commit") {
    crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();
    Transaction txn = fx.ccl_txn_with_channel(e, cid, Digest::zero(), s1, {}, channel);
    // Re-sign the envelope under a different key: valid signature, wrong
    // identity.
    auto thief = crypto::SigningKeyPair::generate();
    CclUpdatePayload payload = std::get<CclUpdatePayload>(txn.payload);
    expect_reject(fx.ledger.submit(make_transaction(payload, thief)), Reject::bad_signature);
  }

  SECTION("signatures from the wrong enclave or channel are rejected") {
    TestEnclave other = fx.registered_enclave();
    // other is registered but not provisioned for cid.
    expect_reject(fx.ledger.submit(fx.ccl_txn(other, cid, Digest::zero(), s1)),
                  Reject::unknown_enclave);

    // Enclave signature corrupted; channel re-signs the corrupted entry so
    // only the enclave check can be the one that fires.
    crypto::SigningKeyPair ch1 = crypto::SigningKeyPair::generate();
    Transaction txn = fx.ccl_txn_with_channel(e, cid, Digest::zero(), s1, {}, ch1);
    CclUpdatePayload payload = std::get<CclUpdatePayload>(txn.payload);
    payload.entry.update.enclave_sig.bytes[0] ^= 1;
    payload.entry.channel_sig = crypto::sign(ch1, ccl_channel_signing_bytes(payload.entry));
    expect_reject(fx.ledger.submit(make_transaction(payload, ch1)), Reject::bad_signature);

    // Channel signature corrupted.
    crypto::SigningKeyPair ch2 = crypto::SigningKeyPair::generate();
    Transaction txn2 = fx.ccl_txn_with_channel(e, cid, Digest::zero(), s1, {}, ch2);
    CclUpdatePayload p2 = std::get<CclUpdatePayload>(txn2.payload);
    p2.entry.channel_sig.bytes[0] ^= 1;
    expect_reject(fx.ledger.submit(make_transaction(p2, ch2)), Reject::bad_signature);
  }

  SECTION("unknown contract is malformed") {
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, crypto::hash("ghost"), Digest::zero(), s1)),
                  Reject::malformed);
  }
}

TEST_CASE("dependencies gate commits across contracts") {
  Fixture fx;
  TestEnclave e = fx.registered_enclave();
  Digest asset = fx.provisioned_contract(e);
  Digest escrow = fx.provisioned_contract(e);
  Digest a1 = crypto::hash("asset v1");
  Digest e1 = crypto::hash("escrow v1");
  Digest e2 = crypto::hash("escrow v2");

  REQUIRE(fx.ledger.submit(fx.ccl_txn(e, escrow, Digest::zero(), e1)).accepted);

  // Escrow update depends on an asset state that has not been committed.
  std::vector<Dependency> deps = {{asset, a1}};
  expect_reject(fx.ledger.submit(fx.ccl_txn(e, escrow, e1, e2, deps)),
                Reject::missing_dependency);

  // Commit the asset state, then the same escrow update goes through.
  REQUIRE(fx.ledger.submit(fx.ccl_txn(e, asset, Digest::zero(), a1)).accepted);
  REQUIRE(fx.ledger.submit(fx.ccl_txn(e, escrow, e1, e2, deps)).accepted);

  // A dependency naming the right contract but a never-committed state fails.
  std::vector<Dependency> ghost = {{asset, crypto::hash("asset v9")}};
  expect_reject(fx.ledger.submit(fx.ccl_txn(e, escrow, e2, crypto::hash("escrow v3"), ghost)),
                Reject::missing_dependency);
}

TEST_CASE("revocation closes the door") {
  Fixture fx;
  TestEnclave e = fx.registered_enclave();
  Digest cid = fx.provisioned_contract(e);
  Digest s1 = crypto::hash("s1");
  Digest s2 = crypto::hash("s2");

  SECTION("owner revokes an enclave") {
    auto interloper = crypto::SigningKeyPair::generate();
    expect_reject(fx.ledger.submit(make_transaction(EnclaveRevokePayload{e.id}, interloper)),
                  Reject::not_owner);
    REQUIRE(fx.ledger.submit(make_transaction(EnclaveRevokePayload{e.id}, fx.owner)).accepted);
    CHECK(fx.ledger.get_enclave(e.id)->revoked);
    expect_reject(fx.ledger.submit(make_transaction(EnclaveRevokePayload{e.id}, fx.owner)),
                  Reject::duplicate);
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s1)), Reject::revoked);
  }

  SECTION("equivocation evidence revokes without an owner") {
    // The enclave signs two different successors of the same state for the
    // same message. Anyone who holds both can prove misbehavior.
    crypto::SigningKeyPair channel = crypto::SigningKeyPair::generate();
    StateUpdate first;
    first.contract_id = cid;
    first.prev_state_hash = Digest::zero();
    first.new_state_hash = s1;
    first.message_hash = crypto::hash("the message");
    first.channel_pub = channel.pub;
    first.enclave_sig = crypto::sign(e.verif, state_update_signing_bytes(first));
    StateUpdate second = first;
    second.new_state_hash = s2;
    second.enclave_sig = crypto::sign(e.verif, state_update_signing_bytes(second));

    auto anyone = crypto::SigningKeyPair::generate();

    SECTION("valid evidence is accepted and the enclave is dead") {
      REQUIRE(fx.ledger.submit(make_transaction(EvidencePayload{e.id, first, second}, anyone))
                  .accepted);
      CHECK(fx.ledger.get_enclave(e.id)->revoked);
      expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s1)), Reject::revoked);
      // Repeat evidence against a dead enclave is a duplicate.
      expect_reject(
          fx.ledger.submit(make_transaction(EvidencePayload{e.id, second, first}, anyone)),
          Reject::duplicate);
    }

    SECTION("agreeing updates are not evidence") {
      expect_reject(
          fx.ledger.submit(make_transaction(EvidencePayload{e.id, first, first}, anyone)),
          Reject::malformed);
    }

    SECTION("updates answering different messages are not evidence") {
      StateUpdate unrelated = first;
      unrelated.message_hash = crypto::hash("another message");
      unrelated.new_state_hash = s2;
      unrelated.enclave_sig = crypto::sign(e.verif, state_update_signing_bytes(unrelated));
      expect_reject(
          fx.ledger.submit(make_transaction(EvidencePayload{e.id, first, unrelated}, anyone)),
          Reject::malformed);
    }

    SECTION("forged signatures are not evidence") {
      StateUpdate forged = second;
      forged.enclave_sig.bytes[10] ^= 1;
      expect_reject(
          fx.ledger.submit(make_transaction(EvidencePayload{e.id, first, forged}, anyone)),
          Reject::bad_signature);
    }
  }

  SECTION("contract revocation stops commits and provisioning") {
    auto interloper = crypto::SigningKeyPair::generate();
    expect_reject(fx.ledger.submit(make_transaction(ContractRevokePayload{cid}, interloper)),
                  Reject::not_owner);
    REQUIRE(fx.ledger.submit(make_transaction(ContractRevokePayload{cid}, fx.owner)).accepted);
    CHECK(fx.ledger.get_contract(cid)->revoked);
    expect_reject(fx.ledger.submit(fx.ccl_txn(e, cid, Digest::zero(), s1)), Reject::revoked);
    TestEnclave e2v = fx.registered_enclave();
    expect_reject(fx.ledger.submit(fx.add_enclave_txn(cid, e2v, fx.owner)), Reject::revoked);
    expect_reject(fx.ledger.submit(make_transaction(ContractRevokePayload{cid}, fx.owner)),
                  Reject::duplicate);
  }
}

TEST_CASE("duplicate transactions are rejected by id") {
  Fixture fx;
  TestEnclave e = fx.fresh_enclave();
  Transaction txn = fx.register_txn(e);
  REQUIRE(fx.ledger.submit(txn).accepted);
  expect_reject(fx.ledger.submit(txn), Reject::duplicate);
  CHECK(fx.ledger.log_size() == 1);  // the duplicate never hit the log
}

TEST_CASE("transaction log replay reproduces the exact state") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "pdo-ledger-test";
  fs::create_directories(dir);
  fs::path log = dir / "txn.log";

  Fixture fx;
  // A realistic mixed history: registrations, provisioning, commits across
  // two contracts with a dependency, one revocation.
  TestEnclave e1 = fx.registered_enclave();
  TestEnclave e2 = fx.registered_enclave();
  Digest c1 = fx.provisioned_contract(e1);
  Digest c2 = fx.provisioned_contract(e1);
  REQUIRE(fx.ledger.submit(fx.add_enclave_txn(c1, e2, fx.owner)).accepted);

  Digest prev = Digest::zero();
  for (int i = 0; i < 8; ++i) {
    Digest next = crypto::hash("c1 state " + std::to_string(i));
    REQUIRE(fx.ledger.submit(fx.ccl_txn(e1, c1, prev, next)).accepted);
    prev = next;
  }
  REQUIRE(fx.ledger.submit(fx.ccl_txn(e1, c2, Digest::zero(), crypto::hash("c2 v1"),
                                      {{c1, crypto::hash("c1 state 3")}}))
              .accepted);
  REQUIRE(
      fx.ledger.submit(make_transaction(EnclaveRevokePayload{e2.id}, fx.owner)).accepted);

  fx.ledger.write_log(log);
  Digest want = fx.ledger.state_digest();
  size_t txn_count = fx.ledger.log_size();
  REQUIRE(txn_count >= 16);

  SECTION("clean replay matches") {
    Ledger replayed(fx.genesis);
    replayed.load_log(log);
    CHECK(replayed.state_digest() == want);
    CHECK(replayed.log_size() == txn_count);
    CHECK(replayed.get_head(c1) == fx.ledger.get_head(c1));
    CHECK(replayed.chain(c1).size() == 8);
    CHECK(replayed.get_enclave(e2.id)->revoked);
  }

  SECTION("replay under a different genesis fails") {
    auto other_root = crypto::SigningKeyPair::generate();
    Ledger replayed(GenesisConfig{other_root.pub, current_measurement()});
    CHECK_THROWS_AS(replayed.load_log(log), ReplayError);
  }

  SECTION("every single-byte corruption aborts at the corrupted line") {
    std::ifstream in(log, std::ios::binary);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == txn_count);

    // Corrupt one hex digit in a spread of lines (full sweep is criterion
    // territory; here a representative sample across families).
    for (size_t idx : {size_t{0}, lines.size() / 2, lines.size() - 1}) {
      for (size_t pos : {size_t{0}, lines[idx].size() / 2, lines[idx].size() - 1}) {
        std::vector<std::string> mutated = lines;
        char& ch = mutated[idx][pos];
        ch = (ch == '0') ? '1' : '0';
        fs::path bad = dir / "bad.log";
        std::ofstream out(bad, std::ios::trunc | std::ios::binary);
        for (const std::string& l : mutated) out << l << '\n';
        out.close();

        Ledger replayed(fx.genesis);
        try {
          replayed.load_log(bad);
          FAIL("corruption at line " << idx + 1 << " pos " << pos << " went unnoticed");
        } catch (const ReplayError& err) {
          CHECK(err.line == idx + 1);
        }
      }
    }
  }

  SECTION("attach_log continues an existing file") {
    fs::path cont = dir / "cont.log";
    fs::copy_file(log, cont, fs::copy_options::overwrite_existing);
    Ledger replayed(fx.genesis);
    replayed.load_log(cont);
    replayed.attach_log(cont);
    TestEnclave e3 = fx.fresh_enclave();
    Quote q{current_measurement(), quote_report_data(e3.verif.pub, e3.enc.pub)};
    REQUIRE(replayed
                .submit(make_transaction(
                    EnclaveRegisterPayload{e3.verif.pub, e3.enc.pub, fx.ias.ias_verify(q)},
                    fx.owner))
                .accepted);
    Ledger again(fx.genesis);
    again.load_log(cont);
    CHECK(again.state_digest() == replayed.state_digest());
    CHECK(again.log_size() == txn_count + 1);
  }

  fs::remove_all(dir);
}

TEST_CASE("payload encodings round trip and reject junk") {
  Fixture fx;
  TestEnclave e = fx.fresh_enclave();
  Transaction txn = fx.register_txn(e);
  Bytes wire = transaction_bytes(txn);
  Transaction back = transaction_decode(wire);
  CHECK(back.txn_id == txn.txn_id);
  CHECK(transaction_bytes(back) == wire);

  // Any single-byte flip either fails to decode or changes the txn id, so no
  // two distinct wire forms alias one transaction.
  for (size_t i = 0; i < wire.size(); i += 7) {
    Bytes mutated = wire;
    mutated[i] ^= 0x01;
    bool detected = false;
    try {
      detected = transaction_decode(mutated).txn_id != txn.txn_id;
    } catch (const Error&) {
      detected = true;
    }
    CHECK(detected);
  }
}
