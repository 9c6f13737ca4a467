// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// The HTTP adapters carry the full protocol across process-style boundaries:
// every edge in this rig goes through a real socket on localhost. Services
// talk to the ledger and the attestation root only through their HTTP
// clients, exactly as separately deployed processes would.

#include <memory>

#include <catch2/catch_amalgamated.hpp>
#include <httplib.h>

#include "pdo/client.hpp"
#include "pdo/http.hpp"
#include "pdo/sample_contracts.hpp"

using namespace pdo;
using wire::json;

namespace {

struct HttpRig {
  crypto::SigningKeyPair ias_root = crypto::SigningKeyPair::generate();
  AttestationService ias{ias_root, {current_measurement()}};
  GenesisConfig genesis{ias_root.pub, current_measurement()};
  Ledger ledger{genesis};

  http::LedgerServer ledger_srv{ledger};
  http::IasServer ias_srv{ias};

  crypto::SigningKeyPair owner = crypto::SigningKeyPair::generate();
  crypto::SigningKeyPair es_owner = crypto::SigningKeyPair::generate();

  // Each service gets its own ledger connection, as separate processes would.
  std::unique_ptr<http::HttpLedgerClient> ledger_for_ps1;
  std::unique_ptr<http::HttpLedgerClient> ledger_for_ps2;
  std::unique_ptr<http::HttpLedgerClient> ledger_for_es;
  std::unique_ptr<http::HttpLedgerClient> ledger_for_user;
  std::unique_ptr<http::HttpIasClient> ias_for_es;

  std::unique_ptr<ProvisioningService> ps1;
  std::unique_ptr<ProvisioningService> ps2;
  std::unique_ptr<EnclaveService> es;
  std::unique_ptr<http::PsServer> ps1_srv;
  std::unique_ptr<http::PsServer> ps2_srv;
  std::unique_ptr<http::EsServer> es_srv;

  std::unique_ptr<http::HttpPsClient> ps1_c;
  std::unique_ptr<http::HttpPsClient> ps2_c;
  std::unique_ptr<http::HttpEsClient> es_c;
  std::unique_ptr<Client> client;

  HttpRig() {
    int lport = ledger_srv.start();
    int iport = ias_srv.start();

    auto ledger_client = [&] {
      return std::make_unique<http::HttpLedgerClient>("127.0.0.1", lport);
    };
    ledger_for_ps1 = ledger_client();
    ledger_for_ps2 = ledger_client();
    ledger_for_es = ledger_client();
    ledger_for_user = ledger_client();
    ias_for_es = std::make_unique<http::HttpIasClient>("127.0.0.1", iport);

    ps1 = std::make_unique<ProvisioningService>(crypto::SigningKeyPair::generate(),
                                                *ledger_for_ps1);
    ps2 = std::make_unique<ProvisioningService>(crypto::SigningKeyPair::generate(),
                                                *ledger_for_ps2);
    es = std::make_unique<EnclaveService>(es_owner, *ias_for_es, *ledger_for_es);

    ps1_srv = std::make_unique<http::PsServer>(*ps1);
    ps2_srv = std::make_unique<http::PsServer>(*ps2);
    es_srv = std::make_unique<http::EsServer>(*es);

    ps1_c = std::make_unique<http::HttpPsClient>("127.0.0.1", ps1_srv->start());
    ps2_c = std::make_unique<http::HttpPsClient>("127.0.0.1", ps2_srv->start());
    es_c = std::make_unique<http::HttpEsClient>("127.0.0.1", es_srv->start());

    client = std::make_unique<Client>(*ledger_for_user, std::vector<PsApi*>{ps1_c.get(), ps2_c.get()},
                                      std::vector<EsApi*>{es_c.get()});
  }
};

}  // namespace

TEST_CASE("contract lifecycle runs entirely over HTTP", "[http]") {
  HttpRig rig;

  PdoHandle handle = rig.client->create_contract(rig.owner, samples::kCounter, 2);
  CHECK_FALSE(handle.head.is_zero());

  InvokeOutcome a = rig.client->invoke(handle, "inc", {});
  InvokeOutcome b = rig.client->invoke(handle, "inc", {});
  CHECK(a.result == interp::Value::integer(1));
  CHECK(b.result == interp::Value::integer(2));
  CHECK(rig.client->read(handle, "get") == interp::Value::integer(2));

  // The remote view and the in-process ledger agree exactly.
  auto remote_head = rig.ledger_for_user->get_head(handle.contract_id);
  REQUIRE(remote_head);
  CHECK(*remote_head == handle.head);
  CHECK(*remote_head == *rig.ledger.get_head(handle.contract_id));

  auto remote_entry = rig.ledger_for_user->get_entry(handle.contract_id, handle.head);
  auto local_entry = rig.ledger.get_entry(handle.contract_id, handle.head);
  REQUIRE(remote_entry);
  REQUIRE(local_entry);
  CHECK(remote_entry->update.new_state_hash == local_entry->update.new_state_hash);
  CHECK(remote_entry->update.message_hash == local_entry->update.message_hash);
  CHECK(remote_entry->channel_sig == local_entry->channel_sig);

  auto record = rig.ledger_for_user->get_contract(handle.contract_id);
  REQUIRE(record);
  CHECK(record->enclaves.size() == 2);
  CHECK(record->owner_pub == rig.owner.pub);

  // Genesis and attestation root match what the in-process services hold.
  GenesisConfig g = rig.ledger_for_user->genesis();
  CHECK(g.attestation_root_pub == rig.ias_root.pub);
  CHECK(rig.ias_for_es->root_pub() == rig.ias_root.pub);
}

TEST_CASE("typed errors cross the HTTP boundary intact", "[http]") {
  HttpRig rig;

  SECTION("enclave service errors keep their codes") {
    InvocationRequest junk;
    junk.contract_id = crypto::hash("nowhere");
    try {
      rig.es_c->relay_invoke(Digest::zero(), junk);
      FAIL("expected EsError");
    } catch (const EsError& e) {
      CHECK(e.code == EsError::Code::unknown_enclave);
    }
  }

  SECTION("enclave errors keep their codes") {
    LaunchOutcome launched = rig.es_c->launch();
    REQUIRE(launched.registration.accepted);
    // Hosted and registered, but never provisioned for any contract.
    InvocationRequest req;
    req.contract_id = crypto::hash("some contract");
    try {
      rig.es_c->relay_invoke(launched.enclave_id, req);
      FAIL("expected EnclaveError");
    } catch (const EnclaveError& e) {
      CHECK(e.code == EnclaveError::Code::not_provisioned);
    }
  }

  SECTION("absent records are nullopt, not exceptions") {
    CHECK_FALSE(rig.ledger_for_user->get_enclave(crypto::hash("ghost")));
    CHECK_FALSE(rig.ledger_for_user->get_contract(crypto::hash("ghost")));
    CHECK_FALSE(rig.ledger_for_user->get_head(crypto::hash("ghost")));
    CHECK_FALSE(rig.ledger_for_user->get_entry(crypto::hash("a"), crypto::hash("b")));
    CHECK_FALSE(rig.es_c->get_state(crypto::hash("ghost")));
  }

  SECTION("provisioning refusals travel as results, not errors") {
    PsProvisionResult r = rig.ps1_c->provision(crypto::hash("ghost"), crypto::hash("ghost"));
    CHECK_FALSE(r.ok);
    REQUIRE(r.refusal);
    CHECK(*r.refusal == PsRefusal::unknown_contract);
  }
}

TEST_CASE("servers refuse malformed bodies with structured errors", "[http]") {
  HttpRig rig;
  httplib::Client raw("127.0.0.1", rig.ledger_srv.port());

  SECTION("garbage JSON") {
    auto res = raw.Post("/submit", "not json at all", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    json err = wire::parse_json(res->body);
    CHECK(err["error"]["kind"] == "wire");
  }

  SECTION("valid JSON, missing field") {
    auto res = raw.Post("/submit", R"({"wrong":"shape"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SECTION("corrupted transaction bytes") {
    ContractRegisterPayload p;
    p.code_hash = crypto::hash("code");
    p.nonce = Nonce16::from_bytes(random_array<16>());
    p.ps_list = {crypto::SigningKeyPair::generate().pub};
    Transaction txn = make_transaction(p, rig.owner);
    std::string hex = hex_encode(transaction_bytes(txn));
    hex[10] = hex[10] == 'a' ? 'b' : 'a';

    auto res = raw.Post("/submit", json{{"transaction", hex}}.dump(), "application/json");
    REQUIRE(res);
    // Either the encoding breaks outright (400) or the payload decodes but
    // the recomputed transaction id no longer matches (also 400).
    CHECK(res->status == 400);
  }

  SECTION("bad hex in a path parameter") {
    auto res = raw.Get("/enclave/zzzz");
    REQUIRE(res);
    CHECK(res->status == 400);
    json err = wire::parse_json(res->body);
    CHECK(err["error"]["kind"] == "wire");
  }

  SECTION("submission through the typed client raises WireError") {
    // Bypass the client's encoder to send a malformed body with its shape.
    httplib::Client direct("127.0.0.1", rig.ledger_srv.port());
    auto res = direct.Post("/submit", R"({"transaction":"abcd"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
}

TEST_CASE("attested identity survives the remote attestation hop", "[http]") {
  HttpRig rig;

  crypto::SigningKeyPair verif = crypto::SigningKeyPair::generate();
  crypto::EncryptionKeyPair enc = crypto::EncryptionKeyPair::generate();
  Quote q{current_measurement(), quote_report_data(verif.pub, enc.pub)};

  VerificationReport report = rig.ias_for_es->ias_verify(q);
  CHECK(report.verdict == AttestationVerdict::ok);
  CHECK(check_report(report, rig.ias_for_es->root_pub(), current_measurement()));

  // A quote for an unknown build fails remotely just as it does locally.
  Quote bad{crypto::hash("unexpected build"), quote_report_data(verif.pub, enc.pub)};
  CHECK(rig.ias_for_es->ias_verify(bad).verdict == AttestationVerdict::failed);
}
