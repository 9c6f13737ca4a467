// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command line interface. Every subcommand maps onto one library operation:
// `serve` commands host a single service over HTTP and block; `owner` and
// `user` commands run client flows against remote services; `inspect` prints
// ledger records; `scenario run` executes a bundled deterministic story
// in-process.
//
// On failure every command prints one JSON object to stderr,
// {"error":{"kind","message"}}, and exits nonzero.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdo/http.hpp"
#include "pdo/sample_contracts.hpp"
#include "pdo/scenario.hpp"

namespace fs = std::filesystem;
using pdo::wire::json;

namespace {

// ---------------------------------------------------------------------------
// Small file helpers

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pdo::Error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw pdo::Error("cannot write " + path.string());
  out << content;
}

// A signing key on disk is the 32-byte seed in hex.
pdo::crypto::SigningKeyPair load_signing_key(const fs::path& path) {
  std::string text = read_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) {
    text.pop_back();
  }
  pdo::Bytes seed = pdo::hex_decode(text);
  if (seed.size() != 32) throw pdo::Error("key file must hold 32 bytes of hex: " + path.string());
  std::array<uint8_t, 32> arr{};
  std::copy(seed.begin(), seed.end(), arr.begin());
  return pdo::crypto::SigningKeyPair::from_seed(arr);
}

pdo::crypto::SigningKeyPair load_or_create_signing_key(const fs::path& path) {
  if (fs::exists(path)) return load_signing_key(path);
  auto seed = pdo::random_array<32>();
  write_file(path, pdo::hex_encode(seed) + "\n");
  return pdo::crypto::SigningKeyPair::from_seed(seed);
}

struct Address {
  std::string host;
  int port = 0;
};

Address parse_address(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw pdo::Error("address must be host:port, got: " + addr);
  }
  Address out;
  out.host = addr.substr(0, colon);
  try {
    out.port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw pdo::Error("address has a non-numeric port: " + addr);
  }
  if (out.port <= 0 || out.port > 65535) throw pdo::Error("port out of range: " + addr);
  return out;
}

pdo::http::HttpLedgerClient ledger_client(const std::string& addr) {
  Address a = parse_address(addr);
  return pdo::http::HttpLedgerClient(a.host, a.port);
}

// Contract source: a path to a .pdo file, or the name of a bundled sample.
std::string load_contract_source(const std::string& spec) {
  if (fs::exists(spec)) return read_file(spec);
  for (const pdo::samples::Sample& s : pdo::samples::all()) {
    if (s.name == spec) return std::string(s.source);
  }
  throw pdo::Error("no such contract file or bundled sample: " + spec);
}

pdo::Digest parse_digest(const std::string& hex, const char* what) {
  try {
    return pdo::Digest::from_hex(hex);
  } catch (const pdo::HexError& e) {
    throw pdo::Error(std::string(what) + ": " + e.what());
  }
}

std::vector<pdo::Dependency> parse_deps(const std::vector<std::string>& specs) {
  std::vector<pdo::Dependency> deps;
  for (const std::string& s : specs) {
    auto colon = s.find(':');
    if (colon == std::string::npos) {
      throw pdo::Error("dependency must be <contract_id>:<state_hash>, got: " + s);
    }
    deps.push_back(pdo::Dependency{parse_digest(s.substr(0, colon), "dependency contract id"),
                                   parse_digest(s.substr(colon + 1), "dependency state hash")});
  }
  return deps;
}

pdo::interp::List parse_args_json(const std::string& text) {
  json j = pdo::wire::parse_json(text);
  if (!j.is_array()) throw pdo::Error("--args must be a JSON array");
  pdo::interp::List out;
  for (const json& item : j) out.push_back(pdo::wire::value_from_plain_json(item));
  return out;
}

fs::path handle_path(const fs::path& home, const pdo::Digest& contract_id) {
  return home / (contract_id.hex() + ".json");
}

void save_handle(const fs::path& home, const pdo::PdoHandle& handle) {
  write_file(handle_path(home, handle.contract_id),
             pdo::wire::handle_to_json(handle).dump(2) + "\n");
}

pdo::PdoHandle load_handle(const fs::path& home, const pdo::Digest& contract_id) {
  fs::path path = handle_path(home, contract_id);
  if (!fs::exists(path)) {
    throw pdo::Error("no handle for contract " + contract_id.hex() + " under " + home.string());
  }
  return pdo::wire::handle_from_json(pdo::wire::parse_json(read_file(path)));
}

// ---------------------------------------------------------------------------
// Serve loop

void announce_and_wait(pdo::http::ServerBase& srv, const std::string& what,
                       const std::string& listen) {
  Address a = parse_address(listen);
  srv.set_host(a.host);
  int port = srv.start(a.port);
  std::cout << what << " listening on " << a.host << ":" << port << std::endl;
  srv.wait();
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int cmd_init(const fs::path& out_dir) {
  pdo::crypto::SigningKeyPair root = load_or_create_signing_key(out_dir / "ias-root.key");
  pdo::GenesisConfig genesis{root.pub, pdo::current_measurement()};
  write_file(out_dir / "genesis.json", pdo::wire::genesis_to_json(genesis).dump(2) + "\n");
  write_file(out_dir / "measurements.txt", pdo::current_measurement().hex() + "\n");
  std::cout << "wrote " << (out_dir / "ias-root.key").string() << "\n"
            << "wrote " << (out_dir / "genesis.json").string() << "\n"
            << "wrote " << (out_dir / "measurements.txt").string() << "\n"
            << "attestation root " << root.pub.hex() << "\n"
            << "expected measurement " << pdo::current_measurement().hex() << std::endl;
  return 0;
}

int cmd_ledger_serve(const fs::path& genesis_file, const fs::path& log_file,
                     const std::string& listen) {
  pdo::GenesisConfig genesis =
      pdo::wire::genesis_from_json(pdo::wire::parse_json(read_file(genesis_file)));
  pdo::Ledger ledger{genesis};
  if (fs::exists(log_file) && fs::file_size(log_file) > 0) {
    ledger.load_log(log_file);
    std::cout << "replayed " << ledger.log_size() << " transactions from " << log_file.string()
              << ", state digest " << ledger.state_digest().hex() << std::endl;
  }
  ledger.attach_log(log_file);

  pdo::http::LedgerServer srv(ledger);
  announce_and_wait(srv, "ledger", listen);
  return 0;
}

int cmd_ias_serve(const fs::path& measurements_file, const fs::path& key_file,
                  const std::string& listen) {
  pdo::crypto::SigningKeyPair root = load_or_create_signing_key(key_file);
  std::vector<pdo::Digest> known;
  std::istringstream lines(read_file(measurements_file));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) known.push_back(parse_digest(line, "measurement"));
  }
  pdo::AttestationService ias{root, known};
  std::cout << "attestation root " << root.pub.hex() << ", " << known.size()
            << " known measurements" << std::endl;

  pdo::http::IasServer srv(ias);
  announce_and_wait(srv, "ias", listen);
  return 0;
}

int cmd_ps_serve(const fs::path& store_dir, const std::string& ledger_addr,
                 const std::string& listen) {
  pdo::http::HttpLedgerClient ledger = ledger_client(ledger_addr);
  pdo::crypto::SigningKeyPair keys = load_or_create_signing_key(store_dir / "ps.key");
  pdo::ProvisioningService ps{keys, ledger, store_dir};
  std::cout << "provisioning service " << ps.ps_id().hex() << std::endl;

  pdo::http::PsServer srv(ps);
  announce_and_wait(srv, "ps", listen);
  return 0;
}

int cmd_es_serve(const std::string& ledger_addr, const std::string& ias_addr,
                 const std::string& adversarial, const std::string& state_dir,
                 const std::string& listen) {
  pdo::http::HttpLedgerClient ledger = ledger_client(ledger_addr);
  Address ia = parse_address(ias_addr);
  pdo::http::HttpIasClient ias(ia.host, ia.port);

  pdo::EsOptions options;
  if (!adversarial.empty()) {
    auto mode = pdo::es_mode_from_name(adversarial);
    if (!mode) throw pdo::Error("unknown adversarial mode: " + adversarial);
    options.mode = *mode;
  }
  if (!state_dir.empty()) options.state_dir = fs::path(state_dir);

  pdo::crypto::SigningKeyPair owner =
      options.state_dir ? load_or_create_signing_key(*options.state_dir / "es.key")
                        : pdo::crypto::SigningKeyPair::generate();
  pdo::EnclaveService es{owner, ias, ledger, options};
  std::cout << "enclave service mode " << pdo::es_mode_name(es.mode()) << ", hosting "
            << es.enclaves().size() << " enclaves" << std::endl;

  pdo::http::EsServer srv(es);
  announce_and_wait(srv, "es", listen);
  return 0;
}

struct RemoteServices {
  std::unique_ptr<pdo::http::HttpLedgerClient> ledger;
  std::vector<std::unique_ptr<pdo::http::HttpPsClient>> ps;
  std::vector<std::unique_ptr<pdo::http::HttpEsClient>> es;
  std::vector<pdo::PsApi*> ps_ptrs;
  std::vector<pdo::EsApi*> es_ptrs;

  RemoteServices(const std::string& ledger_addr, const std::vector<std::string>& ps_addrs,
                 const std::vector<std::string>& es_addrs) {
    Address la = parse_address(ledger_addr);
    ledger = std::make_unique<pdo::http::HttpLedgerClient>(la.host, la.port);
    for (const std::string& a : ps_addrs) {
      Address pa = parse_address(a);
      ps.push_back(std::make_unique<pdo::http::HttpPsClient>(pa.host, pa.port));
      ps_ptrs.push_back(ps.back().get());
    }
    for (const std::string& a : es_addrs) {
      Address ea = parse_address(a);
      es.push_back(std::make_unique<pdo::http::HttpEsClient>(ea.host, ea.port));
      es_ptrs.push_back(es.back().get());
    }
  }
};

int cmd_owner_create(const std::string& code_spec, const std::string& ledger_addr,
                     const std::vector<std::string>& ps_addrs,
                     const std::vector<std::string>& es_addrs, size_t enclaves,
                     const std::string& init_method, const std::string& args_json,
                     const fs::path& home) {
  std::string source = load_contract_source(code_spec);
  RemoteServices remote(ledger_addr, ps_addrs, es_addrs);
  pdo::Client client{*remote.ledger, remote.ps_ptrs, remote.es_ptrs};

  pdo::crypto::SigningKeyPair owner = pdo::crypto::SigningKeyPair::generate();
  pdo::PdoHandle handle =
      client.create_contract(owner, source, enclaves, init_method, parse_args_json(args_json));
  save_handle(home, handle);

  std::cout << json{{"contract_id", handle.contract_id.hex()},
                    {"owner_pub", handle.owner_pub.hex()},
                    {"head", handle.head.hex()},
                    {"enclaves", enclaves},
                    {"handle", handle_path(home, handle.contract_id).string()}}
                   .dump(2)
            << std::endl;
  return 0;
}

int cmd_user_invoke(const std::string& contract_hex, const std::string& method,
                    const std::string& args_json, const std::vector<std::string>& dep_specs,
                    size_t replicate, bool read_only, const std::string& ledger_addr,
                    const std::vector<std::string>& es_addrs, const fs::path& home) {
  pdo::Digest contract_id = parse_digest(contract_hex, "contract id");
  RemoteServices remote(ledger_addr, {}, es_addrs);
  pdo::Client client{*remote.ledger, remote.ps_ptrs, remote.es_ptrs};

  pdo::PdoHandle handle = load_handle(home, contract_id);
  pdo::interp::List args = parse_args_json(args_json);
  std::vector<pdo::Dependency> deps = parse_deps(dep_specs);

  json out;
  if (read_only) {
    if (!deps.empty()) throw pdo::Error("read-only calls commit nothing, dependencies make no sense");
    pdo::interp::Value result = client.read(handle, method, std::move(args));
    out = json{{"result", pdo::wire::value_to_json(result)}, {"committed", false}};
  } else if (replicate > 1) {
    pdo::ReplicatedOutcome r =
        client.replicated_invoke(handle, method, std::move(args), deps, replicate);
    json dissenters = json::array();
    for (const pdo::Digest& d : r.dissenters) dissenters.push_back(d.hex());
    json evidence = json::array();
    for (const pdo::MisbehaviorEvidence& ev : r.evidence) {
      pdo::SubmitResult sr = client.submit_evidence(ev);
      evidence.push_back(json{{"enclave_id", ev.enclave_id.hex()},
                              {"revocation_submitted", sr.accepted}});
    }
    out = json{{"committed", r.committed},
               {"agreeing", r.agreeing},
               {"total", r.total},
               {"dissenters", std::move(dissenters)},
               {"evidence", std::move(evidence)}};
    if (r.committed) {
      out["result"] = pdo::wire::value_to_json(r.result);
      out["head"] = r.new_head.hex();
    }
    save_handle(home, handle);
    if (!r.committed) {
      std::cout << out.dump(2) << std::endl;
      return 1;
    }
  } else {
    pdo::InvokeOutcome r = client.invoke(handle, method, std::move(args), deps);
    out = json{{"result", pdo::wire::value_to_json(r.result)},
               {"committed", true},
               {"head", r.new_head.hex()},
               {"attempts", r.attempts}};
    save_handle(home, handle);
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_inspect(const std::string& what, const std::string& id_hex,
                const std::string& ledger_addr) {
  pdo::http::HttpLedgerClient ledger = ledger_client(ledger_addr);
  if (what == "ledger") {
    std::cout << json{{"genesis", pdo::wire::genesis_to_json(ledger.genesis())}}.dump(2)
              << std::endl;
    return 0;
  }
  pdo::Digest id = parse_digest(id_hex, "id");
  if (what == "contract") {
    auto rec = ledger.get_contract(id);
    if (!rec) throw pdo::Error("no such contract: " + id_hex);
    json j = pdo::wire::contract_record_to_json(*rec);
    if (auto head = ledger.get_head(id)) j["head"] = head->hex();
    std::cout << j.dump(2) << std::endl;
    return 0;
  }
  if (what == "enclave") {
    auto rec = ledger.get_enclave(id);
    if (!rec) throw pdo::Error("no such enclave: " + id_hex);
    std::cout << pdo::wire::enclave_record_to_json(*rec).dump(2) << std::endl;
    return 0;
  }
  throw pdo::Error("inspect expects ledger, contract or enclave");
}

int cmd_scenario_run(const std::string& name, uint64_t seed) {
  pdo::Digest transcript = pdo::scenario::run(
      name, seed, [](const std::string& line) { std::cout << "  " << line << std::endl; });
  std::cout << "transcript " << transcript.hex() << "\n"
            << "scenario " << name << ": OK" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"private data objects: confidential smart contracts with ledger-verified state"};
  app.require_subcommand(1);

  // init
  std::string init_dir = ".";
  CLI::App* init = app.add_subcommand("init", "write a shared deployment config: attestation "
                                              "root key, genesis file, known measurements");
  init->add_option("--out", init_dir, "directory for the generated files");

  // ledger serve
  CLI::App* ledger = app.add_subcommand("ledger", "validator commands");
  ledger->require_subcommand(1);
  std::string lg_genesis, lg_log = "ledger.log", lg_listen = "127.0.0.1:7100";
  CLI::App* ledger_serve = ledger->add_subcommand("serve", "run the validator over HTTP");
  ledger_serve->add_option("--genesis", lg_genesis, "genesis JSON file")->required();
  ledger_serve->add_option("--log", lg_log, "transaction log, replayed on start");
  ledger_serve->add_option("--listen", lg_listen, "host:port to listen on");

  // ias serve
  CLI::App* ias = app.add_subcommand("ias", "attestation verification commands");
  ias->require_subcommand(1);
  std::string ia_meas, ia_key = "ias-root.key", ia_listen = "127.0.0.1:7200";
  CLI::App* ias_serve = ias->add_subcommand("serve", "run the attestation verifier over HTTP");
  ias_serve->add_option("--known-measurements", ia_meas, "file of hex measurements, one per line")
      ->required();
  ias_serve->add_option("--key", ia_key, "root signing key file (created if absent)");
  ias_serve->add_option("--listen", ia_listen, "host:port to listen on");

  // ps serve
  CLI::App* ps = app.add_subcommand("ps", "provisioning service commands");
  ps->require_subcommand(1);
  std::string ps_store, ps_ledger, ps_listen = "127.0.0.1:7300";
  CLI::App* ps_serve = ps->add_subcommand("serve", "run a provisioning service over HTTP");
  ps_serve->add_option("--store", ps_store, "directory for keys and per-contract secrets")
      ->required();
  ps_serve->add_option("--ledger", ps_ledger, "validator address host:port")->required();
  ps_serve->add_option("--listen", ps_listen, "host:port to listen on");

  // es serve
  CLI::App* es = app.add_subcommand("es", "enclave service commands");
  es->require_subcommand(1);
  std::string es_ledger, es_ias, es_mode, es_state, es_listen = "127.0.0.1:7400";
  CLI::App* es_serve = es->add_subcommand("serve", "host contract enclaves over HTTP");
  es_serve->add_option("--ledger", es_ledger, "validator address host:port")->required();
  es_serve->add_option("--ias", es_ias, "attestation verifier address host:port")->required();
  es_serve->add_option("--adversarial", es_mode,
                       "misbehavior mode: tamper_state_input, tamper_result_blob, tamper_update, "
                       "drop_response, replay_response");
  es_serve->add_option("--state-dir", es_state, "directory for sealed keys and state blobs");
  es_serve->add_option("--listen", es_listen, "host:port to listen on");

  // owner create
  CLI::App* owner = app.add_subcommand("owner", "contract owner commands");
  owner->require_subcommand(1);
  std::string oc_code, oc_ledger, oc_init = "init", oc_args = "[]", oc_home = ".pdo";
  std::vector<std::string> oc_ps, oc_es;
  size_t oc_enclaves = 1;
  CLI::App* owner_create =
      owner->add_subcommand("create", "register, provision and initialize a contract");
  owner_create->add_option("--code", oc_code, "contract source file, or a bundled sample name")
      ->required();
  owner_create->add_option("--ledger", oc_ledger, "validator address")->required();
  owner_create->add_option("--ps", oc_ps, "provisioning service address (repeatable)")
      ->required()
      ->take_all();
  owner_create->add_option("--es", oc_es, "enclave service address (repeatable)")
      ->required()
      ->take_all();
  owner_create->add_option("--enclaves", oc_enclaves, "how many enclaves to provision");
  owner_create->add_option("--init-method", oc_init, "initialization method name");
  owner_create->add_option("--args", oc_args, "initialization arguments, JSON array");
  owner_create->add_option("--home", oc_home, "directory for the contract handle file");

  // user invoke
  CLI::App* user = app.add_subcommand("user", "contract user commands");
  user->require_subcommand(1);
  std::string ui_contract, ui_method, ui_args = "[]", ui_ledger, ui_home = ".pdo";
  std::vector<std::string> ui_deps, ui_es;
  size_t ui_replicate = 1;
  bool ui_read_only = false;
  CLI::App* user_invoke = user->add_subcommand("invoke", "invoke a method and commit the update");
  user_invoke->add_option("--contract", ui_contract, "contract id (hex)")->required();
  user_invoke->add_option("--method", ui_method, "method name")->required();
  user_invoke->add_option("--args", ui_args, "arguments, JSON array");
  user_invoke->add_option("--dep", ui_deps, "dependency <contract_id>:<state_hash> (repeatable)");
  user_invoke->add_option("--replicate", ui_replicate,
                          "run on this many enclaves and commit only on majority agreement");
  user_invoke->add_flag("--read-only", ui_read_only, "execute and verify but commit nothing");
  user_invoke->add_option("--ledger", ui_ledger, "validator address")->required();
  user_invoke->add_option("--es", ui_es, "enclave service address (repeatable)")
      ->required()
      ->take_all();
  user_invoke->add_option("--home", ui_home, "directory holding the contract handle file");

  // inspect
  std::string in_what, in_id, in_ledger;
  CLI::App* inspect = app.add_subcommand("inspect", "print ledger records as JSON");
  inspect->add_option("what", in_what, "ledger, contract or enclave")->required();
  inspect->add_option("id", in_id, "record id (hex), unused for 'ledger'");
  inspect->add_option("--ledger", in_ledger, "validator address")->required();

  // scenario run
  CLI::App* scenario = app.add_subcommand("scenario", "bundled deterministic demonstrations");
  scenario->require_subcommand(1);
  std::string sc_name;
  uint64_t sc_seed = 1;
  CLI::App* scenario_run = scenario->add_subcommand("run", "run one scenario to completion");
  std::string name_help = "one of:";
  for (const std::string& n : pdo::scenario::names()) name_help += " " + n;
  scenario_run->add_option("name", sc_name, name_help)->required();
  scenario_run->add_option("--seed", sc_seed, "seed for all randomness");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*init) return cmd_init(init_dir);
    if (*ledger_serve) return cmd_ledger_serve(lg_genesis, lg_log, lg_listen);
    if (*ias_serve) return cmd_ias_serve(ia_meas, ia_key, ia_listen);
    if (*ps_serve) return cmd_ps_serve(ps_store, ps_ledger, ps_listen);
    if (*es_serve) return cmd_es_serve(es_ledger, es_ias, es_mode, es_state, es_listen);
    if (*owner_create) {
      return cmd_owner_create(oc_code, oc_ledger, oc_ps, oc_es, oc_enclaves, oc_init, oc_args,
                              oc_home);
    }
    if (*user_invoke) {
      return cmd_user_invoke(ui_contract, ui_method, ui_args, ui_deps, ui_replicate, ui_read_only,
                             ui_ledger, ui_es, ui_home);
    }
    if (*inspect) return cmd_inspect(in_what, in_id, in_ledger);
    if (*scenario_run) return cmd_scenario_run(sc_name, sc_seed);
  } catch (const pdo::ClientError& e) {
    std::cerr << json{{"error", {{"kind", "client"}, {"message", e.what()}}}}.dump() << std::endl;
    return 2;
  } catch (const pdo::scenario::ScenarioError& e) {
    std::cerr << json{{"error", {{"kind", "scenario"}, {"message", e.what()}}}}.dump()
              << std::endl;
    return 3;
  } catch (const pdo::http::HttpError& e) {
    std::cerr << json{{"error", {{"kind", "connection"}, {"message", e.what()}}}}.dump()
              << std::endl;
    return 4;
  } catch (const pdo::Error& e) {
    std::cerr << json{{"error", {{"kind", "general"}, {"message", e.what()}}}}.dump() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << std::endl;
    return 1;
  }
  std::cerr << json{{"error", {{"kind", "usage"}, {"message", "no command selected"}}}}.dump()
            << std::endl;
  return 1;
}
