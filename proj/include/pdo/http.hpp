// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// HTTP adapters for the four service interfaces. Each server wraps an
// implementation of its Api; each client implements the same Api over HTTP,
// so everything built against the interfaces runs across processes
// unchanged.
//
// Failures travel as {"error":{"kind","code","message"}} bodies. The client
// side rethrows typed errors (EnclaveError, EsError) by code, so callers see
// the same exceptions whether the service is in-process or remote.

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "pdo/wire.hpp"

namespace pdo::http {

using wire::json;

/// Transport-level failure: the peer is unreachable or spoke garbage.
struct HttpError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Typed error codes by name, for transport

inline std::string_view enclave_error_name(EnclaveError::Code c) {
  switch (c) {
    case EnclaveError::Code::not_provisioned: return "not_provisioned";
    case EnclaveError::Code::tampered_state: return "tampered_state";
    case EnclaveError::Code::execution_failed: return "execution_failed";
    case EnclaveError::Code::bad_request: return "bad_request";
    case EnclaveError::Code::provisioning_failed: return "provisioning_failed";
    case EnclaveError::Code::unseal_failed: return "unseal_failed";
  }
  return "unknown";
}

inline std::optional<EnclaveError::Code> enclave_error_from_name(std::string_view name) {
  for (auto c : {EnclaveError::Code::not_provisioned, EnclaveError::Code::tampered_state,
                 EnclaveError::Code::execution_failed, EnclaveError::Code::bad_request,
                 EnclaveError::Code::provisioning_failed, EnclaveError::Code::unseal_failed}) {
    if (enclave_error_name(c) == name) return c;
  }
  return std::nullopt;
}

inline std::string_view es_error_name(EsError::Code c) {
  switch (c) {
    case EsError::Code::unknown_enclave: return "unknown_enclave";
    case EsError::Code::dropped: return "dropped";
    case EsError::Code::launch_failed: return "launch_failed";
  }
  return "unknown";
}

inline std::optional<EsError::Code> es_error_from_name(std::string_view name) {
  for (auto c : {EsError::Code::unknown_enclave, EsError::Code::dropped,
                 EsError::Code::launch_failed}) {
    if (es_error_name(c) == name) return c;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Server plumbing

namespace detail {

inline void set_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void set_error(httplib::Response& res, int status, std::string_view kind,
                      std::string_view code, const std::string& message) {
  set_json(res, status,
           json{{"error", json{{"kind", kind}, {"code", code}, {"message", message}}}});
}

inline void set_not_found(httplib::Response& res, const std::string& what) {
  set_error(res, 404, "not_found", "not_found", what);
}

/// Runs a handler body, mapping exceptions onto error responses. Malformed
/// input is the caller's fault (400); typed service errors are 409 so the
/// client can tell them from transport problems; the rest is 500.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const wire::WireError& e) {
    set_error(res, 400, "wire", "malformed", e.what());
  } catch (const HexError& e) {
    set_error(res, 400, "wire", "malformed", e.what());
  } catch (const DecodeError& e) {
    set_error(res, 400, "wire", "malformed", e.what());
  } catch (const EnclaveError& e) {
    set_error(res, 409, "enclave", enclave_error_name(e.code), e.what());
  } catch (const EsError& e) {
    set_error(res, 409, "es", es_error_name(e.code), e.what());
  } catch (const std::exception& e) {
    set_error(res, 500, "general", "internal", e.what());
  }
}

inline json parse_body(const httplib::Request& req) {
  return wire::parse_json(req.body);
}

inline Digest path_digest(const httplib::Request& req, const char* name) {
  try {
    return Digest::from_hex(req.path_params.at(name));
  } catch (const HexError& e) {
    throw wire::WireError(std::string("path parameter '") + name + "': " + e.what());
  }
}

}  // namespace detail

/// Owns an httplib server on an ephemeral localhost port and the thread that
/// runs it. Subclasses install routes in their constructor; start() binds
/// and serves until stop() or destruction.
class ServerBase {
 public:
  virtual ~ServerBase() { stop(); }

  ServerBase(const ServerBase&) = delete;
  ServerBase& operator=(const ServerBase&) = delete;

  /// Binds and serves in the background. Port 0 picks a fresh ephemeral
  /// port; the bound port is returned either way.
  int start(int port = 0) {
    if (running_) return port_;
    if (port == 0) {
      port_ = srv_.bind_to_any_port(host_);
    } else {
      port_ = srv_.bind_to_port(host_, port) ? port : -1;
    }
    if (port_ <= 0) throw HttpError("cannot bind a listening socket");
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    // listen_after_bind signals readiness through is_running.
    for (int i = 0; i < 5000 && !srv_.is_running(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    if (!srv_.is_running()) throw HttpError("server thread failed to start");
    running_ = true;
    return port_;
  }

  void stop() {
    if (!running_) return;
    srv_.stop();
    if (thread_.joinable()) thread_.join();
    running_ = false;
  }

  /// Blocks until the server stops; for foreground `serve` processes.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  const std::string& host() const { return host_; }

  /// Must be called before start().
  void set_host(std::string host) { host_ = std::move(host); }

 protected:
  explicit ServerBase(std::string host = "127.0.0.1") : host_(std::move(host)) {}

  httplib::Server srv_;

 private:
  std::string host_;
  std::thread thread_;
  int port_ = 0;
  bool running_ = false;
};

// ---------------------------------------------------------------------------
// Ledger

class LedgerServer final : public ServerBase {
 public:
  explicit LedgerServer(LedgerApi& ledger) : ledger_(ledger) {
    srv_.Post("/submit", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        json body = detail::parse_body(req);
        Transaction txn = transaction_decode(wire::take_hex(body, "transaction"));
        detail::set_json(res, 200, wire::submit_result_to_json(ledger_.submit(txn)));
      });
    });
    srv_.Get("/enclave/:id", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        auto rec = ledger_.get_enclave(detail::path_digest(req, "id"));
        if (!rec) return detail::set_not_found(res, "no such enclave");
        detail::set_json(res, 200, wire::enclave_record_to_json(*rec));
      });
    });
    srv_.Get("/contract/:id", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        auto rec = ledger_.get_contract(detail::path_digest(req, "id"));
        if (!rec) return detail::set_not_found(res, "no such contract");
        detail::set_json(res, 200, wire::contract_record_to_json(*rec));
      });
    });
    srv_.Get("/head/:cid", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        auto head = ledger_.get_head(detail::path_digest(req, "cid"));
        if (!head) return detail::set_not_found(res, "no state for this contract");
        detail::set_json(res, 200, json{{"head", head->hex()}});
      });
    });
    srv_.Get("/entry/:cid/:hash", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        auto entry =
            ledger_.get_entry(detail::path_digest(req, "cid"), detail::path_digest(req, "hash"));
        if (!entry) return detail::set_not_found(res, "no such state");
        detail::set_json(res, 200, wire::ccl_entry_to_json(*entry));
      });
    });
    srv_.Get("/genesis", [this](const httplib::Request&, httplib::Response& res) {
      detail::guarded(res, [&] { detail::set_json(res, 200, wire::genesis_to_json(ledger_.genesis())); });
    });
  }

 private:
  LedgerApi& ledger_;
};

// ---------------------------------------------------------------------------
// Attestation

class IasServer final : public ServerBase {
 public:
  explicit IasServer(IasApi& ias) : ias_(ias) {
    srv_.Post("/verify", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        Quote q = wire::quote_from_json(wire::member(detail::parse_body(req), "quote"));
        detail::set_json(res, 200, wire::report_to_json(ias_.ias_verify(q)));
      });
    });
    srv_.Get("/root", [this](const httplib::Request&, httplib::Response& res) {
      detail::guarded(res,
                      [&] { detail::set_json(res, 200, json{{"root_pub", ias_.root_pub().hex()}}); });
    });
  }

 private:
  IasApi& ias_;
};

// ---------------------------------------------------------------------------
// Provisioning service

class PsServer final : public ServerBase {
 public:
  explicit PsServer(PsApi& ps) : ps_(ps) {
    srv_.Get("/id", [this](const httplib::Request&, httplib::Response& res) {
      detail::guarded(res, [&] { detail::set_json(res, 200, json{{"ps_id", ps_.ps_id().hex()}}); });
    });
    srv_.Post("/provision", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        json body = detail::parse_body(req);
        PsProvisionResult r = ps_.provision(wire::take_fixed<Digest>(body, "contract_id"),
                                            wire::take_fixed<Digest>(body, "enclave_id"));
        detail::set_json(res, 200, wire::ps_result_to_json(r));
      });
    });
  }

 private:
  PsApi& ps_;
};

// ---------------------------------------------------------------------------
// Enclave service

class EsServer final : public ServerBase {
 public:
  explicit EsServer(EsApi& es) : es_(es) {
    srv_.Get("/enclaves", [this](const httplib::Request&, httplib::Response& res) {
      detail::guarded(res, [&] {
        json list = json::array();
        for (const HostedEnclaveInfo& i : es_.enclaves()) list.push_back(wire::hosted_info_to_json(i));
        detail::set_json(res, 200, json{{"enclaves", std::move(list)}});
      });
    });
    srv_.Post("/launch", [this](const httplib::Request&, httplib::Response& res) {
      detail::guarded(res,
                      [&] { detail::set_json(res, 200, wire::launch_outcome_to_json(es_.launch())); });
    });
    srv_.Post("/provision", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        json body = detail::parse_body(req);
        std::vector<SecretBundle> bundles;
        for (const json& b : wire::take_array(body, "bundles")) {
          bundles.push_back(wire::secret_bundle_from_json(b));
        }
        Signature proof = es_.relay_provisioning(
            wire::take_fixed<Digest>(body, "enclave_id"),
            wire::descriptor_from_json(wire::member(body, "contract")), bundles);
        detail::set_json(res, 200, json{{"proof", proof.hex()}});
      });
    });
    srv_.Post("/invoke", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        json body = detail::parse_body(req);
        InvokeOutput out =
            es_.relay_invoke(wire::take_fixed<Digest>(body, "enclave_id"),
                             wire::invocation_request_from_json(wire::member(body, "request")));
        detail::set_json(res, 200, wire::invoke_output_to_json(out));
      });
    });
    srv_.Get("/state/:hash", [this](const httplib::Request& req, httplib::Response& res) {
      detail::guarded(res, [&] {
        auto blob = es_.get_state(detail::path_digest(req, "hash"));
        if (!blob) return detail::set_not_found(res, "no such state blob");
        detail::set_json(res, 200, json{{"blob", hex_encode(*blob)}});
      });
    });
  }

 private:
  EsApi& es_;
};

// ---------------------------------------------------------------------------
// Client plumbing

namespace detail {

/// Decodes an error body and throws the matching typed exception.
[[noreturn]] inline void throw_error_body(int status, const std::string& body) {
  std::string kind = "general";
  std::string code;
  std::string message = "HTTP " + std::to_string(status);
  try {
    json j = wire::parse_json(body);
    const json& err = wire::member(j, "error");
    kind = wire::take_string(err, "kind");
    code = wire::take_string(err, "code");
    message = wire::take_string(err, "message");
  } catch (const wire::WireError&) {
    throw HttpError(message + ": " + body.substr(0, 200));
  }
  if (kind == "enclave") {
    if (auto c = enclave_error_from_name(code)) throw EnclaveError(*c, message);
  }
  if (kind == "es") {
    if (auto c = es_error_from_name(code)) throw EsError(*c, message);
  }
  if (kind == "wire") throw wire::WireError(message);
  throw HttpError("service error (" + kind + "/" + code + "): " + message);
}

/// One service endpoint. httplib clients are not safe for concurrent calls,
/// so every request takes the lock.
class Endpoint {
 public:
  Endpoint(const std::string& host, int port) : cli_(host, port) {
    cli_.set_connection_timeout(5, 0);
    cli_.set_read_timeout(30, 0);
  }

  /// GET that treats 404 as "absent" and returns nullopt for it.
  std::optional<json> get_optional(const std::string& path) {
    std::lock_guard lock(mu_);
    httplib::Result r = cli_.Get(path);
    if (!r) throw HttpError("cannot reach service for GET " + path);
    if (r->status == 404) return std::nullopt;
    if (r->status != 200) throw_error_body(r->status, r->body);
    return wire::parse_json(r->body);
  }

  json get(const std::string& path) {
    auto r = get_optional(path);
    if (!r) throw HttpError("unexpected 404 for GET " + path);
    return *r;
  }

  json post(const std::string& path, const json& body) {
    std::lock_guard lock(mu_);
    httplib::Result r = cli_.Post(path, body.dump(), "application/json");
    if (!r) throw HttpError("cannot reach service for POST " + path);
    if (r->status != 200) throw_error_body(r->status, r->body);
    return wire::parse_json(r->body);
  }

 private:
  httplib::Client cli_;
  std::mutex mu_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Clients

class HttpLedgerClient final : public LedgerApi {
 public:
  HttpLedgerClient(const std::string& host, int port) : ep_(host, port) {}

  SubmitResult submit(const Transaction& txn) override {
    json body{{"transaction", hex_encode(transaction_bytes(txn))}};
    return wire::submit_result_from_json(ep_.post("/submit", body));
  }

  std::optional<EnclaveRecord> get_enclave(const Digest& enclave_id) override {
    auto j = ep_.get_optional("/enclave/" + enclave_id.hex());
    if (!j) return std::nullopt;
    return wire::enclave_record_from_json(*j);
  }

  std::optional<ContractRecord> get_contract(const Digest& contract_id) override {
    auto j = ep_.get_optional("/contract/" + contract_id.hex());
    if (!j) return std::nullopt;
    return wire::contract_record_from_json(*j);
  }

  std::optional<Digest> get_head(const Digest& contract_id) override {
    auto j = ep_.get_optional("/head/" + contract_id.hex());
    if (!j) return std::nullopt;
    return wire::take_fixed<Digest>(*j, "head");
  }

  std::optional<CclEntry> get_entry(const Digest& contract_id, const Digest& state_hash) override {
    auto j = ep_.get_optional("/entry/" + contract_id.hex() + "/" + state_hash.hex());
    if (!j) return std::nullopt;
    return wire::ccl_entry_from_json(*j);
  }

  GenesisConfig genesis() override { return wire::genesis_from_json(ep_.get("/genesis")); }

 private:
  detail::Endpoint ep_;
};

class HttpIasClient final : public IasApi {
 public:
  HttpIasClient(const std::string& host, int port) : ep_(host, port) {}

  VerificationReport ias_verify(const Quote& quote) override {
    return wire::report_from_json(ep_.post("/verify", json{{"quote", wire::quote_to_json(quote)}}));
  }

  VerificationKey root_pub() override {
    return wire::take_fixed<VerificationKey>(ep_.get("/root"), "root_pub");
  }

 private:
  detail::Endpoint ep_;
};

class HttpPsClient final : public PsApi {
 public:
  HttpPsClient(const std::string& host, int port) : ep_(host, port) {}

  VerificationKey ps_id() override {
    return wire::take_fixed<VerificationKey>(ep_.get("/id"), "ps_id");
  }

  PsProvisionResult provision(const Digest& contract_id, const Digest& enclave_id) override {
    json body{{"contract_id", contract_id.hex()}, {"enclave_id", enclave_id.hex()}};
    return wire::ps_result_from_json(ep_.post("/provision", body));
  }

 private:
  detail::Endpoint ep_;
};

class HttpEsClient final : public EsApi {
 public:
  HttpEsClient(const std::string& host, int port) : ep_(host, port) {}

  std::vector<HostedEnclaveInfo> enclaves() override {
    json j = ep_.get("/enclaves");
    std::vector<HostedEnclaveInfo> out;
    for (const json& i : wire::take_array(j, "enclaves")) {
      out.push_back(wire::hosted_info_from_json(i));
    }
    return out;
  }

  LaunchOutcome launch() override {
    return wire::launch_outcome_from_json(ep_.post("/launch", json::object()));
  }

  Signature relay_provisioning(const Digest& enclave_id, const ContractDescriptor& contract,
                               const std::vector<SecretBundle>& bundles) override {
    json jb = json::array();
    for (const SecretBundle& b : bundles) jb.push_back(wire::secret_bundle_to_json(b));
    json body{{"enclave_id", enclave_id.hex()},
              {"contract", wire::descriptor_to_json(contract)},
              {"bundles", std::move(jb)}};
    return wire::take_fixed<Signature>(ep_.post("/provision", body), "proof");
  }

  InvokeOutput relay_invoke(const Digest& enclave_id, const InvocationRequest& req) override {
    json body{{"enclave_id", enclave_id.hex()},
              {"request", wire::invocation_request_to_json(req)}};
    return wire::invoke_output_from_json(ep_.post("/invoke", body));
  }

  std::optional<Bytes> get_state(const Digest& state_hash) override {
    auto j = ep_.get_optional("/state/" + state_hash.hex());
    if (!j) return std::nullopt;
    return wire::take_hex(*j, "blob");
  }

 private:
  detail::Endpoint ep_;
};

}  // namespace pdo::http
