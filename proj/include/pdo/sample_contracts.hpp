// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Built-in sample contracts, embedded so scenarios and tools work without a
// source checkout. The contracts/ directory holds the same sources
// byte-for-byte; a test keeps them in sync.

#pragma once

#include <string_view>
#include <vector>

#include "pdo/bytes.hpp"

namespace pdo::samples {

inline constexpr std::string_view kCounter =
    R"pdo(; A monotone counter. init stores zero, inc advances by one and returns the
; new value, get reports the current value without touching state.

(method init ()
  (list (assoc-set state "value" 0) 0))

(method inc ()
  (let ((next (+ (assoc-get state "value") 1)))
    (list (assoc-set state "value" next) next)))

(method get ()
  (list state (assoc-get state "value")))
)pdo";

inline constexpr std::string_view kEscrow =
    R"pdo(; A single token whose owner can place it in escrow with a named agent.
; While escrowed the owner cannot move it; the agent either releases it back
; or transfers it to a buyer. Identities are caller-supplied names; what
; counts is the committed ledger entry, not who asked.

(method init (owner)
  (list (assoc-set (assoc-set state "owner" owner) "escrow" "") owner))

(method escrow (agent)
  (if (string=? (assoc-get state "escrow") "")
      (list (assoc-set state "escrow" agent) "escrowed")
      (list state "already-escrowed")))

(method release ()
  (if (string=? (assoc-get state "escrow") "")
      (list state "not-escrowed")
      (list (assoc-set state "escrow" "") "released")))

(method transfer (buyer)
  (if (string=? (assoc-get state "escrow") "")
      (list state "not-escrowed")
      (list (assoc-set (assoc-set state "owner" buyer) "escrow" "")
            (string-append "owner:" buyer))))

(method holder ()
  (list state (assoc-get state "owner")))
)pdo";

inline constexpr std::string_view kAuction =
    R"pdo(; An ascending auction. Bids carry a bidder name and an amount; only a bid
; strictly above the current best changes state. close stops the auction and
; reports the winner.

(method init (seller)
  (list (assoc-set (assoc-set (assoc-set state "seller" seller)
                              "best-bid" 0)
                   "open" #t)
        seller))

(method bid (who amount)
  (if (assoc-get state "open")
      (if (> amount (assoc-get state "best-bid"))
          (list (assoc-set (assoc-set state "best-bid" amount) "best-bidder" who)
                "accepted")
          (list state "too-low"))
      (list state "closed")))

(method best ()
  (list state (assoc-get state "best-bid")))

(method close ()
  (if (assoc-get state "open")
      (let ((winner (if (assoc-has? state "best-bidder")
                        (assoc-get state "best-bidder")
                        "")))
        (list (assoc-set state "open" #f)
              (list winner (assoc-get state "best-bid"))))
      (list state "closed")))
)pdo";

struct Sample {
  std::string_view name;
  std::string_view source;
};

inline const std::vector<Sample>& all() {
  static const std::vector<Sample> kSamples = {
      {"auction", kAuction},
      {"counter", kCounter},
      {"escrow", kEscrow},
  };
  return kSamples;
}

inline std::string_view by_name(std::string_view name) {
  for (const Sample& s : all()) {
    if (s.name == name) return s.source;
  }
  throw Error("unknown sample contract: " + std::string(name));
}

}  // namespace pdo::samples
