// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// The contract interpreter: a small, pure s-expression language.
//
// A contract is a sequence of method definitions:
//
//   (method transfer (to amount)
//     (list (assoc-set state "balance" (- (assoc-get state "balance") amount))
//           amount))
//
// Every method receives the current state through the implicit binding
// `state` and must evaluate to a two-element list (new-state result).
//
// Properties the rest of the system depends on:
//   - deterministic: no I/O, no clock, no randomness, no float arithmetic;
//     integers are arbitrary precision, so there is no overflow nondeterminism
//   - sandboxed: the only names a contract can reach are its own definitions
//     plus the fixed builtin allowlist exposed by primitive_names()
//   - bounded: evaluation charges one step per reduction and aborts once the
//     step budget is exhausted; method and lambda calls in tail position reuse
//     the evaluation frame, so a non-terminating loop burns budget, not stack
//   - canonical source: parse + render normalizes whitespace, comments and
//     method order; code_hash is the digest of that canonical text

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pdo/bytes.hpp"
#include "pdo/crypto.hpp"
#include "pdo/encoding.hpp"

namespace pdo::interp {

using Int = boost::multiprecision::cpp_int;

inline constexpr std::string_view kInterpreterVersion = "pdo-scheme/1.0";

struct ParseError : Error {
  size_t line;
  size_t col;
  ParseError(const std::string& msg, size_t line_, size_t col_)
      : Error(msg + " (line " + std::to_string(line_) + ", col " + std::to_string(col_) + ")"),
        line(line_),
        col(col_) {}
};

struct EvalError : Error {
  enum class Kind {
    unknown_method,
    arity,
    type,
    unbound,
    budget,
    depth,
    bad_result,
    not_encodable,
  };
  Kind kind;
  EvalError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

// ---------------------------------------------------------------------------
// Values

struct Value;
using List = std::vector<Value>;

struct Symbol {
  std::string name;
  auto operator<=>(const Symbol&) const = default;
};

struct AssocEntry;

/// Immutable string-keyed map with entries kept sorted by key, so its
/// canonical encoding is order-independent of how it was built.
class Assoc {
 public:
  Assoc() = default;

  const Value* find(std::string_view key) const;
  bool has(std::string_view key) const;
  Assoc set(std::string key, Value v) const;
  Assoc del(std::string_view key) const;
  std::vector<std::string> keys() const;

  const std::vector<AssocEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  std::vector<AssocEntry> entries_;
};

struct Env;
using EnvPtr = std::shared_ptr<Env>;

struct Closure;
using ClosurePtr = std::shared_ptr<const Closure>;

struct Value {
  using Variant = std::variant<Int, bool, std::string, Symbol, List, Assoc, ClosurePtr>;
  Variant v;

  Value() : v(Int(0)) {}
  Value(const Value&) = default;
  Value(Value&&) = default;

  // Assignment must survive aliasing: the evaluator routinely rebinds an
  // expression to one of its own subexpressions (`expr = form[2]`). The
  // by-value parameter finishes copying out of the old storage before the
  // swap tears it down.
  Value& operator=(Value other) noexcept {
    v.swap(other.v);
    return *this;
  }

  static Value integer(Int i) { return make(std::move(i)); }
  static Value integer(long long i) { return make(Int(i)); }
  static Value boolean(bool b) { return make(b); }
  static Value str(std::string s) { return make(std::move(s)); }
  static Value symbol(std::string s) { return make(Symbol{std::move(s)}); }
  static Value list(List items) { return make(std::move(items)); }
  static Value assoc(Assoc a) { return make(std::move(a)); }
  static Value closure(ClosurePtr c) { return make(std::move(c)); }

  bool is_int() const { return std::holds_alternative<Int>(v); }
  bool is_bool() const { return std::holds_alternative<bool>(v); }
  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_symbol() const { return std::holds_alternative<Symbol>(v); }
  bool is_list() const { return std::holds_alternative<List>(v); }
  bool is_assoc() const { return std::holds_alternative<Assoc>(v); }
  bool is_closure() const { return std::holds_alternative<ClosurePtr>(v); }

  const Int& as_int() const { return std::get<Int>(v); }
  bool as_bool() const { return std::get<bool>(v); }
  const std::string& as_string() const { return std::get<std::string>(v); }
  const Symbol& as_symbol() const { return std::get<Symbol>(v); }
  const List& as_list() const { return std::get<List>(v); }
  const Assoc& as_assoc() const { return std::get<Assoc>(v); }
  const ClosurePtr& as_closure() const { return std::get<ClosurePtr>(v); }

  friend bool operator==(const Value& a, const Value& b);

 private:
  template <typename T>
  static Value make(T&& t) {
    Value out;
    out.v = std::forward<T>(t);
    return out;
  }
};

struct AssocEntry {
  std::string key;
  Value value;
};

struct Closure {
  std::vector<std::string> params;
  Value body;
  EnvPtr env;
};

inline bool operator==(const Value& a, const Value& b) {
  if (a.v.index() != b.v.index()) return false;
  if (a.is_int()) return a.as_int() == b.as_int();
  if (a.is_bool()) return a.as_bool() == b.as_bool();
  if (a.is_string()) return a.as_string() == b.as_string();
  if (a.is_symbol()) return a.as_symbol() == b.as_symbol();
  if (a.is_list()) {
    const List& la = a.as_list();
    const List& lb = b.as_list();
    if (la.size() != lb.size()) return false;
    for (size_t i = 0; i < la.size(); ++i) {
      if (!(la[i] == lb[i])) return false;
    }
    return true;
  }
  if (a.is_assoc()) {
    const auto& ea = a.as_assoc().entries();
    const auto& eb = b.as_assoc().entries();
    if (ea.size() != eb.size()) return false;
    for (size_t i = 0; i < ea.size(); ++i) {
      if (ea[i].key != eb[i].key || !(ea[i].value == eb[i].value)) return false;
    }
    return true;
  }
  return a.as_closure() == b.as_closure();
}

inline const Value* Assoc::find(std::string_view key) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const AssocEntry& e, std::string_view k) { return e.key < k; });
  if (it != entries_.end() && it->key == key) return &it->value;
  return nullptr;
}

inline bool Assoc::has(std::string_view key) const { return find(key) != nullptr; }

inline Assoc Assoc::set(std::string key, Value v) const {
  Assoc out = *this;
  auto it = std::lower_bound(out.entries_.begin(), out.entries_.end(), key,
                             [](const AssocEntry& e, const std::string& k) { return e.key < k; });
  if (it != out.entries_.end() && it->key == key) {
    it->value = std::move(v);
  } else {
    out.entries_.insert(it, AssocEntry{std::move(key), std::move(v)});
  }
  return out;
}

inline Assoc Assoc::del(std::string_view key) const {
  Assoc out = *this;
  auto it = std::lower_bound(out.entries_.begin(), out.entries_.end(), key,
                             [](const AssocEntry& e, std::string_view k) { return e.key < k; });
  if (it != out.entries_.end() && it->key == key) out.entries_.erase(it);
  return out;
}

inline std::vector<std::string> Assoc::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const AssocEntry& e : entries_) out.push_back(e.key);
  return out;
}

// ---------------------------------------------------------------------------
// Canonical value encoding
//
// Values cross trust boundaries (state blobs, invocation arguments, results)
// as canonical byte strings: a two-element list of a type tag and a payload.
// Integers are canonical decimal text; assoc entries are sorted by key. The
// decoder rejects anything a conforming encoder could not have produced.

inline bool is_canonical_int_text(std::string_view s) {
  if (s.empty()) return false;
  size_t i = 0;
  if (s[0] == '-') {
    if (s.size() == 1) return false;
    i = 1;
  }
  for (size_t j = i; j < s.size(); ++j) {
    if (s[j] < '0' || s[j] > '9') return false;
  }
  if (s.size() - i > 1 && s[i] == '0') return false;  // no leading zeros
  if (s[0] == '-' && s == "-0") return false;
  return true;
}

inline Bytes encode_value(const Value& val) {
  if (val.is_int()) {
    return enc::v_list({enc::v_string("i"), enc::v_string(val.as_int().str())});
  }
  if (val.is_bool()) {
    return enc::v_list({enc::v_string("b"), enc::v_u64(val.as_bool() ? 1 : 0)});
  }
  if (val.is_string()) {
    return enc::v_list({enc::v_string("s"), enc::v_string(val.as_string())});
  }
  if (val.is_symbol()) {
    return enc::v_list({enc::v_string("y"), enc::v_string(val.as_symbol().name)});
  }
  if (val.is_list()) {
    std::vector<Bytes> items;
    items.reserve(val.as_list().size());
    for (const Value& item : val.as_list()) items.push_back(encode_value(item));
    return enc::v_list({enc::v_string("l"), enc::v_list(items)});
  }
  if (val.is_assoc()) {
    std::vector<Bytes> items;
    items.reserve(val.as_assoc().size());
    for (const AssocEntry& e : val.as_assoc().entries()) {
      items.push_back(enc::v_list({enc::v_string(e.key), encode_value(e.value)}));
    }
    return enc::v_list({enc::v_string("a"), enc::v_list(items)});
  }
  throw EvalError(EvalError::Kind::not_encodable, "closures cannot be encoded");
}

namespace detail {

inline Value decode_tvalue(const enc::TValue& t, int depth) {
  if (depth > 64) throw DecodeError("value nested too deeply");
  const auto& pair = t.as_list();
  if (pair.size() != 2) throw DecodeError("malformed value encoding");
  const std::string& tag = pair[0].as_string();
  if (tag == "i") {
    const std::string& text = pair[1].as_string();
    if (!is_canonical_int_text(text)) throw DecodeError("non-canonical integer literal");
    return Value::integer(Int(text));
  }
  if (tag == "b") {
    uint64_t b = pair[1].as_u64();
    if (b > 1) throw DecodeError("malformed boolean");
    return Value::boolean(b == 1);
  }
  if (tag == "s") return Value::str(pair[1].as_string());
  if (tag == "y") return Value::symbol(pair[1].as_string());
  if (tag == "l") {
    List items;
    items.reserve(pair[1].as_list().size());
    for (const enc::TValue& item : pair[1].as_list()) {
      items.push_back(decode_tvalue(item, depth + 1));
    }
    return Value::list(std::move(items));
  }
  if (tag == "a") {
    Assoc a;
    std::string prev;
    bool first = true;
    for (const enc::TValue& item : pair[1].as_list()) {
      const auto& kv = item.as_list();
      if (kv.size() != 2) throw DecodeError("malformed assoc entry");
      const std::string& key = kv[0].as_string();
      if (!first && key <= prev) throw DecodeError("assoc keys not in canonical order");
      a = a.set(key, decode_tvalue(kv[1], depth + 1));
      prev = key;
      first = false;
    }
    return Value::assoc(std::move(a));
  }
  throw DecodeError("unknown value type tag");
}

}  // namespace detail

inline Value decode_value(BytesView data) {
  return detail::decode_tvalue(enc::parse(data), 0);
}

/// True when the value contains no closure anywhere; only such values may
/// appear in contract state, arguments or results.
inline bool is_encodable(const Value& val) {
  if (val.is_closure()) return false;
  if (val.is_list()) {
    for (const Value& item : val.as_list()) {
      if (!is_encodable(item)) return false;
    }
  }
  if (val.is_assoc()) {
    for (const AssocEntry& e : val.as_assoc().entries()) {
      if (!is_encodable(e.value)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Reader

namespace detail {

inline bool is_symbol_start(char c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
  return std::string_view("+-*/<>=!?._%&$:@^~").find(c) != std::string_view::npos;
}

inline bool is_symbol_char(char c) {
  return is_symbol_start(c) || (c >= '0' && c <= '9');
}

struct Token {
  enum class Kind { lparen, rparen, quote, integer, string, boolean, symbol, eof };
  Kind kind;
  std::string text;
  bool bvalue = false;
  size_t line = 1;
  size_t col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.col = col_;
    if (pos_ >= src_.size()) {
      t.kind = Token::Kind::eof;
      return t;
    }
    char c = src_[pos_];
    if (c == '(') {
      advance();
      t.kind = Token::Kind::lparen;
      return t;
    }
    if (c == ')') {
      advance();
      t.kind = Token::Kind::rparen;
      return t;
    }
    if (c == '\'') {
      advance();
      t.kind = Token::Kind::quote;
      return t;
    }
    if (c == '"') return lex_string(t);
    if (c == '#') return lex_hash(t);
    bool negative_number = (c == '-' && pos_ + 1 < src_.size() && isdigit_(src_[pos_ + 1]));
    if (isdigit_(c) || negative_number) return lex_int(t);
    if (is_symbol_start(c)) return lex_symbol(t);
    throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
  }

 private:
  static bool isdigit_(char c) { return c >= '0' && c <= '9'; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  Token lex_string(Token t) {
    advance();  // opening quote
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) throw ParseError("unterminated string", t.line, t.col);
      char c = src_[pos_];
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= src_.size()) throw ParseError("unterminated escape", line_, col_);
        char e = src_[pos_];
        switch (e) {
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case 'r': out.push_back('\r'); break;
          default:
            throw ParseError("unknown escape sequence", line_, col_);
        }
        advance();
        continue;
      }
      if (static_cast<unsigned char>(c) < 0x20) {
        throw ParseError("raw control character in string", line_, col_);
      }
      out.push_back(c);
      advance();
    }
    t.kind = Token::Kind::string;
    t.text = std::move(out);
    return t;
  }

  Token lex_hash(Token t) {
    advance();
    if (pos_ < src_.size() && (src_[pos_] == 't' || src_[pos_] == 'f')) {
      char c = src_[pos_];
      advance();
      if (pos_ < src_.size() && is_symbol_char(src_[pos_])) {
        throw ParseError("malformed boolean literal", t.line, t.col);
      }
      t.kind = Token::Kind::boolean;
      t.bvalue = (c == 't');
      return t;
    }
    throw ParseError("malformed '#' literal", t.line, t.col);
  }

  Token lex_int(Token t) {
    std::string out;
    if (src_[pos_] == '-') {
      out.push_back('-');
      advance();
    }
    while (pos_ < src_.size() && isdigit_(src_[pos_])) {
      out.push_back(src_[pos_]);
      advance();
    }
    if (pos_ < src_.size() && is_symbol_char(src_[pos_])) {
      throw ParseError("malformed integer literal", t.line, t.col);
    }
    t.kind = Token::Kind::integer;
    t.text = std::move(out);
    return t;
  }

  Token lex_symbol(Token t) {
    std::string out;
    while (pos_ < src_.size() && is_symbol_char(src_[pos_])) {
      out.push_back(src_[pos_]);
      advance();
    }
    t.kind = Token::Kind::symbol;
    t.text = std::move(out);
    return t;
  }

  std::string_view src_;
  size_t pos_ = 0;
  size_t line_ = 1;
  size_t col_ = 1;
};

class Reader {
 public:
  explicit Reader(std::string_view src) : lexer_(src) { cur_ = lexer_.next(); }

  bool at_eof() const { return cur_.kind == Token::Kind::eof; }
  const Token& peek() const { return cur_; }

  Value read() {
    Token t = cur_;
    switch (t.kind) {
      case Token::Kind::eof:
        throw ParseError("unexpected end of input", t.line, t.col);
      case Token::Kind::rparen:
        throw ParseError("unmatched ')'", t.line, t.col);
      case Token::Kind::integer:
        consume();
        return Value::integer(Int(t.text));
      case Token::Kind::string:
        consume();
        return Value::str(t.text);
      case Token::Kind::boolean:
        consume();
        return Value::boolean(t.bvalue);
      case Token::Kind::symbol:
        consume();
        return Value::symbol(t.text);
      case Token::Kind::quote: {
        consume();
        List items;
        items.push_back(Value::symbol("quote"));
        items.push_back(read());
        return Value::list(std::move(items));
      }
      case Token::Kind::lparen: {
        consume();
        List items;
        while (cur_.kind != Token::Kind::rparen) {
          if (cur_.kind == Token::Kind::eof) throw ParseError("unmatched '('", t.line, t.col);
          items.push_back(read());
        }
        consume();
        return Value::list(std::move(items));
      }
    }
    throw ParseError("unreachable token", t.line, t.col);
  }

 private:
  void consume() { cur_ = lexer_.next(); }

  Lexer lexer_;
  Token cur_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Rendering

inline void render_expr(const Value& val, std::string& out) {
  if (val.is_int()) {
    out += val.as_int().str();
    return;
  }
  if (val.is_bool()) {
    out += val.as_bool() ? "#t" : "#f";
    return;
  }
  if (val.is_string()) {
    out.push_back('"');
    for (char c : val.as_string()) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c);
      }
    }
    out.push_back('"');
    return;
  }
  if (val.is_symbol()) {
    out += val.as_symbol().name;
    return;
  }
  if (val.is_list()) {
    out.push_back('(');
    const List& items = val.as_list();
    for (size_t i = 0; i < items.size(); ++i) {
      if (i > 0) out.push_back(' ');
      render_expr(items[i], out);
    }
    out.push_back(')');
    return;
  }
  if (val.is_assoc()) {
    // Assocs have no source literal; this form only appears in diagnostics.
    out += "#assoc(";
    const auto& entries = val.as_assoc().entries();
    for (size_t i = 0; i < entries.size(); ++i) {
      if (i > 0) out.push_back(' ');
      Value k = Value::str(entries[i].key);
      render_expr(k, out);
      out.push_back(' ');
      render_expr(entries[i].value, out);
    }
    out.push_back(')');
    return;
  }
  out += "#closure";
}

inline std::string to_text(const Value& val) {
  std::string out;
  render_expr(val, out);
  return out;
}

// ---------------------------------------------------------------------------
// Programs

struct Method {
  std::string name;
  std::vector<std::string> params;
  Value body;
};

struct Program {
  std::vector<Method> methods;  // sorted by name
  std::string canonical_text;
  Digest code_hash;

  const Method* find(std::string_view name) const {
    auto it = std::lower_bound(methods.begin(), methods.end(), name,
                               [](const Method& m, std::string_view n) { return m.name < n; });
    if (it != methods.end() && it->name == name) return &*it;
    return nullptr;
  }
};

const std::vector<std::string>& primitive_names();

inline const std::vector<std::string>& special_form_names() {
  static const std::vector<std::string> kNames = {"and", "begin", "if",     "lambda",
                                                  "let", "or",    "quote"};
  return kNames;
}

inline bool is_special_form(std::string_view name) {
  const auto& names = special_form_names();
  return std::binary_search(names.begin(), names.end(), name);
}

inline bool is_primitive(std::string_view name) {
  const auto& names = primitive_names();
  return std::binary_search(names.begin(), names.end(), name);
}

namespace detail {

inline void check_bindable_name(const std::string& name, std::string_view what) {
  if (is_special_form(name) || is_primitive(name)) {
    throw ParseError(std::string(what) + " name '" + name + "' collides with a builtin", 0, 0);
  }
}

}  // namespace detail

/// Parses contract source into a Program. Top-level forms must all be
/// (method NAME (PARAM...) BODY). Methods are sorted by name, the canonical
/// text is rendered and the code hash computed over it.
inline Program parse_program(std::string_view source) {
  detail::Reader reader(source);
  Program prog;
  while (!reader.at_eof()) {
    const detail::Token& t = reader.peek();
    size_t line = t.line;
    size_t col = t.col;
    Value form = reader.read();
    if (!form.is_list()) throw ParseError("top-level form must be a method definition", line, col);
    const List& items = form.as_list();
    if (items.size() != 4 || !items[0].is_symbol() || items[0].as_symbol().name != "method") {
      throw ParseError("top-level form must be (method name (params) body)", line, col);
    }
    if (!items[1].is_symbol()) throw ParseError("method name must be a symbol", line, col);
    Method m;
    m.name = items[1].as_symbol().name;
    detail::check_bindable_name(m.name, "method");
    if (!items[2].is_list()) throw ParseError("method parameter list malformed", line, col);
    for (const Value& p : items[2].as_list()) {
      if (!p.is_symbol()) throw ParseError("method parameter must be a symbol", line, col);
      const std::string& pname = p.as_symbol().name;
      detail::check_bindable_name(pname, "parameter");
      if (std::find(m.params.begin(), m.params.end(), pname) != m.params.end()) {
        throw ParseError("duplicate parameter '" + pname + "'", line, col);
      }
      m.params.push_back(pname);
    }
    m.body = items[3];
    if (std::any_of(prog.methods.begin(), prog.methods.end(),
                    [&](const Method& other) { return other.name == m.name; })) {
      throw ParseError("duplicate method '" + m.name + "'", line, col);
    }
    prog.methods.push_back(std::move(m));
  }
  std::sort(prog.methods.begin(), prog.methods.end(),
            [](const Method& a, const Method& b) { return a.name < b.name; });

  std::string text;
  for (size_t i = 0; i < prog.methods.size(); ++i) {
    if (i > 0) text.push_back('\n');
    const Method& m = prog.methods[i];
    text += "(method ";
    text += m.name;
    text += " (";
    for (size_t j = 0; j < m.params.size(); ++j) {
      if (j > 0) text.push_back(' ');
      text += m.params[j];
    }
    text += ") ";
    render_expr(m.body, text);
    text.push_back(')');
  }
  prog.canonical_text = std::move(text);
  prog.code_hash = crypto::hash(prog.canonical_text);
  return prog;
}

inline std::string canonicalize(std::string_view source) {
  return parse_program(source).canonical_text;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalOptions {
  uint64_t step_budget = 1'000'000;
  uint32_t max_depth = 2048;
  std::optional<std::string> caller;
};

struct Outcome {
  Value new_state;
  Value result;
  uint64_t steps = 0;
};

struct Env {
  std::map<std::string, Value> vars;
  EnvPtr parent;

  const Value* lookup(const std::string& name) const {
    for (const Env* e = this; e != nullptr; e = e->parent.get()) {
      auto it = e->vars.find(name);
      if (it != e->vars.end()) return &it->second;
    }
    return nullptr;
  }
};

namespace detail {

struct Ctx {
  const Program& prog;
  const EvalOptions& opts;
  uint64_t steps = 0;
  uint32_t depth = 0;

  void charge() {
    if (++steps > opts.step_budget) {
      throw EvalError(EvalError::Kind::budget, "step budget exhausted");
    }
  }
};

struct DepthGuard {
  Ctx& ctx;
  explicit DepthGuard(Ctx& c) : ctx(c) {
    if (++ctx.depth > ctx.opts.max_depth) {
      throw EvalError(EvalError::Kind::depth, "recursion depth limit exceeded");
    }
  }
  ~DepthGuard() { --ctx.depth; }
};

using PrimFn = Value (*)(List&, Ctx&);

const std::map<std::string, PrimFn>& primitives();

Value eval(Value expr, EnvPtr env, Ctx& ctx);

// --- primitive helpers ---

inline const Int& want_int(const Value& v, const char* who) {
  if (!v.is_int()) throw EvalError(EvalError::Kind::type, std::string(who) + ": expected integer");
  return v.as_int();
}

inline bool want_bool(const Value& v, const char* who) {
  if (!v.is_bool()) throw EvalError(EvalError::Kind::type, std::string(who) + ": expected boolean");
  return v.as_bool();
}

inline const std::string& want_string(const Value& v, const char* who) {
  if (!v.is_string()) throw EvalError(EvalError::Kind::type, std::string(who) + ": expected string");
  return v.as_string();
}

inline const List& want_list(const Value& v, const char* who) {
  if (!v.is_list()) throw EvalError(EvalError::Kind::type, std::string(who) + ": expected list");
  return v.as_list();
}

inline const Assoc& want_assoc(const Value& v, const char* who) {
  if (!v.is_assoc()) throw EvalError(EvalError::Kind::type, std::string(who) + ": expected assoc");
  return v.as_assoc();
}

inline void want_arity(const List& args, size_t n, const char* who) {
  if (args.size() != n) {
    throw EvalError(EvalError::Kind::arity,
                    std::string(who) + ": expected " + std::to_string(n) + " arguments, got " +
                        std::to_string(args.size()));
  }
}

inline void want_min_arity(const List& args, size_t n, const char* who) {
  if (args.size() < n) {
    throw EvalError(EvalError::Kind::arity, std::string(who) + ": expected at least " +
                                                std::to_string(n) + " arguments");
  }
}

inline void check_comparable(const Value& v, const char* who) {
  if (v.is_closure()) {
    throw EvalError(EvalError::Kind::type, std::string(who) + ": closures are not comparable");
  }
  if (v.is_list()) {
    for (const Value& item : v.as_list()) check_comparable(item, who);
  }
  if (v.is_assoc()) {
    for (const AssocEntry& e : v.as_assoc().entries()) check_comparable(e.value, who);
  }
}

// --- primitives ---

inline Value prim_add(List& args, Ctx&) {
  Int acc = 0;
  for (const Value& a : args) acc += want_int(a, "+");
  return Value::integer(std::move(acc));
}

inline Value prim_sub(List& args, Ctx&) {
  want_min_arity(args, 1, "-");
  Int acc = want_int(args[0], "-");
  if (args.size() == 1) return Value::integer(-acc);
  for (size_t i = 1; i < args.size(); ++i) acc -= want_int(args[i], "-");
  return Value::integer(std::move(acc));
}

inline Value prim_mul(List& args, Ctx&) {
  Int acc = 1;
  for (const Value& a : args) acc *= want_int(a, "*");
  return Value::integer(std::move(acc));
}

inline Value prim_quotient(List& args, Ctx&) {
  want_arity(args, 2, "quotient");
  const Int& b = want_int(args[1], "quotient");
  if (b == 0) throw EvalError(EvalError::Kind::type, "quotient: division by zero");
  return Value::integer(Int(want_int(args[0], "quotient") / b));
}

inline Value prim_remainder(List& args, Ctx&) {
  want_arity(args, 2, "remainder");
  const Int& b = want_int(args[1], "remainder");
  if (b == 0) throw EvalError(EvalError::Kind::type, "remainder: division by zero");
  return Value::integer(Int(want_int(args[0], "remainder") % b));
}

template <typename Cmp>
Value prim_compare(List& args, const char* who, Cmp cmp) {
  want_min_arity(args, 2, who);
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (!cmp(want_int(args[i], who), want_int(args[i + 1], who))) return Value::boolean(false);
  }
  return Value::boolean(true);
}

inline Value prim_num_eq(List& args, Ctx&) {
  return prim_compare(args, "=", [](const Int& a, const Int& b) { return a == b; });
}
inline Value prim_lt(List& args, Ctx&) {
  return prim_compare(args, "<", [](const Int& a, const Int& b) { return a < b; });
}
inline Value prim_gt(List& args, Ctx&) {
  return prim_compare(args, ">", [](const Int& a, const Int& b) { return a > b; });
}
inline Value prim_le(List& args, Ctx&) {
  return prim_compare(args, "<=", [](const Int& a, const Int& b) { return a <= b; });
}
inline Value prim_ge(List& args, Ctx&) {
  return prim_compare(args, ">=", [](const Int& a, const Int& b) { return a >= b; });
}

inline Value prim_not(List& args, Ctx&) {
  want_arity(args, 1, "not");
  return Value::boolean(!want_bool(args[0], "not"));
}

inline Value prim_equal(List& args, Ctx&) {
  want_arity(args, 2, "equal?");
  check_comparable(args[0], "equal?");
  check_comparable(args[1], "equal?");
  return Value::boolean(args[0] == args[1]);
}

inline Value prim_cons(List& args, Ctx&) {
  want_arity(args, 2, "cons");
  const List& tail = want_list(args[1], "cons");
  List out;
  out.reserve(tail.size() + 1);
  out.push_back(args[0]);
  out.insert(out.end(), tail.begin(), tail.end());
  return Value::list(std::move(out));
}

inline Value prim_car(List& args, Ctx&) {
  want_arity(args, 1, "car");
  const List& l = want_list(args[0], "car");
  if (l.empty()) throw EvalError(EvalError::Kind::type, "car: empty list");
  return l.front();
}

inline Value prim_cdr(List& args, Ctx&) {
  want_arity(args, 1, "cdr");
  const List& l = want_list(args[0], "cdr");
  if (l.empty()) throw EvalError(EvalError::Kind::type, "cdr: empty list");
  return Value::list(List(l.begin() + 1, l.end()));
}

inline Value prim_list(List& args, Ctx&) { return Value::list(args); }

inline Value prim_null(List& args, Ctx&) {
  want_arity(args, 1, "null?");
  return Value::boolean(want_list(args[0], "null?").empty());
}

inline Value prim_assoc_get(List& args, Ctx&) {
  want_arity(args, 2, "assoc-get");
  const Assoc& a = want_assoc(args[0], "assoc-get");
  const std::string& key = want_string(args[1], "assoc-get");
  const Value* found = a.find(key);
  if (!found) throw EvalError(EvalError::Kind::type, "assoc-get: missing key '" + key + "'");
  return *found;
}

inline Value prim_assoc_set(List& args, Ctx&) {
  want_arity(args, 3, "assoc-set");
  const Assoc& a = want_assoc(args[0], "assoc-set");
  return Value::assoc(a.set(want_string(args[1], "assoc-set"), args[2]));
}

inline Value prim_assoc_del(List& args, Ctx&) {
  want_arity(args, 2, "assoc-del");
  const Assoc& a = want_assoc(args[0], "assoc-del");
  return Value::assoc(a.del(want_string(args[1], "assoc-del")));
}

inline Value prim_assoc_has(List& args, Ctx&) {
  want_arity(args, 2, "assoc-has?");
  const Assoc& a = want_assoc(args[0], "assoc-has?");
  return Value::boolean(a.has(want_string(args[1], "assoc-has?")));
}

inline Value prim_assoc_keys(List& args, Ctx&) {
  want_arity(args, 1, "assoc-keys");
  List out;
  for (std::string& k : want_assoc(args[0], "assoc-keys").keys()) {
    out.push_back(Value::str(std::move(k)));
  }
  return Value::list(std::move(out));
}

inline Value prim_assoc_empty(List& args, Ctx&) {
  want_arity(args, 0, "assoc-empty");
  return Value::assoc(Assoc());
}

inline Value prim_string_append(List& args, Ctx&) {
  std::string out;
  for (const Value& a : args) out += want_string(a, "string-append");
  return Value::str(std::move(out));
}

inline Value prim_string_eq(List& args, Ctx&) {
  want_min_arity(args, 2, "string=?");
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (want_string(args[i], "string=?") != want_string(args[i + 1], "string=?")) {
      return Value::boolean(false);
    }
  }
  return Value::boolean(true);
}

inline Value prim_string_length(List& args, Ctx&) {
  want_arity(args, 1, "string-length");
  return Value::integer(Int(want_string(args[0], "string-length").size()));
}

inline Value prim_digest(List& args, Ctx&) {
  want_arity(args, 1, "digest");
  if (!is_encodable(args[0])) {
    throw EvalError(EvalError::Kind::type, "digest: value is not encodable");
  }
  return Value::str(crypto::hash(encode_value(args[0])).hex());
}

inline Value prim_caller(List& args, Ctx& ctx) {
  want_arity(args, 0, "caller");
  if (!ctx.opts.caller) {
    throw EvalError(EvalError::Kind::type, "caller: no caller identity available");
  }
  return Value::str(*ctx.opts.caller);
}

inline const std::map<std::string, PrimFn>& primitives_impl() {
  static const std::map<std::string, PrimFn> kPrims = {
      {"+", prim_add},
      {"-", prim_sub},
      {"*", prim_mul},
      {"quotient", prim_quotient},
      {"remainder", prim_remainder},
      {"=", prim_num_eq},
      {"<", prim_lt},
      {">", prim_gt},
      {"<=", prim_le},
      {">=", prim_ge},
      {"not", prim_not},
      {"equal?", prim_equal},
      {"cons", prim_cons},
      {"car", prim_car},
      {"cdr", prim_cdr},
      {"list", prim_list},
      {"null?", prim_null},
      {"assoc-get", prim_assoc_get},
      {"assoc-set", prim_assoc_set},
      {"assoc-del", prim_assoc_del},
      {"assoc-has?", prim_assoc_has},
      {"assoc-keys", prim_assoc_keys},
      {"assoc-empty", prim_assoc_empty},
      {"string-append", prim_string_append},
      {"string=?", prim_string_eq},
      {"string-length", prim_string_length},
      {"digest", prim_digest},
      {"caller", prim_caller},
  };
  return kPrims;
}

inline const std::map<std::string, PrimFn>& primitives() { return primitives_impl(); }

// --- evaluator ---

inline Value eval(Value expr, EnvPtr env, Ctx& ctx) {
  DepthGuard guard(ctx);
  while (true) {
    ctx.charge();

    if (!expr.is_list() && !expr.is_symbol()) return expr;

    if (expr.is_symbol()) {
      const std::string& name = expr.as_symbol().name;
      if (const Value* bound = env->lookup(name)) return *bound;
      if (ctx.prog.find(name) || primitives().count(name) || is_special_form(name)) {
        throw EvalError(EvalError::Kind::type, "'" + name + "' is not a value");
      }
      throw EvalError(EvalError::Kind::unbound, "unbound name '" + name + "'");
    }

    const List& form = expr.as_list();
    if (form.empty()) {
      throw EvalError(EvalError::Kind::type, "cannot evaluate the empty list");
    }

    if (form[0].is_symbol()) {
      const std::string& head = form[0].as_symbol().name;

      if (head == "quote") {
        if (form.size() != 2) throw EvalError(EvalError::Kind::arity, "quote: expected 1 form");
        return form[1];
      }
      if (head == "if") {
        if (form.size() != 4) {
          throw EvalError(EvalError::Kind::arity, "if: expected (if cond then else)");
        }
        Value cond = eval(form[1], env, ctx);
        bool taken = want_bool(cond, "if");
        expr = taken ? form[2] : form[3];
        continue;  // tail position
      }
      if (head == "begin") {
        if (form.size() < 2) throw EvalError(EvalError::Kind::arity, "begin: expected forms");
        for (size_t i = 1; i + 1 < form.size(); ++i) eval(form[i], env, ctx);
        expr = form.back();
        continue;  // tail position
      }
      if (head == "let") {
        if (form.size() != 3 || !form[1].is_list()) {
          throw EvalError(EvalError::Kind::arity, "let: expected (let ((name expr)...) body)");
        }
        auto child = std::make_shared<Env>();
        child->parent = env;
        for (const Value& binding : form[1].as_list()) {
          if (!binding.is_list() || binding.as_list().size() != 2 ||
              !binding.as_list()[0].is_symbol()) {
            throw EvalError(EvalError::Kind::type, "let: malformed binding");
          }
          const std::string& name = binding.as_list()[0].as_symbol().name;
          if (is_special_form(name) || primitives().count(name)) {
            throw EvalError(EvalError::Kind::type,
                            "let: name '" + name + "' collides with a builtin");
          }
          if (child->vars.count(name)) {
            throw EvalError(EvalError::Kind::type, "let: duplicate binding '" + name + "'");
          }
          child->vars.emplace(name, eval(binding.as_list()[1], env, ctx));
        }
        env = child;
        expr = form[2];
        continue;  // tail position
      }
      if (head == "lambda") {
        if (form.size() != 3 || !form[1].is_list()) {
          throw EvalError(EvalError::Kind::arity, "lambda: expected (lambda (params) body)");
        }
        auto closure = std::make_shared<Closure>();
        for (const Value& p : form[1].as_list()) {
          if (!p.is_symbol()) throw EvalError(EvalError::Kind::type, "lambda: bad parameter");
          const std::string& name = p.as_symbol().name;
          if (is_special_form(name) || primitives().count(name)) {
            throw EvalError(EvalError::Kind::type,
                            "lambda: name '" + name + "' collides with a builtin");
          }
          if (std::find(closure->params.begin(), closure->params.end(), name) !=
              closure->params.end()) {
            throw EvalError(EvalError::Kind::type, "lambda: duplicate parameter '" + name + "'");
          }
          closure->params.push_back(name);
        }
        closure->body = form[2];
        closure->env = env;
        return Value::closure(std::move(closure));
      }
      if (head == "and" || head == "or") {
        bool is_and = (head == "and");
        for (size_t i = 1; i < form.size(); ++i) {
          bool b = want_bool(eval(form[i], env, ctx), head.c_str());
          if (is_and && !b) return Value::boolean(false);
          if (!is_and && b) return Value::boolean(true);
        }
        return Value::boolean(is_and);
      }
    }

    // Application. Resolve the callee, evaluate arguments, then either invoke
    // a primitive or jump into the callee body (proper tail call).
    enum class CalleeKind { closure, method, primitive };
    CalleeKind kind;
    ClosurePtr closure;
    const Method* method = nullptr;
    PrimFn prim = nullptr;
    std::string who;

    if (form[0].is_symbol()) {
      const std::string& name = form[0].as_symbol().name;
      who = name;
      if (const Value* bound = env->lookup(name)) {
        if (!bound->is_closure()) {
          throw EvalError(EvalError::Kind::type, "'" + name + "' is not callable");
        }
        kind = CalleeKind::closure;
        closure = bound->as_closure();
      } else if (const Method* m = ctx.prog.find(name)) {
        kind = CalleeKind::method;
        method = m;
      } else {
        auto it = primitives().find(name);
        if (it == primitives().end()) {
          throw EvalError(EvalError::Kind::unbound, "unbound function '" + name + "'");
        }
        kind = CalleeKind::primitive;
        prim = it->second;
      }
    } else {
      Value head = eval(form[0], env, ctx);
      if (!head.is_closure()) {
        throw EvalError(EvalError::Kind::type, "call head does not evaluate to a function");
      }
      kind = CalleeKind::closure;
      closure = head.as_closure();
      who = "closure";
    }

    List argv;
    argv.reserve(form.size() - 1);
    for (size_t i = 1; i < form.size(); ++i) argv.push_back(eval(form[i], env, ctx));

    if (kind == CalleeKind::primitive) return prim(argv, ctx);

    const std::vector<std::string>& params =
        (kind == CalleeKind::method) ? method->params : closure->params;
    if (argv.size() != params.size()) {
      throw EvalError(EvalError::Kind::arity,
                      who + ": expected " + std::to_string(params.size()) + " arguments, got " +
                          std::to_string(argv.size()));
    }

    auto child = std::make_shared<Env>();
    if (kind == CalleeKind::method) {
      // Methods are lexically scoped at the program root: they see their
      // parameters and the implicit state binding, never the caller's locals.
      EnvPtr root = env;
      while (root->parent) root = root->parent;
      child->parent = root;
    } else {
      child->parent = closure->env;
    }
    for (size_t i = 0; i < params.size(); ++i) {
      child->vars.emplace(params[i], std::move(argv[i]));
    }
    env = child;
    expr = (kind == CalleeKind::method) ? method->body : closure->body;
    // tail position: loop
  }
}

}  // namespace detail

inline const std::vector<std::string>& primitive_names() {
  static const std::vector<std::string> kNames = [] {
    std::vector<std::string> names;
    for (const auto& [name, fn] : detail::primitives_impl()) names.push_back(name);
    return names;
  }();
  return kNames;
}

/// Runs one method against a state value. The returned Outcome carries the
/// new state, the caller-visible result and the exact number of evaluation
/// steps charged (identical across re-executions of the same inputs).
inline Outcome eval_method(const Program& prog, const std::string& method_name,
                           const Value& state, const List& args, const EvalOptions& opts = {}) {
  const Method* m = prog.find(method_name);
  if (!m) {
    throw EvalError(EvalError::Kind::unknown_method, "unknown method '" + method_name + "'");
  }
  if (args.size() != m->params.size()) {
    throw EvalError(EvalError::Kind::arity,
                    method_name + ": expected " + std::to_string(m->params.size()) +
                        " arguments, got " + std::to_string(args.size()));
  }
  auto root = std::make_shared<Env>();
  root->vars.emplace("state", state);
  auto frame = std::make_shared<Env>();
  frame->parent = root;
  for (size_t i = 0; i < args.size(); ++i) frame->vars.emplace(m->params[i], args[i]);

  detail::Ctx ctx{prog, opts};
  Value out = detail::eval(m->body, frame, ctx);

  if (!out.is_list() || out.as_list().size() != 2) {
    throw EvalError(EvalError::Kind::bad_result,
                    method_name + ": method must return (new-state result)");
  }
  Outcome outcome;
  outcome.new_state = out.as_list()[0];
  outcome.result = out.as_list()[1];
  outcome.steps = ctx.steps;
  if (!is_encodable(outcome.new_state) || !is_encodable(outcome.result)) {
    throw EvalError(EvalError::Kind::not_encodable,
                    method_name + ": closures cannot escape evaluation");
  }
  return outcome;
}

}  // namespace pdo::interp
