// Copyright 2026 pdo contributors
// SPDX-License-Identifier: Apache-2.0
//
// Canonical binary encoding for everything that gets hashed or signed.
//
// Values are tagged and self-delimiting:
//   'B' u32 length, raw bytes
//   'S' u32 length, utf-8 text
//   'U' u64 big-endian
//   'L' u32 count, encoded items
//   'R' u32 count, fields as (u32 name length, name, encoded value),
//       strictly ascending by name
//
// Two distinct in-memory values never share an encoding and the decoder
// rejects any non-canonical byte stream (unsorted or duplicate record fields,
// trailing bytes), so hash-of-encoding works as a value identity.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdo/bytes.hpp"

namespace pdo {

struct DecodeError : Error {
  using Error::Error;
};

namespace enc {

inline void put_u32(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline void put_u64(Bytes& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v >> 32));
  put_u32(out, static_cast<uint32_t>(v));
}

inline Bytes v_bytes(BytesView data) {
  Bytes out;
  out.reserve(5 + data.size());
  out.push_back('B');
  put_u32(out, static_cast<uint32_t>(data.size()));
  append(out, data);
  return out;
}

inline Bytes v_string(std::string_view s) {
  Bytes out;
  out.reserve(5 + s.size());
  out.push_back('S');
  put_u32(out, static_cast<uint32_t>(s.size()));
  append(out, BytesView(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
  return out;
}

inline Bytes v_u64(uint64_t v) {
  Bytes out;
  out.push_back('U');
  put_u64(out, v);
  return out;
}

inline Bytes v_list(const std::vector<Bytes>& items) {
  Bytes out;
  out.push_back('L');
  put_u32(out, static_cast<uint32_t>(items.size()));
  for (const Bytes& item : items) append(out, item);
  return out;
}

/// Builder for record values. Field order in calls is irrelevant; the
/// encoding is sorted by field name.
class Record {
 public:
  Record& put(std::string name, Bytes encoded_value) {
    if (name.empty()) throw Error("record field name must be non-empty");
    auto [it, inserted] = fields_.emplace(std::move(name), std::move(encoded_value));
    if (!inserted) throw Error("duplicate record field: " + it->first);
    return *this;
  }
  Record& put_bytes(std::string name, BytesView data) {
    return put(std::move(name), v_bytes(data));
  }
  Record& put_string(std::string name, std::string_view s) {
    return put(std::move(name), v_string(s));
  }
  Record& put_u64(std::string name, uint64_t v) { return put(std::move(name), v_u64(v)); }
  Record& put_list(std::string name, const std::vector<Bytes>& items) {
    return put(std::move(name), v_list(items));
  }

  Bytes encode() const {
    Bytes out;
    out.push_back('R');
    put_u32(out, static_cast<uint32_t>(fields_.size()));
    for (const auto& [name, value] : fields_) {
      put_u32(out, static_cast<uint32_t>(name.size()));
      append(out, BytesView(reinterpret_cast<const uint8_t*>(name.data()), name.size()));
      append(out, value);
    }
    return out;
  }

 private:
  std::map<std::string, Bytes> fields_;
};

/// Decoded tagged value.
struct TValue {
  char tag = 0;
  Bytes bytes;                                         // 'B'
  std::string str;                                     // 'S'
  uint64_t u64 = 0;                                    // 'U'
  std::vector<TValue> items;                           // 'L'
  std::vector<std::pair<std::string, TValue>> fields;  // 'R', ascending by name

  const Bytes& as_bytes() const {
    if (tag != 'B') throw DecodeError("expected bytes value");
    return bytes;
  }
  const std::string& as_string() const {
    if (tag != 'S') throw DecodeError("expected string value");
    return str;
  }
  uint64_t as_u64() const {
    if (tag != 'U') throw DecodeError("expected integer value");
    return u64;
  }
  const std::vector<TValue>& as_list() const {
    if (tag != 'L') throw DecodeError("expected list value");
    return items;
  }
  bool has_field(std::string_view name) const {
    if (tag != 'R') return false;
    for (const auto& [n, v] : fields) {
      if (n == name) return true;
    }
    return false;
  }
  const TValue& field(std::string_view name) const {
    if (tag != 'R') throw DecodeError("expected record value");
    for (const auto& [n, v] : fields) {
      if (n == name) return v;
    }
    throw DecodeError("missing record field: " + std::string(name));
  }
  size_t field_count() const {
    if (tag != 'R') throw DecodeError("expected record value");
    return fields.size();
  }
};

namespace detail {

inline constexpr int kMaxDepth = 64;

struct Cursor {
  const uint8_t* p;
  const uint8_t* end;

  size_t remaining() const { return static_cast<size_t>(end - p); }
  void need(size_t n) const {
    if (remaining() < n) throw DecodeError("truncated encoding");
  }
  uint8_t take_u8() {
    need(1);
    return *p++;
  }
  uint32_t take_u32() {
    need(4);
    uint32_t v = (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
                 uint32_t(p[3]);
    p += 4;
    return v;
  }
  uint64_t take_u64() {
    uint64_t hi = take_u32();
    return (hi << 32) | take_u32();
  }
  Bytes take_bytes(size_t n) {
    need(n);
    Bytes out(p, p + n);
    p += n;
    return out;
  }
  std::string take_string(size_t n) {
    need(n);
    std::string out(reinterpret_cast<const char*>(p), n);
    p += n;
    return out;
  }
};

inline TValue parse_value(Cursor& c, int depth) {
  if (depth > kMaxDepth) throw DecodeError("encoding nested too deeply");
  TValue v;
  v.tag = static_cast<char>(c.take_u8());
  switch (v.tag) {
    case 'B': {
      uint32_t n = c.take_u32();
      v.bytes = c.take_bytes(n);
      return v;
    }
    case 'S': {
      uint32_t n = c.take_u32();
      v.str = c.take_string(n);
      return v;
    }
    case 'U': {
      v.u64 = c.take_u64();
      return v;
    }
    case 'L': {
      uint32_t n = c.take_u32();
      if (n > c.remaining()) throw DecodeError("list count exceeds input");
      v.items.reserve(n);
      for (uint32_t i = 0; i < n; ++i) v.items.push_back(parse_value(c, depth + 1));
      return v;
    }
    case 'R': {
      uint32_t n = c.take_u32();
      if (n > c.remaining()) throw DecodeError("record count exceeds input");
      v.fields.reserve(n);
      std::string prev;
      for (uint32_t i = 0; i < n; ++i) {
        uint32_t name_len = c.take_u32();
        std::string name = c.take_string(name_len);
        if (name.empty()) throw DecodeError("empty record field name");
        if (i > 0 && name <= prev) throw DecodeError("record fields not in canonical order");
        TValue field = parse_value(c, depth + 1);
        prev = name;
        v.fields.emplace_back(std::move(name), std::move(field));
      }
      return v;
    }
    default:
      throw DecodeError("unknown value tag");
  }
}

}  // namespace detail

/// Parses one canonical value and requires the input to be fully consumed.
inline TValue parse(BytesView data) {
  detail::Cursor c{data.data(), data.data() + data.size()};
  TValue v = detail::parse_value(c, 0);
  if (c.p != c.end) throw DecodeError("trailing bytes after value");
  return v;
}

}  // namespace enc
}  // namespace pdo
