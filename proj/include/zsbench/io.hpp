/*
 * Copyright 2026 The zsbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Small text/binary helpers shared by the loaders and writers.

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "zsbench/error.hpp"

namespace zsbench::io {

// Reads LF-terminated lines, tracking the line number for error messages.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) {
      if (in_.bad()) fail(ErrorCode::kIo, "read failure in " + source_);
      return false;
    }
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }
  const std::string& source() const { return source_; }

  [[noreturn]] void error(const std::string& message) const {
    fail_at(source_, line_no_, message);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

inline bool is_blank_or_comment(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t') return false;
  }
  return true;
}

inline std::vector<std::string_view> split(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits on runs of spaces; empty fields are dropped.
inline std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    auto start = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Shortest representation that parses back to the same float.
inline void append_float(std::string& out, float v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

inline void append_double(std::string& out, double v) {
  std::array<char, 40> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

inline std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

// Fixed-precision formatting for human-facing reports.
inline std::string fixed(double v, int digits = 6) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::fixed, digits);
  return std::string(buf.data(), ptr);
}

// Little-endian primitives for the binary formats.
template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  std::array<char, sizeof(T)> bytes;
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

inline void write_le_float(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  write_le(out, bits);
}

template <typename T>
T read_le(std::istream& in, std::string_view what) {
  static_assert(std::is_integral_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    fail(ErrorCode::kParse, "truncated binary input reading " + std::string(what));
  }
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(bytes[i]) << (8 * i);
  return static_cast<T>(u);
}

inline float read_le_float(std::istream& in, std::string_view what) {
  auto bits = read_le<std::uint32_t>(in, what);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline void write_string32(std::ostream& out, std::string_view s) {
  write_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string32(std::istream& in, std::string_view what,
                                 std::uint32_t max_len = 1u << 24) {
  auto len = read_le<std::uint32_t>(in, what);
  if (len > max_len) fail(ErrorCode::kParse, "implausible length for " + std::string(what));
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) {
    fail(ErrorCode::kParse, "truncated binary input reading " + std::string(what));
  }
  return s;
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data,
                           std::uint64_t hash = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return s;
}

inline std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

// Writes the whole payload to a sibling temp file then renames it into place,
// so readers never observe a partially written output.
inline void write_atomic(const std::filesystem::path& path, std::string_view payload,
                         bool overwrite) {
  namespace fs = std::filesystem;
  if (!overwrite && fs::exists(path)) {
    fail(ErrorCode::kIo, path.string() + " exists (use --force to overwrite)");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) fail(ErrorCode::kIo, "write failure on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorCode::kIo, "rename to " + path.string() + " failed: " + ec.message());
  }
}

}  // namespace zsbench::io
