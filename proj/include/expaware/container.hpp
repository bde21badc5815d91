// Copyright 2026 The expaware Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Versioned binary container used for corpus and model checkpoints.
//
// Layout (all integers little-endian):
//
//   bytes 0..7    magic "EXPAWARE"
//   u32           container format version
//   u64           header length H
//   H bytes       UTF-8 JSON header:
//                   {"kind": "...", "version": N, "meta": {...},
//                    "sections": [{"name": s, "dtype": "f64"|"u32"|"i64",
//                                  "count": n}, ...]}
//   payload       section arrays, concatenated in header order
//
// The header alone is enough to decode the payload, so files can be
// inspected with nothing but a JSON parser and the table above.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "expaware/common.hpp"

namespace expaware {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

inline constexpr std::string_view kContainerMagic = "EXPAWARE";
inline constexpr std::uint32_t kContainerFormat = 1;

namespace detail {

template <typename T>
constexpr std::string_view dtype_name() {
  if constexpr (std::is_same_v<T, double>) return "f64";
  else if constexpr (std::is_same_v<T, std::uint32_t>) return "u32";
  else if constexpr (std::is_same_v<T, std::int64_t>) return "i64";
  else static_assert(sizeof(T) == 0, "unsupported section type");
}

inline std::size_t dtype_size(std::string_view dtype) {
  if (dtype == "f64" || dtype == "i64") return 8;
  if (dtype == "u32") return 4;
  throw VersionError("unknown section dtype '" + std::string(dtype) + "'");
}

template <typename T>
void append_raw(std::string& out, const T& value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace detail

class ContainerWriter {
 public:
  ContainerWriter(std::string kind, std::uint32_t version)
      : kind_(std::move(kind)), version_(version) {}

  nlohmann::json& meta() { return meta_; }

  template <typename T>
  void add(const std::string& name, std::span<const T> data) {
    sections_.push_back({{"name", name},
                         {"dtype", detail::dtype_name<T>()},
                         {"count", data.size()}});
    payload_.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
  }

  template <typename T>
  void add(const std::string& name, const std::vector<T>& data) {
    add(name, std::span<const T>(data));
  }

  std::string bytes() const {
    nlohmann::json header = {{"kind", kind_},
                             {"version", version_},
                             {"meta", meta_},
                             {"sections", sections_}};
    const std::string text = header.dump();
    std::string out(kContainerMagic);
    detail::append_raw(out, kContainerFormat);
    detail::append_raw(out, static_cast<std::uint64_t>(text.size()));
    out += text;
    out += payload_;
    return out;
  }

 private:
  std::string kind_;
  std::uint32_t version_;
  nlohmann::json meta_ = nlohmann::json::object();
  nlohmann::json sections_ = nlohmann::json::array();
  std::string payload_;
};

class Container {
 public:
  /// Parses `bytes`; throws VersionError when the magic, format, kind or
  /// version do not match.
  Container(std::string_view bytes, std::string_view expected_kind,
            std::uint32_t expected_version) {
    const std::size_t fixed = kContainerMagic.size() + 4 + 8;
    if (bytes.size() < fixed || bytes.substr(0, kContainerMagic.size()) != kContainerMagic)
      throw VersionError("not an expaware checkpoint (bad magic)");
    std::uint32_t format = 0;
    std::uint64_t header_len = 0;
    std::memcpy(&format, bytes.data() + kContainerMagic.size(), 4);
    std::memcpy(&header_len, bytes.data() + kContainerMagic.size() + 4, 8);
    if (format != kContainerFormat)
      throw VersionError("unsupported container format " + std::to_string(format));
    if (bytes.size() < fixed + header_len) throw VersionError("truncated checkpoint header");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(bytes.substr(fixed, header_len));
    } catch (const nlohmann::json::exception& e) {
      throw VersionError(std::string("corrupt checkpoint header: ") + e.what());
    }
    const std::string kind = header.at("kind").get<std::string>();
    if (kind != expected_kind)
      throw VersionError("expected a '" + std::string(expected_kind) +
                         "' checkpoint, found '" + kind + "'");
    const auto version = header.at("version").get<std::uint32_t>();
    if (version != expected_version)
      throw VersionError("'" + kind + "' checkpoint version " + std::to_string(version) +
                         " is not supported (expected " + std::to_string(expected_version) + ")");
    meta_ = header.at("meta");

    std::size_t offset = fixed + header_len;
    for (const auto& s : header.at("sections")) {
      const std::string dtype = s.at("dtype").get<std::string>();
      const std::size_t n = s.at("count").get<std::size_t>() * detail::dtype_size(dtype);
      if (offset + n > bytes.size()) throw VersionError("truncated checkpoint payload");
      sections_[s.at("name").get<std::string>()] = {dtype, bytes.substr(offset, n)};
      offset += n;
    }
  }

  const nlohmann::json& meta() const { return meta_; }

  bool has(const std::string& name) const { return sections_.contains(name); }

  template <typename T>
  std::vector<T> get(const std::string& name) const {
    auto it = sections_.find(name);
    if (it == sections_.end()) throw VersionError("checkpoint lacks section '" + name + "'");
    if (it->second.dtype != detail::dtype_name<T>())
      throw VersionError("section '" + name + "' has dtype " + it->second.dtype);
    std::vector<T> out(it->second.bytes.size() / sizeof(T));
    std::memcpy(out.data(), it->second.bytes.data(), it->second.bytes.size());
    return out;
  }

 private:
  struct Section {
    std::string dtype;
    std::string_view bytes;
  };
  nlohmann::json meta_;
  std::map<std::string, Section> sections_;
};

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

}  // namespace expaware
