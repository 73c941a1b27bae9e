// Copyright 2026 The ARFNet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "arfnet/tensor.hpp"

// Single-file archive of named arrays plus string metadata.
//
// Layout (all integers little-endian):
//   magic      8 bytes  "ARFNETA\0"
//   version    string   kFormatVersion
//   u32        metadata count, then (string key, string value) pairs
//   u32        entry count, then per entry:
//                string name
//                u8     dtype (1 = float64, 2 = uint8, 3 = int64)
//                u32    rank
//                u64    dims[rank]
//                bytes  row-major payload, numel * sizeof(dtype)
//   string = u32 byte length followed by the bytes.
namespace arfnet::archive {

inline constexpr char kFormatVersion[] = "arfnet-archive/1";

enum class DType : std::uint8_t {
  kFloat64 = 1,
  kUInt8 = 2,
  kInt64 = 3,
};

struct Entry {
  DType dtype = DType::kFloat64;
  Shape shape;
  std::vector<std::uint8_t> payload;
};

class Archive {
 public:
  std::map<std::string, std::string> metadata;

  void put(const std::string& name, const Tensor& t);
  void put_u8(const std::string& name, const std::vector<std::uint8_t>& values);
  void put_i64(const std::string& name, const std::vector<std::int64_t>& values);

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const Entry& entry(const std::string& name) const;
  Tensor tensor(const std::string& name) const;
  std::vector<std::uint8_t> u8(const std::string& name) const;
  std::vector<std::int64_t> i64(const std::string& name) const;

  /// Entry names in insertion order.
  std::vector<std::string> names() const;

  const std::string& meta(const std::string& key) const;

  std::vector<std::uint8_t> serialize() const;
  static Archive deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  void put_entry(const std::string& name, Entry e);

  std::vector<std::pair<std::string, Entry>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace arfnet::archive
