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
#include <vector>

#include "arfnet/backbone.hpp"
#include "arfnet/data.hpp"
#include "arfnet/pipeline.hpp"

// Flat `key = value` configuration with a fixed, typed schema. Lines starting
// with '#' and blank lines are ignored. Unknown keys and malformed values
// raise ConfigError naming the key.
namespace arfnet::config {

enum class ValueType {
  kUInt,
  kDouble,
  kBool,
  kString,
  kUIntList,  // comma-separated, may be empty
};

struct KeySpec {
  std::string key;
  ValueType type;
  std::string default_value;
  std::string doc;
};

const std::vector<KeySpec>& schema();

class Config {
 public:
  Config();

  void set(const std::string& key, const std::string& value);
  /// "key=value"; whitespace around either side is trimmed.
  void apply_override(const std::string& assignment);
  void merge_text(const std::string& text, const std::string& origin);
  void merge_file(const std::filesystem::path& path);

  const std::string& raw(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_uint_list(const std::string& key) const;

  /// Every key in schema order, one `key = value` line each.
  std::string dump() const;

  data::DomainSpec domain_spec() const;
  backbone::BlockSpec block_spec() const;
  pipeline::TrainConfig pretrain_config() const;
  pipeline::TrainConfig adapt_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace arfnet::config
