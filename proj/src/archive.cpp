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

#include "arfnet/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "arfnet/errors.hpp"

namespace arfnet::archive {
namespace {

static_assert(std::endian::native == std::endian::little,
              "archive writer assumes a little-endian host");

constexpr char kMagic[8] = {'A', 'R', 'F', 'N', 'E', 'T', 'A', '\0'};

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kFloat64: return 8;
    case DType::kUInt8: return 1;
    case DType::kInt64: return 8;
  }
  throw IoError("archive: unknown dtype");
}

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void pod(T v) { raw(&v, sizeof(T)); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    if (n > in_.size() - pos_) throw IoError("archive: truncated data");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

void Archive::put_entry(const std::string& name, Entry e) {
  auto it = index_.find(name);
  if (it != index_.end()) {
    entries_[it->second].second = std::move(e);
    return;
  }
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(e));
}

void Archive::put(const std::string& name, const Tensor& t) {
  Entry e{DType::kFloat64, t.shape(), std::vector<std::uint8_t>(t.size() * 8)};
  if (t.size()) std::memcpy(e.payload.data(), t.ptr(), e.payload.size());
  put_entry(name, std::move(e));
}

void Archive::put_u8(const std::string& name, const std::vector<std::uint8_t>& values) {
  put_entry(name, Entry{DType::kUInt8, {values.size()}, values});
}

void Archive::put_i64(const std::string& name, const std::vector<std::int64_t>& values) {
  Entry e{DType::kInt64, {values.size()}, std::vector<std::uint8_t>(values.size() * 8)};
  if (!values.empty()) std::memcpy(e.payload.data(), values.data(), e.payload.size());
  put_entry(name, std::move(e));
}

const Entry& Archive::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IoError("archive: no entry named '" + name + "'");
  return entries_[it->second].second;
}

Tensor Archive::tensor(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kFloat64) throw IoError("archive: entry '" + name + "' is not float64");
  Tensor t(e.shape);
  if (t.size()) std::memcpy(t.ptr(), e.payload.data(), e.payload.size());
  return t;
}

std::vector<std::uint8_t> Archive::u8(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kUInt8) throw IoError("archive: entry '" + name + "' is not uint8");
  return e.payload;
}

std::vector<std::int64_t> Archive::i64(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kInt64) throw IoError("archive: entry '" + name + "' is not int64");
  std::vector<std::int64_t> v(e.payload.size() / 8);
  if (!v.empty()) std::memcpy(v.data(), e.payload.data(), e.payload.size());
  return v;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : entries_) out.push_back(n);
  return out;
}

const std::string& Archive::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw IoError("archive: missing metadata key '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> Archive::serialize() const {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.str(kFormatVersion);
  w.pod(static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    w.str(name);
    w.pod(static_cast<std::uint8_t>(e.dtype));
    w.pod(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.pod(static_cast<std::uint64_t>(d));
    w.raw(e.payload.data(), e.payload.size());
  }
  return w.take();
}

Archive Archive::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("archive: bad magic");
  const std::string version = r.str();
  if (version != kFormatVersion) {
    throw IoError("archive: unsupported format version '" + version + "'");
  }
  Archive a;
  const auto nmeta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    a.metadata[k] = r.str();
  }
  const auto nentries = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < nentries; ++i) {
    std::string name = r.str();
    Entry e;
    const auto dt = r.pod<std::uint8_t>();
    if (dt < 1 || dt > 3) throw IoError("archive: entry '" + name + "' has unknown dtype");
    e.dtype = static_cast<DType>(dt);
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw IoError("archive: entry '" + name + "' has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
    e.payload.resize(shape_numel(e.shape) * dtype_size(e.dtype));
    r.raw(e.payload.data(), e.payload.size());
    a.put_entry(name, std::move(e));
  }
  if (!r.done()) throw IoError("archive: trailing bytes");
  return a;
}

void Archive::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("archive: cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("archive: short write to '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("archive: cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " in '" + path.string() + "'");
  }
}

}  // namespace arfnet::archive
