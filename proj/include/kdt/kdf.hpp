// Copyright 2026 The kdt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KDT_KDF_HPP_
#define KDT_KDF_HPP_

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdt/common.hpp"
#include "kdt/features.hpp"
#include "kdt/tensor.hpp"

namespace kdt {

/// Feature container: magic "KDF1", u32 little-endian JSON header length,
/// JSON header, then raw little-endian f32 payload in row-major order.
struct KdfFile {
  std::string layout;                    // "kdi" | "kds"
  std::vector<std::size_t> sample_shape; // per-sample shape
  std::vector<std::string> channel_order;
  double clip_ms = 5000.0;
  std::vector<std::string> user_ids;     // one per sample
  std::vector<int> labels;               // optional; empty or one per sample
  std::vector<Tensor<float>> samples;
};

namespace detail {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

inline void write_f32_le(std::ostream& out, const float* p, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(p),
              static_cast<std::streamsize>(n * 4));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t v;
      std::memcpy(&v, p + i, 4);
      char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                   static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
      out.write(b, 4);
    }
  }
}

inline void read_f32_le(std::istream& in, float* p, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 4));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      unsigned char b[4];
      in.read(reinterpret_cast<char*>(b), 4);
      std::uint32_t v = static_cast<std::uint32_t>(b[0]) |
                        (static_cast<std::uint32_t>(b[1]) << 8) |
                        (static_cast<std::uint32_t>(b[2]) << 16) |
                        (static_cast<std::uint32_t>(b[3]) << 24);
      std::memcpy(p + i, &v, 4);
    }
  }
}

/// Write-to-temp then atomic rename; failed writes leave no partial file.
class AtomicWriter {
 public:
  explicit AtomicWriter(const std::filesystem::path& target)
      : target_(target), tmp_(target.string() + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open " + tmp_.string() + " for writing");
  }
  ~AtomicWriter() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }
  std::ostream& stream() { return out_; }
  void commit() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + tmp_.string());
    out_.close();
    std::filesystem::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  std::filesystem::path target_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

}  // namespace detail

inline void write_kdf(const KdfFile& f, const std::filesystem::path& path) {
  if (!f.labels.empty() && f.labels.size() != f.samples.size())
    throw ArgumentError("KDF labels must be empty or match sample count");
  if (f.user_ids.size() != f.samples.size())
    throw ArgumentError("KDF user_ids must match sample count");
  std::size_t numel = Tensor<float>::numel_of(f.sample_shape);
  for (const auto& s : f.samples)
    if (s.shape != f.sample_shape)
      throw DimensionError("KDF sample shape mismatch: got " +
                           shape_str(s.shape) + " want " +
                           shape_str(f.sample_shape));

  nlohmann::json hdr;
  hdr["dtype"] = "f32";
  hdr["layout"] = f.layout;
  std::vector<std::size_t> full_shape;
  full_shape.push_back(f.samples.size());
  full_shape.insert(full_shape.end(), f.sample_shape.begin(),
                    f.sample_shape.end());
  hdr["shape"] = full_shape;
  hdr["channel_order"] = f.channel_order;
  hdr["normalization"] = {{"clip_ms", f.clip_ms}};
  hdr["user_ids"] = f.user_ids;
  if (!f.labels.empty()) hdr["labels"] = f.labels;

  std::string hs = hdr.dump();
  detail::AtomicWriter w(path);
  auto& out = w.stream();
  out.write("KDF1", 4);
  std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  char lb[4] = {static_cast<char>(len), static_cast<char>(len >> 8),
                static_cast<char>(len >> 16), static_cast<char>(len >> 24)};
  out.write(lb, 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& s : f.samples)
    detail::write_f32_le(out, s.data.data(), numel);
  w.commit();
}

inline KdfFile read_kdf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "KDF1", 4) != 0)
    throw FormatError(path.string() + ": not a KDF file (bad magic)");
  unsigned char lb[4];
  in.read(reinterpret_cast<char*>(lb), 4);
  std::uint32_t len = static_cast<std::uint32_t>(lb[0]) |
                      (static_cast<std::uint32_t>(lb[1]) << 8) |
                      (static_cast<std::uint32_t>(lb[2]) << 16) |
                      (static_cast<std::uint32_t>(lb[3]) << 24);
  std::string hs(len, '\0');
  in.read(hs.data(), len);
  if (!in) throw FormatError(path.string() + ": truncated KDF header");
  nlohmann::json hdr = nlohmann::json::parse(hs);

  KdfFile f;
  f.layout = hdr.at("layout").get<std::string>();
  auto full_shape = hdr.at("shape").get<std::vector<std::size_t>>();
  if (full_shape.empty()) throw FormatError("KDF shape empty");
  std::size_t n = full_shape[0];
  f.sample_shape.assign(full_shape.begin() + 1, full_shape.end());
  if (hdr.contains("channel_order"))
    f.channel_order = hdr["channel_order"].get<std::vector<std::string>>();
  if (hdr.contains("normalization"))
    f.clip_ms = hdr["normalization"].value("clip_ms", 5000.0);
  f.user_ids = hdr.at("user_ids").get<std::vector<std::string>>();
  if (hdr.contains("labels")) f.labels = hdr["labels"].get<std::vector<int>>();

  std::size_t numel = Tensor<float>::numel_of(f.sample_shape);
  f.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor<float> t(f.sample_shape);
    detail::read_f32_le(in, t.data.data(), numel);
    if (!in) throw FormatError(path.string() + ": truncated KDF payload");
    f.samples.push_back(std::move(t));
  }
  return f;
}

inline std::vector<std::string> kdi_channel_order() {
  return {"UD", "DD", "DU", "UU", "duration"};
}

}  // namespace kdt

#endif  // KDT_KDF_HPP_
