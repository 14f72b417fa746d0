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

#ifndef KDT_NN_CHECKPOINT_HPP_
#define KDT_NN_CHECKPOINT_HPP_

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdt/kdf.hpp"
#include "kdt/nn/network.hpp"

namespace kdt::nn {

namespace detail {

inline const char* b64_chars() {
  return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string b64_encode(const unsigned char* data, std::size_t n) {
  const char* tbl = b64_chars();
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    unsigned v = data[i] << 16;
    if (i + 1 < n) v |= data[i + 1] << 8;
    if (i + 2 < n) v |= data[i + 2];
    out.push_back(tbl[(v >> 18) & 63]);
    out.push_back(tbl[(v >> 12) & 63]);
    out.push_back(i + 1 < n ? tbl[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? tbl[v & 63] : '=');
  }
  return out;
}

inline std::vector<unsigned char> b64_decode(const std::string& s) {
  static int rev[256];
  static bool init = [] {
    for (int& r : rev) r = -1;
    const char* tbl = b64_chars();
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(tbl[i])] = i;
    return true;
  }();
  (void)init;
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  unsigned v = 0;
  int bits = 0;
  for (char c : s) {
    if (c == '=') break;
    int d = rev[static_cast<unsigned char>(c)];
    if (d < 0) throw FormatError("invalid base64 payload");
    v = (v << 6) | static_cast<unsigned>(d);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((v >> bits) & 0xff));
    }
  }
  return out;
}

/// f32 tensor <-> base64 of its little-endian bytes.
inline std::string tensor_b64(const Tensor<float>& t) {
  if constexpr (std::endian::native == std::endian::little) {
    return b64_encode(reinterpret_cast<const unsigned char*>(t.data.data()),
                      t.data.size() * 4);
  } else {
    std::vector<unsigned char> buf(t.data.size() * 4);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      std::uint32_t v;
      std::memcpy(&v, &t.data[i], 4);
      buf[i * 4] = v & 0xff;
      buf[i * 4 + 1] = (v >> 8) & 0xff;
      buf[i * 4 + 2] = (v >> 16) & 0xff;
      buf[i * 4 + 3] = (v >> 24) & 0xff;
    }
    return b64_encode(buf.data(), buf.size());
  }
}

inline void tensor_from_b64(const std::string& s, Tensor<float>& t) {
  auto bytes = b64_decode(s);
  if (bytes.size() != t.data.size() * 4)
    throw FormatError("checkpoint tensor payload size mismatch");
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    std::uint32_t v = static_cast<std::uint32_t>(bytes[i * 4]) |
                      (static_cast<std::uint32_t>(bytes[i * 4 + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[i * 4 + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[i * 4 + 3]) << 24);
    std::memcpy(&t.data[i], &v, 4);
  }
}

}  // namespace detail

struct Checkpoint {
  int format_version = 1;
  std::string model_kind;  // "cnn" | "cnn-rnn"
  std::vector<LayerSpec> layer_specs;
  std::uint64_t rng_seed = 0;
  int epoch = 0;
  nlohmann::json metrics;  // free-form metric summary
  // Parameter payloads, in network order.
  std::vector<std::string> param_names;
  std::vector<std::vector<std::size_t>> param_shapes;
  std::vector<std::string> param_b64;
};

inline Checkpoint snapshot(Network<float>& net, const std::string& model_kind,
                           std::uint64_t rng_seed, int epoch,
                           nlohmann::json metrics = {}) {
  Checkpoint ck;
  ck.model_kind = model_kind;
  ck.layer_specs = net.specs();
  ck.rng_seed = rng_seed;
  ck.epoch = epoch;
  ck.metrics = std::move(metrics);
  for (auto* p : net.params()) {
    ck.param_names.push_back(p->name);
    ck.param_shapes.push_back(p->value.shape);
    ck.param_b64.push_back(detail::tensor_b64(p->value));
  }
  return ck;
}

inline void restore(const Checkpoint& ck, Network<float>& net) {
  auto params = net.params();
  if (params.size() != ck.param_b64.size())
    throw StateError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape != ck.param_shapes[i])
      throw StateError("checkpoint shape mismatch for " + ck.param_names[i]);
    detail::tensor_from_b64(ck.param_b64[i], params[i]->value);
  }
}

inline void save_checkpoint(const Checkpoint& ck,
                            const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = ck.format_version;
  j["model_kind"] = ck.model_kind;
  j["layer_specs"] = ck.layer_specs;
  j["rng_seed"] = ck.rng_seed;
  j["epoch"] = ck.epoch;
  j["metrics"] = ck.metrics;
  auto& params = j["params"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ck.param_b64.size(); ++i)
    params.push_back({{"name", ck.param_names[i]},
                      {"shape", ck.param_shapes[i]},
                      {"data", ck.param_b64[i]}});
  kdt::detail::AtomicWriter w(path);
  w.stream() << j.dump(2) << '\n';
  w.commit();
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  Checkpoint ck;
  ck.format_version = j.at("format_version");
  ck.model_kind = j.at("model_kind");
  ck.layer_specs = j.at("layer_specs").get<std::vector<LayerSpec>>();
  ck.rng_seed = j.at("rng_seed");
  ck.epoch = j.at("epoch");
  ck.metrics = j.value("metrics", nlohmann::json{});
  for (const auto& p : j.at("params")) {
    ck.param_names.push_back(p.at("name"));
    ck.param_shapes.push_back(p.at("shape").get<std::vector<std::size_t>>());
    ck.param_b64.push_back(p.at("data"));
  }
  return ck;
}

}  // namespace kdt::nn

#endif  // KDT_NN_CHECKPOINT_HPP_
