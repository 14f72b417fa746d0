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

#ifndef KDT_FEATURES_HPP_
#define KDT_FEATURES_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "kdt/common.hpp"
#include "kdt/ingest.hpp"
#include "kdt/tensor.hpp"

namespace kdt {

struct Subsequence {
  std::string user_id;
  std::vector<Keystroke> keystrokes;  // exactly the configured window length
};

/// The six per-pair timing features for consecutive keystrokes A then B.
struct TimingPair {
  std::int64_t duration_a = 0;
  std::int64_t duration_b = 0;
  std::int64_t dd = 0;  // down-down
  std::int64_t ud = 0;  // up-down; negative on rollover
  std::int64_t uu = 0;  // up-up
  std::int64_t du = 0;  // down-up
};

inline TimingPair timing_features(const Keystroke& a, const Keystroke& b) {
  TimingPair t;
  t.duration_a = a.release_ms - a.press_ms;
  t.duration_b = b.release_ms - b.press_ms;
  t.dd = b.press_ms - a.press_ms;
  t.ud = b.press_ms - a.release_ms;
  t.uu = b.release_ms - a.release_ms;
  t.du = b.release_ms - a.press_ms;
  return t;
}

/// Non-overlapping consecutive windows; trailing remainder discarded.
inline std::vector<Subsequence> window(const UserStream& stream,
                                       std::size_t length) {
  if (length < 2) throw ArgumentError("window length must be >= 2");
  std::vector<Subsequence> out;
  std::size_t n = stream.keystrokes.size() / length;
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    Subsequence s;
    s.user_id = stream.user_id;
    s.keystrokes.assign(stream.keystrokes.begin() + w * length,
                        stream.keystrokes.begin() + (w + 1) * length);
    out.push_back(std::move(s));
  }
  return out;
}

/// Timing values are clamped to +/- clip_ms and scaled into [-1, 1].
struct NormalizationConfig {
  double clip_ms = 5000.0;
  double apply(double v) const {
    if (v > clip_ms) v = clip_ms;
    if (v < -clip_ms) v = -clip_ms;
    return v / clip_ms;
  }
};

/// KDI channel order, frozen in the file format.
enum KdiChannel { kChanUD = 0, kChanDD = 1, kChanDU = 2, kChanUU = 3,
                  kChanDuration = 4 };
constexpr std::size_t kKdiChannels = 5;

/// 5 x 42 x 42 transition tensor. Channels 0-3 hold the mean UD/DD/DU/UU
/// time of each ordered key pair occurring in the window; channel 4 is the
/// diagonal per-key mean duration. Unseen pairs stay exactly 0.
inline Tensor<float> build_kdi(const Subsequence& sub,
                               const NormalizationConfig& norm = {}) {
  const std::size_t K = kAlphabetSize;
  Tensor<float> out({kKdiChannels, K, K});
  std::vector<double> sum(4 * K * K, 0.0);
  std::vector<std::uint32_t> cnt(K * K, 0);
  for (std::size_t i = 0; i + 1 < sub.keystrokes.size(); ++i) {
    const auto& a = sub.keystrokes[i];
    const auto& b = sub.keystrokes[i + 1];
    TimingPair t = timing_features(a, b);
    std::size_t cell = static_cast<std::size_t>(a.key_index) * K + b.key_index;
    sum[0 * K * K + cell] += static_cast<double>(t.ud);
    sum[1 * K * K + cell] += static_cast<double>(t.dd);
    sum[2 * K * K + cell] += static_cast<double>(t.du);
    sum[3 * K * K + cell] += static_cast<double>(t.uu);
    ++cnt[cell];
  }
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t cell = 0; cell < K * K; ++cell)
      if (cnt[cell] > 0)
        out.data[c * K * K + cell] =
            static_cast<float>(norm.apply(sum[c * K * K + cell] / cnt[cell]));

  std::vector<double> dur_sum(K, 0.0);
  std::vector<std::uint32_t> dur_cnt(K, 0);
  for (const auto& ks : sub.keystrokes) {
    dur_sum[ks.key_index] +=
        static_cast<double>(ks.release_ms - ks.press_ms);
    ++dur_cnt[ks.key_index];
  }
  for (std::size_t k = 0; k < K; ++k)
    if (dur_cnt[k] > 0)
      out.data[kChanDuration * K * K + k * K + k] =
          static_cast<float>(norm.apply(dur_sum[k] / dur_cnt[k]));
  return out;
}

enum class KdsEncoding { Index, OneHot };

inline std::size_t kds_width(KdsEncoding enc) {
  return (enc == KdsEncoding::OneHot ? kAlphabetSize : 1) + 6;
}

/// L x W sequence matrix. Row i = key encoding of keystroke i followed by
/// [duration_i, dd_i, ud_i, uu_i, du_i, duration_{i-1}], the pair timings
/// taken against the predecessor. Row 0 has no predecessor, so its pair
/// columns are zero.
inline Tensor<float> build_kds(const Subsequence& sub, KdsEncoding enc,
                               const NormalizationConfig& norm = {}) {
  const std::size_t L = sub.keystrokes.size();
  const std::size_t W = kds_width(enc);
  const std::size_t enc_w = W - 6;
  Tensor<float> out({L, W});
  for (std::size_t i = 0; i < L; ++i) {
    const auto& ks = sub.keystrokes[i];
    float* row = &out.data[i * W];
    if (enc == KdsEncoding::OneHot) {
      row[ks.key_index] = 1.0f;
    } else {
      row[0] = static_cast<float>(ks.key_index) /
               static_cast<float>(kAlphabetSize - 1);
    }
    double dur = static_cast<double>(ks.release_ms - ks.press_ms);
    row[enc_w + 0] = static_cast<float>(norm.apply(dur));
    if (i > 0) {
      TimingPair t = timing_features(sub.keystrokes[i - 1], ks);
      row[enc_w + 1] = static_cast<float>(norm.apply(static_cast<double>(t.dd)));
      row[enc_w + 2] = static_cast<float>(norm.apply(static_cast<double>(t.ud)));
      row[enc_w + 3] = static_cast<float>(norm.apply(static_cast<double>(t.uu)));
      row[enc_w + 4] = static_cast<float>(norm.apply(static_cast<double>(t.du)));
      row[enc_w + 5] =
          static_cast<float>(norm.apply(static_cast<double>(t.duration_a)));
    }
  }
  return out;
}

struct CutoutSpec {
  bool enabled = true;
  int kdi_size = 8;     // square side, in [1, 42]
  int kds_span = 10;    // timestep rows, in [1, L]
  double probability = 0.5;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (kdi_size < 1 || kdi_size > kAlphabetSize)
      throw ArgumentError("cutout kdi_size out of [1, 42]");
    if (kds_span < 1) throw ArgumentError("cutout kds_span must be >= 1");
    if (probability < 0.0 || probability > 1.0)
      throw ArgumentError("cutout probability out of [0, 1]");
  }
};

/// Zero one axis-aligned square across all channels of a KDI, with the
/// spec's probability; position uniform over valid placements. Copies input.
inline Tensor<float> apply_cutout_kdi(const Tensor<float>& x,
                                      const CutoutSpec& spec, Rng& rng) {
  spec.validate();
  if (x.rank() != 3)
    throw DimensionError("apply_cutout_kdi expects a rank-3 tensor");
  Tensor<float> out = x;
  if (!spec.enabled || !rng.bernoulli(spec.probability)) return out;
  const std::size_t H = x.shape[1], W = x.shape[2];
  const std::size_t s = static_cast<std::size_t>(spec.kdi_size);
  if (s > H || s > W) throw ArgumentError("cutout square exceeds KDI extent");
  std::size_t r0 = rng.below(H - s + 1);
  std::size_t c0 = rng.below(W - s + 1);
  for (std::size_t c = 0; c < x.shape[0]; ++c)
    for (std::size_t r = r0; r < r0 + s; ++r)
      for (std::size_t w = c0; w < c0 + s; ++w) out.at3(c, r, w) = 0.0f;
  return out;
}

/// Zero one contiguous block of timestep rows of a KDS (full width).
inline Tensor<float> apply_cutout_kds(const Tensor<float>& x,
                                      const CutoutSpec& spec, Rng& rng) {
  spec.validate();
  if (x.rank() != 2)
    throw DimensionError("apply_cutout_kds expects a rank-2 tensor");
  Tensor<float> out = x;
  if (!spec.enabled || !rng.bernoulli(spec.probability)) return out;
  const std::size_t L = x.shape[0], W = x.shape[1];
  const std::size_t span = static_cast<std::size_t>(spec.kds_span);
  if (span > L) throw ArgumentError("cutout span exceeds sequence length");
  std::size_t r0 = rng.below(L - span + 1);
  for (std::size_t r = r0; r < r0 + span; ++r)
    for (std::size_t w = 0; w < W; ++w) out.at2(r, w) = 0.0f;
  return out;
}

/// Seed-owning convenience overloads.
inline Tensor<float> apply_cutout_kdi(const Tensor<float>& x,
                                      const CutoutSpec& spec) {
  Rng rng(spec.rng_seed);
  return apply_cutout_kdi(x, spec, rng);
}
inline Tensor<float> apply_cutout_kds(const Tensor<float>& x,
                                      const CutoutSpec& spec) {
  Rng rng(spec.rng_seed);
  return apply_cutout_kds(x, spec, rng);
}

}  // namespace kdt

#endif  // KDT_FEATURES_HPP_
