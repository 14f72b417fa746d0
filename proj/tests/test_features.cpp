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

#include <filesystem>
#include <map>

#include <catch2/catch_amalgamated.hpp>

#include "kdt/features.hpp"
#include "kdt/kdf.hpp"

using namespace kdt;

namespace {

Subsequence random_window(Rng& rng, std::size_t len) {
  Subsequence s;
  s.user_id = "u";
  std::int64_t t = 0;
  for (std::size_t i = 0; i < len; ++i) {
    int k = static_cast<int>(rng.below(kAlphabetSize));
    t += 1 + static_cast<std::int64_t>(rng.below(400));
    std::int64_t hold = 1 + static_cast<std::int64_t>(rng.below(200));
    s.keystrokes.push_back({k, t, t + hold});
  }
  return s;
}

/// Independent KDI oracle: enumerate consecutive pairs, group by ordered key
/// pair, average, then normalize. Kept deliberately naive.
Tensor<float> kdi_oracle(const Subsequence& sub, double clip) {
  const std::size_t K = kAlphabetSize;
  Tensor<float> out({5, K, K});
  auto norm = [clip](double v) {
    v = std::max(-clip, std::min(clip, v));
    return static_cast<float>(v / clip);
  };
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      double ud = 0, dd = 0, du = 0, uu = 0;
      int n = 0;
      for (std::size_t p = 0; p + 1 < sub.keystrokes.size(); ++p) {
        const auto& a = sub.keystrokes[p];
        const auto& b = sub.keystrokes[p + 1];
        if (a.key_index != static_cast<int>(i) ||
            b.key_index != static_cast<int>(j))
          continue;
        ud += static_cast<double>(b.press_ms - a.release_ms);
        dd += static_cast<double>(b.press_ms - a.press_ms);
        du += static_cast<double>(b.release_ms - a.press_ms);
        uu += static_cast<double>(b.release_ms - a.release_ms);
        ++n;
      }
      if (n > 0) {
        out.at3(0, i, j) = norm(ud / n);
        out.at3(1, i, j) = norm(dd / n);
        out.at3(2, i, j) = norm(du / n);
        out.at3(3, i, j) = norm(uu / n);
      }
    }
    double dur = 0;
    int n = 0;
    for (const auto& ks : sub.keystrokes)
      if (ks.key_index == static_cast<int>(i)) {
        dur += static_cast<double>(ks.release_ms - ks.press_ms);
        ++n;
      }
    if (n > 0) out.at3(4, i, i) = norm(dur / n);
  }
  return out;
}

}  // namespace

TEST_CASE("timing features match the interval definitions") {
  Keystroke a{0, 0, 100}, b{1, 150, 260};
  TimingPair t = timing_features(a, b);
  CHECK(t.duration_a == 100);
  CHECK(t.duration_b == 110);
  CHECK(t.dd == 150);
  CHECK(t.ud == 50);
  CHECK(t.uu == 160);
  CHECK(t.du == 260);
}

TEST_CASE("rollover gives negative up-down time") {
  Keystroke a{0, 0, 100}, b{1, 50, 150};
  CHECK(timing_features(a, b).ud == -50);
}

TEST_CASE("timing of a keystroke against itself degenerates cleanly") {
  Keystroke a{0, 0, 100};
  TimingPair t = timing_features(a, a);
  CHECK(t.dd == 0);
  CHECK(t.ud == -100);
  CHECK(t.uu == 0);
  CHECK(t.du == 100);
}

TEST_CASE("property: du - dd and uu - ud both equal duration_b") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    std::int64_t pa = static_cast<std::int64_t>(rng.below(100000));
    Keystroke a{0, pa, pa + 1 + static_cast<std::int64_t>(rng.below(500))};
    std::int64_t pb = pa + static_cast<std::int64_t>(rng.below(1000));
    Keystroke b{1, pb, pb + 1 + static_cast<std::int64_t>(rng.below(500))};
    TimingPair t = timing_features(a, b);
    REQUIRE(t.du - t.dd == t.duration_b);
    REQUIRE(t.uu - t.ud == t.duration_b);
  }
}

TEST_CASE("windowing: floor division, remainder discarded") {
  UserStream s;
  s.user_id = "u";
  for (int i = 0; i < 250; ++i) s.keystrokes.push_back({0, i * 10, i * 10 + 5});
  CHECK(window(s, 100).size() == 2);
  s.keystrokes.resize(99);
  CHECK(window(s, 100).empty());
  s.keystrokes.clear();
  for (int i = 0; i < 300; ++i) s.keystrokes.push_back({0, i * 10, i * 10 + 5});
  CHECK(window(s, 75).size() == 4);
}

TEST_CASE("window rejects degenerate lengths") {
  UserStream s;
  CHECK_THROWS_AS(window(s, 1), ArgumentError);
}

TEST_CASE("kdi: repeated pair averaged then normalized") {
  // a->b twice with UD 40 and 60; all presses 100 apart for simple numbers.
  Subsequence s;
  s.user_id = "u";
  s.keystrokes = {{0, 0, 60},      // a, release 60
                  {1, 100, 160},   // b: UD = 100 - 60 = 40
                  {0, 200, 240},   // a, release 240
                  {1, 300, 360}};  // b: UD = 300 - 240 = 60
  auto kdi = build_kdi(s);
  CHECK(kdi.at3(kChanUD, 0, 1) == Catch::Approx(50.0 / 5000.0).epsilon(1e-6));
}

TEST_CASE("kdi: untyped keys leave zero rows, columns and diagonal") {
  Subsequence s;
  s.user_id = "u";
  s.keystrokes = {{0, 0, 50}, {1, 100, 150}, {0, 200, 260}};
  auto kdi = build_kdi(s);
  for (std::size_t c = 0; c < kKdiChannels; ++c)
    for (std::size_t j = 0; j < kAlphabetSize; ++j) {
      CHECK(kdi.at3(c, 5, j) == 0.0f);
      CHECK(kdi.at3(c, j, 5) == 0.0f);
    }
}

TEST_CASE("kdi: at most L-1 populated pairs per channel") {
  Rng rng(5);
  auto s = random_window(rng, 100);
  auto kdi = build_kdi(s);
  std::size_t populated = 0;
  for (std::size_t i = 0; i < kAlphabetSize; ++i)
    for (std::size_t j = 0; j < kAlphabetSize; ++j)
      if (kdi.at3(kChanDD, i, j) != 0.0f) ++populated;
  CHECK(populated <= 99);
}

TEST_CASE("property: build_kdi equals brute-force pair enumeration oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t len = trial % 3 == 0 ? 50 : (trial % 3 == 1 ? 75 : 100);
    auto s = random_window(rng, len);
    auto fast = build_kdi(s);
    auto slow = kdi_oracle(s, 5000.0);
    REQUIRE(fast.shape == slow.shape);
    for (std::size_t i = 0; i < fast.numel(); ++i)
      REQUIRE(std::abs(static_cast<double>(fast.data[i]) - slow.data[i]) <
              1e-9);
  }
}

TEST_CASE("property: kdi duration channel is diagonal") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto kdi = build_kdi(random_window(rng, 60));
    for (std::size_t i = 0; i < kAlphabetSize; ++i)
      for (std::size_t j = 0; j < kAlphabetSize; ++j)
        if (i != j) REQUIRE(kdi.at3(kChanDuration, i, j) == 0.0f);
  }
}

TEST_CASE("kdi values stay in [-1, 1] even for huge gaps") {
  Subsequence s;
  s.user_id = "u";
  s.keystrokes = {{0, 0, 9000000}, {1, 20000000, 20000100}};
  auto kdi = build_kdi(s);
  for (float v : kdi.data) {
    CHECK(v <= 1.0f);
    CHECK(v >= -1.0f);
  }
}

TEST_CASE("kds shapes: one-hot 100x48, index 100x7") {
  Rng rng(31);
  auto s = random_window(rng, 100);
  auto onehot = build_kds(s, KdsEncoding::OneHot);
  CHECK(onehot.shape == std::vector<std::size_t>{100, 48});
  auto index = build_kds(s, KdsEncoding::Index);
  CHECK(index.shape == std::vector<std::size_t>{100, 7});
}

TEST_CASE("kds one-hot block sums to exactly 1 per row") {
  Rng rng(37);
  auto s = random_window(rng, 80);
  auto kds = build_kds(s, KdsEncoding::OneHot);
  for (std::size_t r = 0; r < 80; ++r) {
    float sum = 0;
    for (std::size_t c = 0; c < kAlphabetSize; ++c) sum += kds.at2(r, c);
    REQUIRE(sum == 1.0f);
    CHECK(kds.at2(r, static_cast<std::size_t>(s.keystrokes[r].key_index)) ==
          1.0f);
  }
}

TEST_CASE("kds row 0 has zero pair-timing columns") {
  Rng rng(41);
  auto s = random_window(rng, 50);
  for (auto enc : {KdsEncoding::OneHot, KdsEncoding::Index}) {
    auto kds = build_kds(s, enc);
    std::size_t enc_w = kds.shape[1] - 6;
    for (std::size_t c = enc_w + 1; c < kds.shape[1]; ++c)
      CHECK(kds.at2(0, c) == 0.0f);
    // Own duration is still present.
    CHECK(kds.at2(0, enc_w) != 0.0f);
  }
}

TEST_CASE("kds index encoding scales key index by 41") {
  Subsequence s;
  s.user_id = "u";
  s.keystrokes = {{41, 0, 50}, {0, 100, 150}};
  auto kds = build_kds(s, KdsEncoding::Index);
  CHECK(kds.at2(0, 0) == 1.0f);
  CHECK(kds.at2(1, 0) == 0.0f);
}

TEST_CASE("cutout: forced application zeroes exactly one square") {
  Rng rng(43);
  auto x = build_kdi(random_window(rng, 100));
  for (auto& v : x.data) if (v == 0.0f) v = 0.5f;  // make zeros detectable
  CutoutSpec spec;
  spec.kdi_size = 8;
  spec.probability = 1.0;
  spec.rng_seed = 9;
  auto y = apply_cutout_kdi(x, spec);
  std::size_t zeroed = 0, changed = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (y.data[i] != x.data[i]) {
      ++changed;
      REQUIRE(y.data[i] == 0.0f);
    }
    if (y.data[i] == 0.0f) ++zeroed;
  }
  CHECK(changed == 8 * 8 * 5);
  CHECK(zeroed == 8 * 8 * 5);
}

TEST_CASE("cutout: kds block spans full width") {
  Rng rng(47);
  auto x = build_kds(random_window(rng, 100), KdsEncoding::OneHot);
  for (auto& v : x.data) if (v == 0.0f) v = 0.25f;
  CutoutSpec spec;
  spec.kds_span = 10;
  spec.probability = 1.0;
  spec.rng_seed = 3;
  auto y = apply_cutout_kds(x, spec);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < x.numel(); ++i)
    if (y.data[i] != x.data[i]) {
      ++changed;
      REQUIRE(y.data[i] == 0.0f);
    }
  CHECK(changed == 10 * 48);
}

TEST_CASE("cutout: probability 0 is the identity; input never mutated") {
  Rng rng(53);
  auto x = build_kdi(random_window(rng, 60));
  auto x_copy = x;
  CutoutSpec spec;
  spec.probability = 0.0;
  auto y = apply_cutout_kdi(x, spec);
  CHECK(y.data == x.data);
  spec.probability = 1.0;
  (void)apply_cutout_kdi(x, spec);
  CHECK(x.data == x_copy.data);
}

TEST_CASE("cutout: same seed and input give identical output") {
  Rng rng(59);
  auto x = build_kds(random_window(rng, 70), KdsEncoding::Index);
  CutoutSpec spec;
  spec.probability = 0.7;
  spec.rng_seed = 1234;
  auto a = apply_cutout_kds(x, spec);
  auto b = apply_cutout_kds(x, spec);
  CHECK(a.data == b.data);
}

TEST_CASE("cutout spec validation") {
  CutoutSpec spec;
  spec.kdi_size = 43;
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
  spec.kdi_size = 8;
  spec.probability = 1.2;
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
}

TEST_CASE("kdf round-trips samples, users and labels bit-exactly") {
  Rng rng(61);
  KdfFile f;
  f.layout = "kdi";
  f.sample_shape = {kKdiChannels, kAlphabetSize, kAlphabetSize};
  f.channel_order = kdi_channel_order();
  for (int i = 0; i < 5; ++i) {
    f.samples.push_back(build_kdi(random_window(rng, 50)));
    f.user_ids.push_back(i % 2 ? "alice" : "bob");
    f.labels.push_back(i % 2);
  }
  auto path = std::filesystem::temp_directory_path() / "kdt_test.kdf";
  write_kdf(f, path);
  auto g = read_kdf(path);
  REQUIRE(g.samples.size() == 5);
  CHECK(g.layout == "kdi");
  CHECK(g.user_ids == f.user_ids);
  CHECK(g.labels == f.labels);
  CHECK(g.channel_order == f.channel_order);
  for (int i = 0; i < 5; ++i) REQUIRE(g.samples[i].data == f.samples[i].data);
  std::filesystem::remove(path);
}

TEST_CASE("kdf rejects bad magic") {
  auto path = std::filesystem::temp_directory_path() / "kdt_notkdf.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE, not a feature file";
  }
  CHECK_THROWS_AS(read_kdf(path), FormatError);
  std::filesystem::remove(path);
}
