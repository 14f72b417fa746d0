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

#include <catch2/catch_amalgamated.hpp>

#include "kdt/models.hpp"
#include "kdt/nn/gradcheck.hpp"

using namespace kdt;
using namespace kdt::nn;

namespace {

Tensor<float> random_input(std::vector<std::size_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return t;
}

}  // namespace

TEST_CASE("cnn output is a probability") {
  auto specs = build_cnn(CnnConfig{});
  Network<float> net(specs, 5);
  auto y = net.forward(random_input({5, 42, 42}, 1), false);
  REQUIRE(y.shape == std::vector<std::size_t>{1});
  CHECK(y.data[0] > 0.0f);
  CHECK(y.data[0] < 1.0f);
}

TEST_CASE("cnn rejects wrong input shape") {
  auto specs = build_cnn(CnnConfig{});
  Network<float> net(specs, 5);
  Tensor<float> bad_channels({4, 42, 42});
  CHECK_THROWS_AS(net.forward(bad_channels, false), DimensionError);
  Tensor<float> bad_side({5, 20, 42});
  CHECK_THROWS_AS(net.forward(bad_side, false), DimensionError);
}

TEST_CASE("cnn spatial trace: 42 -> 21 -> 10, flatten 6400") {
  auto specs = build_cnn(CnnConfig{});
  Network<float> net(specs, 0);
  auto shape = net.output_shape({5, 42, 42});
  CHECK(shape == std::vector<std::size_t>{1});
  // The first dense layer size pins the flattened extent 64*10*10.
  bool found = false;
  for (const auto& s : specs)
    if (s.kind == LayerKind::Dense && s.units_in == 64 * 10 * 10) found = true;
  CHECK(found);
}

TEST_CASE("cnn parameter count matches hand derivation") {
  // conv 5->32 (3x3), 32->32, 32->64, 64->64, fc 6400->256->64->1.
  std::size_t expect = 0;
  expect += 32ull * 5 * 3 * 3 + 32;
  expect += 32ull * 32 * 3 * 3 + 32;
  expect += 64ull * 32 * 3 * 3 + 64;
  expect += 64ull * 64 * 3 * 3 + 64;
  expect += 256ull * 6400 + 256;
  expect += 64ull * 256 + 64;
  expect += 1ull * 64 + 1;
  auto specs = build_cnn(CnnConfig{});
  CHECK(param_count(specs) == expect);
  Network<float> net(specs, 0);
  CHECK(net.param_count() == expect);
}

TEST_CASE("same seed gives identical initial parameters") {
  auto specs = build_cnn(CnnConfig{});
  Network<float> a(specs, 9);
  Network<float> b(specs, 9);
  auto pa = a.params();
  auto pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i]->value.data == pb[i]->value.data);
  Network<float> c(specs, 10);
  CHECK(a.params()[0]->value.data != c.params()[0]->value.data);
}

TEST_CASE("cnn-rnn: recurrent cell swap leaves the conv front end alone") {
  CnnRnnConfig cfg;
  auto count_conv = [](const std::vector<LayerSpec>& specs) {
    std::size_t n = 0;
    for (const auto& s : specs)
      if (s.kind == LayerKind::Conv2d)
        n += static_cast<std::size_t>(s.out_channels) *
                 (s.in_channels * s.kernel_h * s.kernel_w) +
             s.out_channels;
    return n;
  };
  cfg.rnn_kind = RnnKind::GRU;
  auto conv_gru = count_conv(build_cnn_rnn(cfg, 100, 48));
  cfg.rnn_kind = RnnKind::LSTM;
  auto conv_lstm = count_conv(build_cnn_rnn(cfg, 100, 48));
  cfg.rnn_kind = RnnKind::RNN;
  auto conv_rnn = count_conv(build_cnn_rnn(cfg, 100, 48));
  CHECK(conv_gru == conv_lstm);
  CHECK(conv_gru == conv_rnn);
}

TEST_CASE("cnn-rnn feeds 99 steps to the recurrent stack for L=100") {
  auto specs = build_cnn_rnn(CnnRnnConfig{}, 100, 48);
  Network<float> net(specs, 3);
  // Find the stack's declared input size; kernel (2,8), stride (1,8) over
  // width 48 gives 6 positions, so 32 filters * 6 = 192 per step.
  for (const auto& s : specs)
    if (s.kind == LayerKind::GRUCellStack) CHECK(s.input_size == 32 * 6);
  auto y = net.forward(random_input({100, 48}, 2), false);
  CHECK(y.shape == std::vector<std::size_t>{1});
  CHECK(y.data[0] > 0.0f);
  CHECK(y.data[0] < 1.0f);
}

TEST_CASE("cnn-rnn clamps kernel width for narrow index encoding") {
  auto specs = build_cnn_rnn(CnnRnnConfig{}, 50, 7);
  Network<float> net(specs, 3);
  auto y = net.forward(random_input({50, 7}, 4), false);
  CHECK(y.shape == std::vector<std::size_t>{1});
}

TEST_CASE("config validation rejects bad geometry") {
  CnnConfig c;
  c.kernel = 4;
  CHECK_THROWS_AS(build_cnn(c), ArgumentError);
  c.kernel = 43;
  CHECK_THROWS_AS(build_cnn(c), ArgumentError);
  CHECK_THROWS_AS(build_cnn_rnn(CnnRnnConfig{}, 1, 48), ArgumentError);
}

TEST_CASE("zero-weight GRU pipeline composes per-step halving") {
  // With all weights zero, each GRU step maps h -> 0.5 * h; over 99 steps
  // from h0 = 0 the hidden stays 0, so dense bias 0 puts sigmoid at 0.5.
  auto specs = build_cnn_rnn(CnnRnnConfig{}, 100, 48);
  Network<float> net(specs, 8);
  for (auto* p : net.params())
    std::fill(p->value.data.begin(), p->value.data.end(), 0.0f);
  auto y = net.forward(random_input({100, 48}, 6), false);
  CHECK(y.data[0] == Catch::Approx(0.5).margin(1e-7));
}

TEST_CASE("model config JSON round-trips") {
  for (const auto& name : {"rnn", "gru", "lstm"}) {
    auto kind = rnn_kind_from_string(name);
    CHECK(to_string(kind) == name);
  }
  CHECK_THROWS_AS(rnn_kind_from_string("tcn"), FormatError);

  auto specs = build_cnn_rnn(CnnRnnConfig{}, 40, 48);
  nlohmann::json j = specs;
  auto back = j.get<std::vector<LayerSpec>>();
  REQUIRE(back.size() == specs.size());
  CHECK(param_count(back) == param_count(specs));
  Network<float> a(specs, 4);
  Network<float> b(back, 4);
  auto x = random_input({40, 48}, 5);
  CHECK(a.forward(x, false).data == b.forward(x, false).data);
}

TEST_CASE("reduced-width full architectures pass gradient checks") {
  SECTION("cnn, shrunk to 10x10 input") {
    CnnConfig cfg;
    cfg.input_side = 10;
    cfg.stage_channels = {3, 4};
    cfg.fc_sizes = {8, 4, 1};
    auto specs = build_cnn(cfg);
    Rng rng(21);
    Tensor<double> x({5, 10, 10});
    for (auto& v : x.data) v = rng.uniform(-0.5, 0.5);
    // Smaller step keeps the central difference on one side of ReLU kinks.
    auto r = grad_check(specs, x, 1.0, 1e-5);
    INFO(r.worst_param << " rel " << r.max_rel_error);
    CHECK(r.pass);
  }
  SECTION("cnn-rnn, short sequence") {
    CnnRnnConfig cfg;
    cfg.conv_filters = 4;
    cfg.rnn_hidden = 5;
    auto specs = build_cnn_rnn(cfg, 8, 16);
    Rng rng(22);
    Tensor<double> x({8, 16});
    for (auto& v : x.data) v = rng.uniform(-0.5, 0.5);
    auto r = grad_check(specs, x, 0.0);
    INFO(r.worst_param << " rel " << r.max_rel_error);
    CHECK(r.pass);
  }
  SECTION("cnn-rnn with lstm cells") {
    CnnRnnConfig cfg;
    cfg.conv_filters = 4;
    cfg.rnn_hidden = 5;
    cfg.rnn_kind = RnnKind::LSTM;
    auto specs = build_cnn_rnn(cfg, 8, 16);
    Rng rng(23);
    Tensor<double> x({8, 16});
    for (auto& v : x.data) v = rng.uniform(-0.5, 0.5);
    auto r = grad_check(specs, x, 1.0);
    CHECK(r.pass);
  }
}
