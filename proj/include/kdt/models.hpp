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

#ifndef KDT_MODELS_HPP_
#define KDT_MODELS_HPP_

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdt/ingest.hpp"
#include "kdt/nn/network.hpp"

namespace kdt {

/// KDI classifier: two (conv, relu, conv, relu, maxpool) stages, then three
/// fully connected layers with dropout before the last, sigmoid output.
struct CnnConfig {
  int kernel = 3;  // square, odd, one of {3, 5, 7}
  std::array<int, 2> stage_channels{32, 64};
  std::array<int, 3> fc_sizes{256, 64, 1};
  double dropout_rate = 0.5;
  int input_channels = 5;
  int input_side = kAlphabetSize;

  void validate() const {
    if (kernel < 1 || kernel % 2 == 0)
      throw ArgumentError("CnnConfig: kernel must be odd");
    if (kernel > input_side)
      throw ArgumentError("CnnConfig: kernel larger than spatial extent");
    if (fc_sizes.back() != 1)
      throw ArgumentError("CnnConfig: final FC must have 1 output");
  }
};

/// KDS classifier: 32 rectangular kernels sliding along the sequence axis,
/// a 2-layer recurrent stack, and a dense head on the last hidden state.
struct CnnRnnConfig {
  int conv_kh = 2;        // kernel height (sequence direction): 2, 3 or 5
  int conv_kw = 8;        // kernel width (embedding direction)
  int conv_filters = 32;
  nn::RnnKind rnn_kind = nn::RnnKind::GRU;
  int rnn_layers = 2;
  int rnn_hidden = 64;

  void validate() const {
    if (conv_kh < 1 || conv_kw < 1 || conv_filters < 1 || rnn_layers < 1 ||
        rnn_hidden < 1)
      throw ArgumentError("CnnRnnConfig: sizes must be positive");
  }
};

inline std::vector<nn::LayerSpec> build_cnn(const CnnConfig& cfg) {
  cfg.validate();
  using nn::LayerKind;
  std::vector<nn::LayerSpec> specs;
  int pad = cfg.kernel / 2;  // zero padding preserves size within a stage
  int side = cfg.input_side;
  int in_ch = cfg.input_channels;
  for (int stage = 0; stage < 2; ++stage) {
    int out_ch = cfg.stage_channels[stage];
    for (int conv = 0; conv < 2; ++conv) {
      nn::LayerSpec c;
      c.kind = LayerKind::Conv2d;
      c.in_channels = conv == 0 ? in_ch : out_ch;
      c.out_channels = out_ch;
      c.kernel_h = c.kernel_w = cfg.kernel;
      c.pad_h = c.pad_w = pad;
      specs.push_back(c);
      specs.push_back({.kind = LayerKind::ReLU});
    }
    nn::LayerSpec p;
    p.kind = LayerKind::MaxPool2d;
    p.kernel_h = p.kernel_w = 2;
    p.stride_h = p.stride_w = 2;
    specs.push_back(p);
    side /= 2;  // floor: 42 -> 21 -> 10
    in_ch = out_ch;
  }
  specs.push_back({.kind = LayerKind::Flatten});
  int width = in_ch * side * side;
  for (std::size_t i = 0; i < cfg.fc_sizes.size(); ++i) {
    if (i + 1 == cfg.fc_sizes.size()) {
      nn::LayerSpec d;
      d.kind = LayerKind::Dropout;
      d.rate = cfg.dropout_rate;
      specs.push_back(d);
    }
    nn::LayerSpec fc;
    fc.kind = LayerKind::Dense;
    fc.units_in = width;
    fc.units_out = cfg.fc_sizes[i];
    specs.push_back(fc);
    if (i + 1 < cfg.fc_sizes.size())
      specs.push_back({.kind = LayerKind::ReLU});
    width = cfg.fc_sizes[i];
  }
  specs.push_back({.kind = LayerKind::Sigmoid});
  return specs;
}

/// The conv front end slides along the sequence with stride 1 and, when the
/// embedding width exceeds the kernel width, across the width with stride 8
/// (one-hot width 48 yields six width slices). A kernel wider than the input
/// is clamped to the input width (index encoding, width 7).
inline std::vector<nn::LayerSpec> build_cnn_rnn(const CnnRnnConfig& cfg,
                                                int seq_len, int input_width) {
  cfg.validate();
  if (seq_len < cfg.conv_kh)
    throw ArgumentError("build_cnn_rnn: sequence shorter than kernel height");
  using nn::LayerKind;
  std::vector<nn::LayerSpec> specs;

  nn::LayerSpec rs;
  rs.kind = LayerKind::Reshape;
  rs.target_shape = {1, static_cast<std::size_t>(seq_len),
                     static_cast<std::size_t>(input_width)};
  specs.push_back(rs);

  int kw = std::min(cfg.conv_kw, input_width);
  nn::LayerSpec c;
  c.kind = LayerKind::Conv2d;
  c.in_channels = 1;
  c.out_channels = cfg.conv_filters;
  c.kernel_h = cfg.conv_kh;
  c.kernel_w = kw;
  c.stride_h = 1;
  c.stride_w = cfg.conv_kw;
  specs.push_back(c);
  specs.push_back({.kind = LayerKind::ReLU});
  specs.push_back({.kind = LayerKind::ToSequence});

  int out_w = (input_width - kw) / cfg.conv_kw + 1;
  nn::LayerSpec r;
  switch (cfg.rnn_kind) {
    case nn::RnnKind::RNN: r.kind = LayerKind::RNNCellStack; break;
    case nn::RnnKind::GRU: r.kind = LayerKind::GRUCellStack; break;
    case nn::RnnKind::LSTM: r.kind = LayerKind::LSTMCellStack; break;
  }
  r.input_size = cfg.conv_filters * out_w;
  r.hidden = cfg.rnn_hidden;
  r.num_layers = cfg.rnn_layers;
  specs.push_back(r);

  nn::LayerSpec fc;
  fc.kind = LayerKind::Dense;
  fc.units_in = cfg.rnn_hidden;
  fc.units_out = 1;
  specs.push_back(fc);
  specs.push_back({.kind = LayerKind::Sigmoid});
  return specs;
}

/// Trainable parameter count, derived from specs alone.
inline std::size_t param_count(const std::vector<nn::LayerSpec>& specs) {
  using nn::LayerKind;
  std::size_t n = 0;
  for (const auto& s : specs) {
    switch (s.kind) {
      case LayerKind::Conv2d:
        n += static_cast<std::size_t>(s.out_channels) *
                 (s.in_channels * s.kernel_h * s.kernel_w) +
             s.out_channels;
        break;
      case LayerKind::Dense:
        n += static_cast<std::size_t>(s.units_out) * s.units_in + s.units_out;
        break;
      case LayerKind::RNNCellStack:
      case LayerKind::GRUCellStack:
      case LayerKind::LSTMCellStack: {
        int G = s.kind == LayerKind::RNNCellStack
                    ? 1
                    : (s.kind == LayerKind::GRUCellStack ? 3 : 4);
        for (int l = 0; l < s.num_layers; ++l) {
          int in = l == 0 ? s.input_size : s.hidden;
          n += static_cast<std::size_t>(G) * s.hidden * (in + s.hidden + 2);
        }
        break;
      }
      default:
        break;
    }
  }
  return n;
}

inline nn::RnnKind rnn_kind_from_string(const std::string& s) {
  if (s == "rnn") return nn::RnnKind::RNN;
  if (s == "gru") return nn::RnnKind::GRU;
  if (s == "lstm") return nn::RnnKind::LSTM;
  throw FormatError("unknown rnn kind: " + s);
}

inline std::string to_string(nn::RnnKind k) {
  switch (k) {
    case nn::RnnKind::RNN: return "rnn";
    case nn::RnnKind::GRU: return "gru";
    case nn::RnnKind::LSTM: return "lstm";
  }
  return "?";
}

inline void to_json(nlohmann::json& j, const CnnConfig& c) {
  j = {{"kernel", c.kernel},
       {"stage_channels", c.stage_channels},
       {"fc_sizes", c.fc_sizes},
       {"dropout_rate", c.dropout_rate},
       {"input_channels", c.input_channels},
       {"input_side", c.input_side}};
}
inline void from_json(const nlohmann::json& j, CnnConfig& c) {
  c = CnnConfig{};
  c.kernel = j.value("kernel", c.kernel);
  if (j.contains("stage_channels")) j.at("stage_channels").get_to(c.stage_channels);
  if (j.contains("fc_sizes")) j.at("fc_sizes").get_to(c.fc_sizes);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.input_channels = j.value("input_channels", c.input_channels);
  c.input_side = j.value("input_side", c.input_side);
}
inline void to_json(nlohmann::json& j, const CnnRnnConfig& c) {
  j = {{"conv_kernel", {c.conv_kh, c.conv_kw}},
       {"conv_filters", c.conv_filters},
       {"rnn_kind", to_string(c.rnn_kind)},
       {"rnn_layers", c.rnn_layers},
       {"rnn_hidden", c.rnn_hidden}};
}
inline void from_json(const nlohmann::json& j, CnnRnnConfig& c) {
  c = CnnRnnConfig{};
  if (j.contains("conv_kernel")) {
    c.conv_kh = j["conv_kernel"][0];
    c.conv_kw = j["conv_kernel"][1];
  }
  c.conv_filters = j.value("conv_filters", c.conv_filters);
  if (j.contains("rnn_kind"))
    c.rnn_kind = rnn_kind_from_string(j["rnn_kind"].get<std::string>());
  c.rnn_layers = j.value("rnn_layers", c.rnn_layers);
  c.rnn_hidden = j.value("rnn_hidden", c.rnn_hidden);
}

}  // namespace kdt

#endif  // KDT_MODELS_HPP_
