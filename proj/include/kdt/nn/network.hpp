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

#ifndef KDT_NN_NETWORK_HPP_
#define KDT_NN_NETWORK_HPP_

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdt/nn/layers.hpp"

namespace kdt::nn {

enum class LayerKind {
  Conv2d,
  MaxPool2d,
  Dense,
  Dropout,
  ReLU,
  Sigmoid,
  Flatten,
  Reshape,
  ToSequence,
  RNNCellStack,
  GRUCellStack,
  LSTMCellStack,
};

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  // Conv2d / MaxPool2d
  int in_channels = 0, out_channels = 0;
  int kernel_h = 0, kernel_w = 0;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  // Dense
  int units_in = 0, units_out = 0;
  // Dropout
  double rate = 0.0;
  // Recurrent
  int input_size = 0, hidden = 0, num_layers = 0;
  // Reshape
  std::vector<std::size_t> target_shape;
};

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Reshape: return "reshape";
    case LayerKind::ToSequence: return "to_sequence";
    case LayerKind::RNNCellStack: return "rnn_stack";
    case LayerKind::GRUCellStack: return "gru_stack";
    case LayerKind::LSTMCellStack: return "lstm_stack";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  static const std::vector<std::pair<std::string, LayerKind>> table = {
      {"conv2d", LayerKind::Conv2d},       {"maxpool2d", LayerKind::MaxPool2d},
      {"dense", LayerKind::Dense},         {"dropout", LayerKind::Dropout},
      {"relu", LayerKind::ReLU},           {"sigmoid", LayerKind::Sigmoid},
      {"flatten", LayerKind::Flatten},     {"reshape", LayerKind::Reshape},
      {"to_sequence", LayerKind::ToSequence},
      {"rnn_stack", LayerKind::RNNCellStack},
      {"gru_stack", LayerKind::GRUCellStack},
      {"lstm_stack", LayerKind::LSTMCellStack}};
  for (const auto& [name, kind] : table)
    if (name == s) return kind;
  throw FormatError("unknown layer kind: " + s);
}

inline void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = nlohmann::json{{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::Conv2d:
      j["in_channels"] = s.in_channels;
      j["out_channels"] = s.out_channels;
      [[fallthrough]];
    case LayerKind::MaxPool2d:
      j["kernel"] = {s.kernel_h, s.kernel_w};
      j["stride"] = {s.stride_h, s.stride_w};
      j["pad"] = {s.pad_h, s.pad_w};
      break;
    case LayerKind::Dense:
      j["units_in"] = s.units_in;
      j["units_out"] = s.units_out;
      break;
    case LayerKind::Dropout:
      j["rate"] = s.rate;
      break;
    case LayerKind::Reshape:
      j["target_shape"] = s.target_shape;
      break;
    case LayerKind::RNNCellStack:
    case LayerKind::GRUCellStack:
    case LayerKind::LSTMCellStack:
      j["input_size"] = s.input_size;
      j["hidden"] = s.hidden;
      j["num_layers"] = s.num_layers;
      break;
    default:
      break;
  }
}

inline void from_json(const nlohmann::json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (s.kind) {
    case LayerKind::Conv2d:
      s.in_channels = j.at("in_channels");
      s.out_channels = j.at("out_channels");
      [[fallthrough]];
    case LayerKind::MaxPool2d:
      s.kernel_h = j.at("kernel")[0];
      s.kernel_w = j.at("kernel")[1];
      s.stride_h = j.at("stride")[0];
      s.stride_w = j.at("stride")[1];
      s.pad_h = j.at("pad")[0];
      s.pad_w = j.at("pad")[1];
      break;
    case LayerKind::Dense:
      s.units_in = j.at("units_in");
      s.units_out = j.at("units_out");
      break;
    case LayerKind::Dropout:
      s.rate = j.at("rate");
      break;
    case LayerKind::Reshape:
      s.target_shape = j.at("target_shape").get<std::vector<std::size_t>>();
      break;
    case LayerKind::RNNCellStack:
    case LayerKind::GRUCellStack:
    case LayerKind::LSTMCellStack:
      s.input_size = j.at("input_size");
      s.hidden = j.at("hidden");
      s.num_layers = j.at("num_layers");
      break;
    default:
      break;
  }
}

template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Conv2d:
      return std::make_unique<Conv2d<T>>(s.in_channels, s.out_channels,
                                         s.kernel_h, s.kernel_w, s.stride_h,
                                         s.stride_w, s.pad_h, s.pad_w);
    case LayerKind::MaxPool2d:
      return std::make_unique<MaxPool2d<T>>(s.kernel_h, s.kernel_w, s.stride_h,
                                            s.stride_w);
    case LayerKind::Dense:
      return std::make_unique<Dense<T>>(s.units_in, s.units_out);
    case LayerKind::Dropout:
      return std::make_unique<Dropout<T>>(s.rate);
    case LayerKind::ReLU:
      return std::make_unique<ReLU<T>>();
    case LayerKind::Sigmoid:
      return std::make_unique<Sigmoid<T>>();
    case LayerKind::Flatten:
      return std::make_unique<Flatten<T>>();
    case LayerKind::Reshape:
      return std::make_unique<Reshape<T>>(s.target_shape);
    case LayerKind::ToSequence:
      return std::make_unique<ToSequence<T>>();
    case LayerKind::RNNCellStack:
      return std::make_unique<RecurrentStack<T>>(RnnKind::RNN, s.input_size,
                                                 s.hidden, s.num_layers);
    case LayerKind::GRUCellStack:
      return std::make_unique<RecurrentStack<T>>(RnnKind::GRU, s.input_size,
                                                 s.hidden, s.num_layers);
    case LayerKind::LSTMCellStack:
      return std::make_unique<RecurrentStack<T>>(RnnKind::LSTM, s.input_size,
                                                 s.hidden, s.num_layers);
  }
  throw ArgumentError("unknown layer kind");
}

/// A fixed layer pipeline. Single-writer during training; forward with
/// training=false on frozen parameters is pure and repeatable.
template <class T>
class Network {
 public:
  Network() = default;
  Network(std::vector<LayerSpec> specs, std::uint64_t init_seed)
      : specs_(std::move(specs)) {
    for (const auto& s : specs_) layers_.push_back(make_layer<T>(s));
    Rng rng(init_seed);
    for (auto& l : layers_) l->init(rng);
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (auto* p : layers_[i]->params())
        p->name = "layer" + std::to_string(i) + "." + p->name;
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }

  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

  std::vector<std::size_t> output_shape(std::vector<std::size_t> in) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        in = layers_[i]->output_shape(in);
      } catch (const DimensionError& e) {
        throw DimensionError("layer " + std::to_string(i) + " (" +
                             layers_[i]->name() + "): " + e.what());
      }
    }
    return in;
  }

  Tensor<T> forward(const Tensor<T>& x, bool training, std::uint64_t seed = 0) {
    Rng rng(seed);
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        layers_[i]->output_shape(cur.shape);
      } catch (const DimensionError& e) {
        throw DimensionError("layer " + std::to_string(i) + " (" +
                             layers_[i]->name() + "): " + e.what());
      }
      cur = layers_[i]->forward(cur, training, rng);
    }
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& loss_grad) {
    Tensor<T> cur = loss_grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      cur = (*it)->backward(cur);
    return cur;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.numel();
    return n;
  }

  Layer<T>* layer(std::size_t i) { return layers_[i].get(); }
  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Binary cross entropy with probability clamped to [1e-7, 1 - 1e-7].
template <class T>
T bce_loss(T p, T y) {
  T lo = T(1e-7), hi = T(1) - T(1e-7);
  p = std::min(hi, std::max(lo, p));
  return -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
}

template <class T>
T bce_grad(T p, T y) {
  T lo = T(1e-7), hi = T(1) - T(1e-7);
  p = std::min(hi, std::max(lo, p));
  return (p - y) / (p * (T(1) - p));
}

}  // namespace kdt::nn

#endif  // KDT_NN_NETWORK_HPP_
