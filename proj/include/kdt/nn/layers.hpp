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

#ifndef KDT_NN_LAYERS_HPP_
#define KDT_NN_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kdt/common.hpp"
#include "kdt/tensor.hpp"

namespace kdt::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using CMatMap = Eigen::Map<const Mat<T>>;
template <class T>
using VecMap = Eigen::Map<Vec<T>>;
template <class T>
using CVecMap = Eigen::Map<const Vec<T>>;

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

/// Uniform +/- 1/sqrt(fan_in) init, biases left zero.
template <class T>
void init_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// He-style uniform +/- sqrt(6/fan_in) for conv/dense feeding ReLU stacks;
/// preserves activation variance through depth, which matters here because
/// normalized timing features sit near 1e-2 and a shrinking init starves the
/// early layers of gradient.
template <class T>
void init_he_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string name() const = 0;
  /// Validates the input shape and returns the output shape.
  virtual std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) = 0;
  /// Gradients accumulate into param grads; returns dL/dx.
  virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  virtual void init(Rng&) {}

 protected:
  void check_rank(const std::vector<std::size_t>& in, std::size_t rank) const {
    if (in.size() != rank)
      throw DimensionError(name() + ": expected rank-" + std::to_string(rank) +
                           " input, got " + shape_str(in));
  }
};

// ---------------------------------------------------------------------------
// Conv2d: zero padding, configurable stride; input C x H x W.
// Forward/backward via im2col and a dense product.
// ---------------------------------------------------------------------------
template <class T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kh, int kw, int sh, int sw, int ph, int pw)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), sh_(sh), sw_(sw),
        ph_(ph), pw_(pw),
        weight_("weight", {static_cast<std::size_t>(out_ch),
                           static_cast<std::size_t>(in_ch * kh * kw)}),
        bias_("bias", {static_cast<std::size_t>(out_ch)}) {
    if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1 || sh < 1 || sw < 1 ||
        ph < 0 || pw < 0)
      throw ArgumentError("Conv2d: invalid geometry");
  }

  std::string name() const override { return "Conv2d"; }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    this->check_rank(in, 3);
    if (in[0] != static_cast<std::size_t>(in_ch_))
      throw DimensionError("Conv2d: expected " + std::to_string(in_ch_) +
                           " input channels, got " + shape_str(in));
    std::int64_t oh = (static_cast<std::int64_t>(in[1]) + 2 * ph_ - kh_) / sh_ + 1;
    std::int64_t ow = (static_cast<std::int64_t>(in[2]) + 2 * pw_ - kw_) / sw_ + 1;
    if (oh < 1 || ow < 1)
      throw DimensionError("Conv2d: kernel " + std::to_string(kh_) + "x" +
                           std::to_string(kw_) + " does not fit input " +
                           shape_str(in));
    return {static_cast<std::size_t>(out_ch_), static_cast<std::size_t>(oh),
            static_cast<std::size_t>(ow)};
  }

  void init(Rng& rng) override {
    init_he_uniform(weight_.value, static_cast<std::size_t>(in_ch_ * kh_ * kw_),
                 rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    auto os = output_shape(x.shape);
    in_shape_ = x.shape;
    const std::size_t OH = os[1], OW = os[2], P = OH * OW;
    const std::size_t K = static_cast<std::size_t>(in_ch_ * kh_ * kw_);
    col_.assign(K * P, T(0));
    im2col(x, OH, OW);

    Tensor<T> y(os);
    CMatMap<T> W(weight_.value.data.data(), out_ch_, K);
    CMatMap<T> colm(col_.data(), K, P);
    MatMap<T> ym(y.data.data(), out_ch_, P);
    ym.noalias() = W * colm;
    CVecMap<T> b(bias_.value.data.data(), out_ch_);
    ym.colwise() += b;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (col_.empty()) throw StateError("Conv2d: backward without forward");
    const std::size_t OH = gy.shape[1], OW = gy.shape[2], P = OH * OW;
    const std::size_t K = static_cast<std::size_t>(in_ch_ * kh_ * kw_);
    CMatMap<T> gym(gy.data.data(), out_ch_, P);
    CMatMap<T> colm(col_.data(), K, P);
    MatMap<T> dW(weight_.grad.data.data(), out_ch_, K);
    dW.noalias() += gym * colm.transpose();
    VecMap<T> db(bias_.grad.data.data(), out_ch_);
    db += gym.rowwise().sum();

    dcol_.assign(K * P, T(0));
    MatMap<T> dcolm(dcol_.data(), K, P);
    CMatMap<T> W(weight_.value.data.data(), out_ch_, K);
    dcolm.noalias() = W.transpose() * gym;

    Tensor<T> dx(in_shape_);
    col2im(dx, OH, OW);
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

 private:
  void im2col(const Tensor<T>& x, std::size_t OH, std::size_t OW) {
    const std::size_t H = x.shape[1], W = x.shape[2], P = OH * OW;
    for (int c = 0; c < in_ch_; ++c) {
      for (int kr = 0; kr < kh_; ++kr) {
        for (int kc = 0; kc < kw_; ++kc) {
          std::size_t row = static_cast<std::size_t>((c * kh_ + kr) * kw_ + kc);
          T* dst = &col_[row * P];
          for (std::size_t oh = 0; oh < OH; ++oh) {
            std::int64_t ih = static_cast<std::int64_t>(oh) * sh_ + kr - ph_;
            if (ih < 0 || ih >= static_cast<std::int64_t>(H)) continue;
            const T* src = &x.data[(c * H + ih) * W];
            for (std::size_t ow = 0; ow < OW; ++ow) {
              std::int64_t iw = static_cast<std::int64_t>(ow) * sw_ + kc - pw_;
              if (iw < 0 || iw >= static_cast<std::int64_t>(W)) continue;
              dst[oh * OW + ow] = src[iw];
            }
          }
        }
      }
    }
  }

  void col2im(Tensor<T>& dx, std::size_t OH, std::size_t OW) const {
    const std::size_t H = dx.shape[1], W = dx.shape[2], P = OH * OW;
    for (int c = 0; c < in_ch_; ++c) {
      for (int kr = 0; kr < kh_; ++kr) {
        for (int kc = 0; kc < kw_; ++kc) {
          std::size_t row = static_cast<std::size_t>((c * kh_ + kr) * kw_ + kc);
          const T* src = &dcol_[row * P];
          for (std::size_t oh = 0; oh < OH; ++oh) {
            std::int64_t ih = static_cast<std::int64_t>(oh) * sh_ + kr - ph_;
            if (ih < 0 || ih >= static_cast<std::int64_t>(H)) continue;
            T* dst = &dx.data[(c * H + ih) * W];
            for (std::size_t ow = 0; ow < OW; ++ow) {
              std::int64_t iw = static_cast<std::int64_t>(ow) * sw_ + kc - pw_;
              if (iw < 0 || iw >= static_cast<std::int64_t>(W)) continue;
              dst[iw] += src[oh * OW + ow];
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, kh_, kw_, sh_, sw_, ph_, pw_;
  Param<T> weight_, bias_;
  std::vector<T> col_, dcol_;
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// MaxPool2d with floor semantics (42 -> 21 -> 10 for 2x2 stride 2).
// ---------------------------------------------------------------------------
template <class T>
class MaxPool2d : public Layer<T> {
 public:
  MaxPool2d(int kh, int kw, int sh, int sw)
      : kh_(kh), kw_(kw), sh_(sh), sw_(sw) {
    if (kh < 1 || kw < 1 || sh < 1 || sw < 1)
      throw ArgumentError("MaxPool2d: invalid geometry");
  }

  std::string name() const override { return "MaxPool2d"; }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    this->check_rank(in, 3);
    if (in[1] < static_cast<std::size_t>(kh_) ||
        in[2] < static_cast<std::size_t>(kw_))
      throw DimensionError("MaxPool2d: window does not fit " + shape_str(in));
    return {in[0], (in[1] - kh_) / sh_ + 1, (in[2] - kw_) / sw_ + 1};
  }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    auto os = output_shape(x.shape);
    in_shape_ = x.shape;
    Tensor<T> y(os);
    argmax_.resize(y.numel());
    const std::size_t C = x.shape[0], H = x.shape[1], W = x.shape[2];
    const std::size_t OH = os[1], OW = os[2];
    std::size_t o = 0;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t oh = 0; oh < OH; ++oh) {
        for (std::size_t ow = 0; ow < OW; ++ow, ++o) {
          std::size_t best = (c * H + oh * sh_) * W + ow * sw_;
          T bv = x.data[best];
          for (int kr = 0; kr < kh_; ++kr) {
            for (int kc = 0; kc < kw_; ++kc) {
              std::size_t idx = (c * H + oh * sh_ + kr) * W + ow * sw_ + kc;
              if (x.data[idx] > bv) {
                bv = x.data[idx];
                best = idx;
              }
            }
          }
          y.data[o] = bv;
          argmax_[o] = best;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (argmax_.empty() && gy.numel() != 0 && in_shape_.empty())
      throw StateError("MaxPool2d: backward without forward");
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < gy.numel(); ++o)
      dx.data[argmax_[o]] += gy.data[o];
    return dx;
  }

 private:
  int kh_, kw_, sh_, sw_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Dense: y = W x + b on the flattened input.
// ---------------------------------------------------------------------------
template <class T>
class Dense : public Layer<T> {
 public:
  Dense(int in, int out)
      : in_(in), out_(out),
        weight_("weight", {static_cast<std::size_t>(out),
                           static_cast<std::size_t>(in)}),
        bias_("bias", {static_cast<std::size_t>(out)}) {
    if (in < 1 || out < 1) throw ArgumentError("Dense: invalid sizes");
  }

  std::string name() const override { return "Dense"; }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (Tensor<T>::numel_of(in) != static_cast<std::size_t>(in_))
      throw DimensionError("Dense: expected " + std::to_string(in_) +
                           " inputs, got " + shape_str(in));
    return {static_cast<std::size_t>(out_)};
  }

  void init(Rng& rng) override {
    init_he_uniform(weight_.value, static_cast<std::size_t>(in_), rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    output_shape(x.shape);
    x_ = x.data;
    Tensor<T> y({static_cast<std::size_t>(out_)});
    CMatMap<T> W(weight_.value.data.data(), out_, in_);
    CVecMap<T> xv(x_.data(), in_);
    VecMap<T> yv(y.data.data(), out_);
    yv.noalias() = W * xv;
    yv += CVecMap<T>(bias_.value.data.data(), out_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (x_.empty()) throw StateError("Dense: backward without forward");
    CMatMap<T> W(weight_.value.data.data(), out_, in_);
    CVecMap<T> gyv(gy.data.data(), out_);
    CVecMap<T> xv(x_.data(), in_);
    MatMap<T> dW(weight_.grad.data.data(), out_, in_);
    dW.noalias() += gyv * xv.transpose();
    VecMap<T>(bias_.grad.data.data(), out_) += gyv;
    Tensor<T> dx({static_cast<std::size_t>(in_)});
    VecMap<T>(dx.data.data(), in_).noalias() = W.transpose() * gyv;
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&weight_, &bias_}; }

 private:
  int in_, out_;
  Param<T> weight_, bias_;
  std::vector<T> x_;
};

template <class T>
class ReLU : public Layer<T> {
 public:
  std::string name() const override { return "ReLU"; }
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return in;
  }
  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    mask_.assign(x.numel(), 0);
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.numel(); ++i) {
      if (y.data[i] > T(0))
        mask_[i] = 1;
      else
        y.data[i] = T(0);
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> dx = gy;
    for (std::size_t i = 0; i < dx.numel(); ++i)
      if (!mask_[i]) dx.data[i] = T(0);
    return dx;
  }

 private:
  std::vector<unsigned char> mask_;
};

template <class T>
class Sigmoid : public Layer<T> {
 public:
  std::string name() const override { return "Sigmoid"; }
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return in;
  }
  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    Tensor<T> y = x;
    for (auto& v : y.data) v = T(1) / (T(1) + std::exp(-v));
    y_ = y.data;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> dx = gy;
    for (std::size_t i = 0; i < dx.numel(); ++i)
      dx.data[i] *= y_[i] * (T(1) - y_[i]);
    return dx;
  }

 private:
  std::vector<T> y_;
};

/// Inverted dropout: survivors scaled by 1/(1-rate) so inference is a no-op.
template <class T>
class Dropout : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0)
      throw ArgumentError("Dropout: rate must be in [0, 1)");
  }
  std::string name() const override { return "Dropout"; }
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return in;
  }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override {
    Tensor<T> y = x;
    mask_.assign(x.numel(), 1);
    if (training && rate_ > 0.0) {
      T scale = T(1.0 / (1.0 - rate_));
      for (std::size_t i = 0; i < y.numel(); ++i) {
        if (rng.bernoulli(rate_)) {
          mask_[i] = 0;
          y.data[i] = T(0);
        } else {
          y.data[i] *= scale;
        }
      }
    }
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> dx = gy;
    T scale = T(1.0 / (1.0 - rate_));
    for (std::size_t i = 0; i < dx.numel(); ++i)
      dx.data[i] = mask_[i] ? dx.data[i] * scale : T(0);
    return dx;
  }

 private:
  double rate_;
  std::vector<unsigned char> mask_;
};

template <class T>
class Flatten : public Layer<T> {
 public:
  std::string name() const override { return "Flatten"; }
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    return {Tensor<T>::numel_of(in)};
  }
  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    in_shape_ = x.shape;
    Tensor<T> y = x;
    y.shape = {x.numel()};
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> dx = gy;
    dx.shape = in_shape_;
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

/// Pure view change; numel must match.
template <class T>
class Reshape : public Layer<T> {
 public:
  explicit Reshape(std::vector<std::size_t> target) : target_(std::move(target)) {}
  std::string name() const override { return "Reshape"; }
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    if (Tensor<T>::numel_of(in) != Tensor<T>::numel_of(target_))
      throw DimensionError("Reshape: cannot view " + shape_str(in) + " as " +
                           shape_str(target_));
    return target_;
  }
  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    output_shape(x.shape);
    in_shape_ = x.shape;
    Tensor<T> y = x;
    y.shape = target_;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> dx = gy;
    dx.shape = in_shape_;
    return dx;
  }

 private:
  std::vector<std::size_t> target_, in_shape_;
};

/// C x L x W -> L x (C*W): turns a conv feature map into a timestep-major
/// sequence for the recurrent stack. Feature order within a step is
/// channel-major.
template <class T>
class ToSequence : public Layer<T> {
 public:
  std::string name() const override { return "ToSequence"; }
  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    this->check_rank(in, 3);
    return {in[1], in[0] * in[2]};
  }
  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    auto os = output_shape(x.shape);
    in_shape_ = x.shape;
    const std::size_t C = x.shape[0], L = x.shape[1], W = x.shape[2];
    Tensor<T> y(os);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t w = 0; w < W; ++w)
          y.data[l * (C * W) + c * W + w] = x.data[(c * L + l) * W + w];
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) override {
    const std::size_t C = in_shape_[0], L = in_shape_[1], W = in_shape_[2];
    Tensor<T> dx(in_shape_);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t w = 0; w < W; ++w)
          dx.data[(c * L + l) * W + w] = gy.data[l * (C * W) + c * W + w];
    return dx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

enum class RnnKind { RNN, GRU, LSTM };

inline int gate_count(RnnKind k) {
  switch (k) {
    case RnnKind::RNN: return 1;
    case RnnKind::GRU: return 3;
    case RnnKind::LSTM: return 4;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Stacked recurrent layers over an L x F input sequence. Emits the final
// hidden state of the top layer. Standard cell formulations; gate blocks are
// GRU [r, z, n], LSTM [i, f, g, o]. Hidden state starts at zero unless
// overridden via set_initial_hidden.
// ---------------------------------------------------------------------------
template <class T>
class RecurrentStack : public Layer<T> {
 public:
  RecurrentStack(RnnKind kind, int input_size, int hidden, int num_layers)
      : kind_(kind), input_(input_size), hidden_(hidden), layers_(num_layers) {
    if (input_size < 1 || hidden < 1 || num_layers < 1)
      throw ArgumentError("RecurrentStack: invalid sizes");
    int G = gate_count(kind);
    for (int l = 0; l < num_layers; ++l) {
      int in = l == 0 ? input_size : hidden;
      std::string p = "l" + std::to_string(l) + ".";
      w_ih_.emplace_back(p + "w_ih",
                         std::vector<std::size_t>{
                             static_cast<std::size_t>(G * hidden),
                             static_cast<std::size_t>(in)});
      w_hh_.emplace_back(p + "w_hh",
                         std::vector<std::size_t>{
                             static_cast<std::size_t>(G * hidden),
                             static_cast<std::size_t>(hidden)});
      b_ih_.emplace_back(p + "b_ih", std::vector<std::size_t>{
                                         static_cast<std::size_t>(G * hidden)});
      b_hh_.emplace_back(p + "b_hh", std::vector<std::size_t>{
                                         static_cast<std::size_t>(G * hidden)});
    }
  }

  std::string name() const override {
    switch (kind_) {
      case RnnKind::RNN: return "RNNStack";
      case RnnKind::GRU: return "GRUStack";
      case RnnKind::LSTM: return "LSTMStack";
    }
    return "RecurrentStack";
  }

  std::vector<std::size_t> output_shape(
      const std::vector<std::size_t>& in) const override {
    this->check_rank(in, 2);
    if (in[1] != static_cast<std::size_t>(input_))
      throw DimensionError(name() + ": expected feature width " +
                           std::to_string(input_) + ", got " + shape_str(in));
    if (in[0] < 1) throw DimensionError(name() + ": empty sequence");
    return {static_cast<std::size_t>(hidden_)};
  }

  void init(Rng& rng) override {
    for (int l = 0; l < layers_; ++l) {
      init_uniform(w_ih_[l].value, w_ih_[l].value.shape[1], rng);
      init_uniform(w_hh_[l].value, static_cast<std::size_t>(hidden_), rng);
    }
  }

  /// Same starting hidden (and LSTM cell = 0) for every layer; test hook.
  void set_initial_hidden(const std::vector<T>& h0) {
    if (static_cast<int>(h0.size()) != hidden_)
      throw DimensionError("initial hidden size mismatch");
    h0_ = h0;
  }

  Tensor<T> forward(const Tensor<T>& x, bool, Rng&) override {
    output_shape(x.shape);
    const int L = static_cast<int>(x.shape[0]);
    const int G = gate_count(kind_);
    seq_len_ = L;
    cache_.assign(layers_, LayerCache{});

    // Layer 0 input is x; deeper layers consume the hidden sequence below.
    std::vector<T> cur(x.data);
    int cur_w = input_;
    for (int l = 0; l < layers_; ++l) {
      auto& c = cache_[l];
      c.x = cur;
      c.in_w = cur_w;
      c.h.assign(static_cast<std::size_t>(L + 1) * hidden_, T(0));
      c.gates.assign(static_cast<std::size_t>(L) * G * hidden_, T(0));
      if (kind_ == RnnKind::LSTM)
        c.cell.assign(static_cast<std::size_t>(L + 1) * hidden_, T(0));
      if (kind_ == RnnKind::GRU)
        c.hn_pre.assign(static_cast<std::size_t>(L) * hidden_, T(0));
      if (!h0_.empty())
        std::copy(h0_.begin(), h0_.end(), c.h.begin());

      for (int t = 0; t < L; ++t) step_forward(l, t);

      cur.assign(c.h.begin() + hidden_, c.h.end());  // h_1..h_L
      cur_w = hidden_;
    }
    Tensor<T> y({static_cast<std::size_t>(hidden_)});
    const auto& top = cache_.back();
    std::copy(top.h.begin() + static_cast<std::size_t>(L) * hidden_,
              top.h.end(), y.data.begin());
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    if (cache_.empty()) throw StateError(name() + ": backward without forward");
    const int L = seq_len_;
    // dh over the full sequence of the layer above; top layer only receives
    // gradient at the final step.
    std::vector<T> dseq(static_cast<std::size_t>(L) * hidden_, T(0));
    std::copy(gy.data.begin(), gy.data.end(),
              dseq.begin() + static_cast<std::size_t>(L - 1) * hidden_);

    std::vector<T> dx_below;
    for (int l = layers_ - 1; l >= 0; --l) {
      dx_below.assign(static_cast<std::size_t>(L) * cache_[l].in_w, T(0));
      std::vector<T> dh(hidden_, T(0)), dc(hidden_, T(0));
      for (int t = L - 1; t >= 0; --t) {
        for (int i = 0; i < hidden_; ++i)
          dh[i] += dseq[static_cast<std::size_t>(t) * hidden_ + i];
        step_backward(l, t, dh, dc, dx_below);
      }
      dseq.swap(dx_below);  // becomes dh sequence for the layer below
    }
    Tensor<T> dx({static_cast<std::size_t>(L), static_cast<std::size_t>(input_)});
    dx.data = std::move(dseq);
    return dx;
  }

  std::vector<Param<T>*> params() override {
    std::vector<Param<T>*> out;
    for (int l = 0; l < layers_; ++l) {
      out.push_back(&w_ih_[l]);
      out.push_back(&w_hh_[l]);
      out.push_back(&b_ih_[l]);
      out.push_back(&b_hh_[l]);
    }
    return out;
  }

 private:
  struct LayerCache {
    std::vector<T> x;       // L x in_w input sequence
    std::vector<T> h;       // (L+1) x H, h[0] = initial
    std::vector<T> cell;    // (L+1) x H (LSTM)
    std::vector<T> gates;   // L x G*H activated gate values
    std::vector<T> hn_pre;  // L x H, GRU W_hn h + b_hn
    int in_w = 0;
  };

  static T sigm(T v) { return T(1) / (T(1) + std::exp(-v)); }

  void step_forward(int l, int t) {
    auto& c = cache_[l];
    const int G = gate_count(kind_), H = hidden_;
    CVecMap<T> xt(&c.x[static_cast<std::size_t>(t) * c.in_w], c.in_w);
    CVecMap<T> hprev(&c.h[static_cast<std::size_t>(t) * H], H);
    Vec<T> gi(G * H), gh(G * H);
    CMatMap<T> Wih(w_ih_[l].value.data.data(), G * H, c.in_w);
    CMatMap<T> Whh(w_hh_[l].value.data.data(), G * H, H);
    gi.noalias() = Wih * xt;
    gi += CVecMap<T>(b_ih_[l].value.data.data(), G * H);
    gh.noalias() = Whh * hprev;
    gh += CVecMap<T>(b_hh_[l].value.data.data(), G * H);

    T* gates = &c.gates[static_cast<std::size_t>(t) * G * H];
    T* hnew = &c.h[static_cast<std::size_t>(t + 1) * H];
    switch (kind_) {
      case RnnKind::RNN:
        for (int i = 0; i < H; ++i) {
          gates[i] = std::tanh(gi[i] + gh[i]);
          hnew[i] = gates[i];
        }
        break;
      case RnnKind::GRU: {
        T* hn_pre = &c.hn_pre[static_cast<std::size_t>(t) * H];
        for (int i = 0; i < H; ++i) {
          T r = sigm(gi[i] + gh[i]);
          T z = sigm(gi[H + i] + gh[H + i]);
          hn_pre[i] = gh[2 * H + i];
          T n = std::tanh(gi[2 * H + i] + r * hn_pre[i]);
          gates[i] = r;
          gates[H + i] = z;
          gates[2 * H + i] = n;
          hnew[i] = (T(1) - z) * n + z * hprev[i];
        }
        break;
      }
      case RnnKind::LSTM: {
        const T* cprev = &c.cell[static_cast<std::size_t>(t) * H];
        T* cnew = &c.cell[static_cast<std::size_t>(t + 1) * H];
        for (int i = 0; i < H; ++i) {
          T in = sigm(gi[i] + gh[i]);
          T f = sigm(gi[H + i] + gh[H + i]);
          T g = std::tanh(gi[2 * H + i] + gh[2 * H + i]);
          T o = sigm(gi[3 * H + i] + gh[3 * H + i]);
          gates[i] = in;
          gates[H + i] = f;
          gates[2 * H + i] = g;
          gates[3 * H + i] = o;
          cnew[i] = f * cprev[i] + in * g;
          hnew[i] = o * std::tanh(cnew[i]);
        }
        break;
      }
    }
  }

  /// Consumes dh (dL/dh_t), emits dh for t-1 in place, accumulates grads and
  /// the input-sequence gradient.
  void step_backward(int l, int t, std::vector<T>& dh, std::vector<T>& dc,
                     std::vector<T>& dx_seq) {
    auto& c = cache_[l];
    const int G = gate_count(kind_), H = hidden_;
    const T* gates = &c.gates[static_cast<std::size_t>(t) * G * H];
    const T* hprev = &c.h[static_cast<std::size_t>(t) * H];

    Vec<T> dgates(G * H);
    std::vector<T> dh_direct(H, T(0));  // recurrence path outside W_hh
    switch (kind_) {
      case RnnKind::RNN:
        for (int i = 0; i < H; ++i)
          dgates[i] = dh[i] * (T(1) - gates[i] * gates[i]);
        break;
      case RnnKind::GRU: {
        const T* hn_pre = &c.hn_pre[static_cast<std::size_t>(t) * H];
        for (int i = 0; i < H; ++i) {
          T r = gates[i], z = gates[H + i], n = gates[2 * H + i];
          T dn_pre = dh[i] * (T(1) - z) * (T(1) - n * n);
          T dz = dh[i] * (hprev[i] - n) * z * (T(1) - z);
          T dr = dn_pre * hn_pre[i] * r * (T(1) - r);
          dgates[i] = dr;
          dgates[H + i] = dz;
          dgates[2 * H + i] = dn_pre;
          dh_direct[i] = dh[i] * z;
        }
        break;
      }
      case RnnKind::LSTM: {
        const T* cprev = &c.cell[static_cast<std::size_t>(t) * H];
        const T* cnew = &c.cell[static_cast<std::size_t>(t + 1) * H];
        for (int i = 0; i < H; ++i) {
          T in = gates[i], f = gates[H + i], g = gates[2 * H + i],
            o = gates[3 * H + i];
          T tc = std::tanh(cnew[i]);
          T dct = dc[i] + dh[i] * o * (T(1) - tc * tc);
          dgates[i] = dct * g * in * (T(1) - in);
          dgates[H + i] = dct * cprev[i] * f * (T(1) - f);
          dgates[2 * H + i] = dct * in * (T(1) - g * g);
          dgates[3 * H + i] = dh[i] * tc * o * (T(1) - o);
          dc[i] = dct * f;
        }
        break;
      }
    }

    // GRU: the W_hh path for the n gate goes through r; scale before the
    // matrix products, then restore the b_ih/W_ih path value.
    Vec<T> dgates_h = dgates;
    if (kind_ == RnnKind::GRU)
      for (int i = 0; i < H; ++i) dgates_h[2 * H + i] *= gates[i];

    CVecMap<T> xt(&c.x[static_cast<std::size_t>(t) * c.in_w], c.in_w);
    CVecMap<T> hp(hprev, H);
    MatMap<T> dWih(w_ih_[l].grad.data.data(), G * H, c.in_w);
    MatMap<T> dWhh(w_hh_[l].grad.data.data(), G * H, H);
    dWih.noalias() += dgates * xt.transpose();
    dWhh.noalias() += dgates_h * hp.transpose();
    VecMap<T>(b_ih_[l].grad.data.data(), G * H) += dgates;
    VecMap<T>(b_hh_[l].grad.data.data(), G * H) += dgates_h;

    CMatMap<T> Wih(w_ih_[l].value.data.data(), G * H, c.in_w);
    CMatMap<T> Whh(w_hh_[l].value.data.data(), G * H, H);
    VecMap<T> dxt(&dx_seq[static_cast<std::size_t>(t) * c.in_w], c.in_w);
    dxt.noalias() += Wih.transpose() * dgates;
    Vec<T> dhprev = Whh.transpose() * dgates_h;
    for (int i = 0; i < H; ++i) dh[i] = dhprev[i] + dh_direct[i];
  }

  RnnKind kind_;
  int input_, hidden_, layers_;
  std::vector<Param<T>> w_ih_, w_hh_, b_ih_, b_hh_;
  std::vector<LayerCache> cache_;
  std::vector<T> h0_;
  int seq_len_ = 0;
};

}  // namespace kdt::nn

#endif  // KDT_NN_LAYERS_HPP_
