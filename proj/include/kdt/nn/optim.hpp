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

#ifndef KDT_NN_OPTIM_HPP_
#define KDT_NN_OPTIM_HPP_

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdt/nn/network.hpp"

namespace kdt::nn {

enum class OptKind { Adam, SGD, SGDMomentum };

inline std::string to_string(OptKind k) {
  switch (k) {
    case OptKind::Adam: return "adam";
    case OptKind::SGD: return "sgd";
    case OptKind::SGDMomentum: return "sgd_momentum";
  }
  return "?";
}

inline OptKind opt_kind_from_string(const std::string& s) {
  if (s == "adam") return OptKind::Adam;
  if (s == "sgd") return OptKind::SGD;
  if (s == "sgd_momentum" || s == "momentum") return OptKind::SGDMomentum;
  throw FormatError("unknown optimizer: " + s);
}

struct OptimizerSpec {
  OptKind kind = OptKind::Adam;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (learning_rate <= 0.0) throw ArgumentError("learning_rate must be > 0");
  }
};

enum class ScheduleKind { StepLR, Plateau, None };

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::StepLR;
  double gamma = 0.1;       // StepLR decay factor
  int step_epochs = 50;     // StepLR period
  double factor = 0.1;      // Plateau decay factor
  int patience = 10;        // Plateau epochs without improvement

  void validate() const {
    if (kind == ScheduleKind::StepLR &&
        (gamma <= 0.0 || gamma >= 1.0 || step_epochs < 1))
      throw ArgumentError("StepLR: gamma in (0,1), step_epochs >= 1");
    if (kind == ScheduleKind::Plateau &&
        (factor <= 0.0 || factor >= 1.0 || patience < 1))
      throw ArgumentError("Plateau: factor in (0,1), patience >= 1");
  }
};

inline std::string to_string(const ScheduleSpec& s) {
  switch (s.kind) {
    case ScheduleKind::StepLR:
      return "steplr(" + std::to_string(s.gamma) + "," +
             std::to_string(s.step_epochs) + ")";
    case ScheduleKind::Plateau:
      return "plateau";
    case ScheduleKind::None:
      return "none";
  }
  return "?";
}

/// Learning-rate schedule state; never raises the rate.
class LrScheduler {
 public:
  LrScheduler(ScheduleSpec spec, double initial_lr)
      : spec_(spec), lr0_(initial_lr), lr_(initial_lr) {
    spec.validate();
  }

  /// epoch is 0-based; loss is the epoch's mean training loss (Plateau).
  double on_epoch(int epoch, double loss) {
    switch (spec_.kind) {
      case ScheduleKind::StepLR:
        lr_ = lr0_ * std::pow(spec_.gamma, epoch / spec_.step_epochs);
        break;
      case ScheduleKind::Plateau:
        if (loss < best_ - 1e-12) {
          best_ = loss;
          stale_ = 0;
        } else if (++stale_ >= spec_.patience) {
          lr_ *= spec_.factor;
          stale_ = 0;
        }
        break;
      case ScheduleKind::None:
        break;
    }
    return lr_;
  }

  double lr() const { return lr_; }

 private:
  ScheduleSpec spec_;
  double lr0_, lr_;
  double best_ = std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

/// Parameter updates with per-parameter moment buffers. Aborts training on
/// non-finite gradients.
template <class T>
class Optimizer {
 public:
  Optimizer(OptimizerSpec spec, const std::vector<Param<T>*>& params)
      : spec_(spec) {
    spec.validate();
    if (spec_.kind != OptKind::SGD)
      for (auto* p : params) m_.emplace_back(p->value.numel(), 0.0);
    if (spec_.kind == OptKind::Adam)
      for (auto* p : params) v_.emplace_back(p->value.numel(), 0.0);
  }

  void step(const std::vector<Param<T>*>& params, double lr) {
    ++t_;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto& value = params[pi]->value.data;
      const auto& grad = params[pi]->grad.data;
      for (std::size_t i = 0; i < value.size(); ++i) {
        double g = static_cast<double>(grad[i]);
        if (!std::isfinite(g))
          throw TrainingAborted("non-finite gradient in " + params[pi]->name +
                                " at step " + std::to_string(t_));
        switch (spec_.kind) {
          case OptKind::SGD:
            value[i] -= static_cast<T>(lr * g);
            break;
          case OptKind::SGDMomentum: {
            double& m = m_[pi][i];
            m = spec_.momentum * m + g;
            value[i] -= static_cast<T>(lr * m);
            break;
          }
          case OptKind::Adam: {
            double& m = m_[pi][i];
            double& v = v_[pi][i];
            m = spec_.beta1 * m + (1.0 - spec_.beta1) * g;
            v = spec_.beta2 * v + (1.0 - spec_.beta2) * g * g;
            double mhat = m / (1.0 - std::pow(spec_.beta1, t_));
            double vhat = v / (1.0 - std::pow(spec_.beta2, t_));
            value[i] -= static_cast<T>(lr * mhat /
                                       (std::sqrt(vhat) + spec_.eps));
            break;
          }
        }
      }
    }
  }

 private:
  OptimizerSpec spec_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace kdt::nn

#endif  // KDT_NN_OPTIM_HPP_
