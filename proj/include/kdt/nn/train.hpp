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

#ifndef KDT_NN_TRAIN_HPP_
#define KDT_NN_TRAIN_HPP_

#include <functional>
#include <numeric>
#include <vector>

#include "kdt/nn/gradcheck.hpp"
#include "kdt/nn/optim.hpp"

namespace kdt::nn {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  OptimizerSpec optimizer;
  ScheduleSpec schedule;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double final_lr = 0.0;
};

/// Per-epoch, seeded-shuffle minibatch training of a sigmoid-output binary
/// classifier under BCE. `augment` (optional) is applied to each training
/// sample per visit, so stochastic cutout draws fresh positions every epoch.
template <class T>
TrainReport train(Network<T>& net, const std::vector<Tensor<T>>& inputs,
                  const std::vector<int>& labels, const TrainConfig& cfg,
                  const std::function<Tensor<T>(const Tensor<T>&, Rng&)>&
                      augment = nullptr) {
  if (inputs.size() != labels.size() || inputs.empty())
    throw ArgumentError("train: inputs/labels mismatch or empty");
  cfg.optimizer.validate();
  cfg.schedule.validate();

  auto params = net.params();
  Optimizer<T> opt(cfg.optimizer, params);
  LrScheduler sched(cfg.schedule, cfg.optimizer.learning_rate);

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport rep;
  double lr = cfg.optimizer.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x1000 + epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    Rng aug_rng(mix_seed(cfg.seed, 0x2000 + epoch));

    double loss_sum = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      std::size_t end = std::min(order.size(),
                                 pos + static_cast<std::size_t>(cfg.batch_size));
      std::size_t bsz = end - pos;
      net.zero_grad();
      for (std::size_t k = pos; k < end; ++k) {
        std::size_t idx = order[k];
        Tensor<T> x = augment ? augment(inputs[idx], aug_rng) : inputs[idx];
        std::uint64_t fwd_seed = mix_seed(cfg.seed, 0x3000 + epoch * 131071 + k);
        Tensor<T> out = net.forward(x, /*training=*/true, fwd_seed);
        T p = out.data[0];
        T y = static_cast<T>(labels[idx]);
        loss_sum += static_cast<double>(bce_loss(p, y));
        Tensor<T> gy({1});
        gy.data[0] = bce_grad(p, y) / static_cast<T>(bsz);
        net.backward(gy);
      }
      opt.step(params, lr);
      pos = end;
    }
    double mean_loss = loss_sum / static_cast<double>(order.size());
    rep.epoch_loss.push_back(mean_loss);
    lr = sched.on_epoch(epoch + 1, mean_loss);
  }
  rep.final_lr = lr;
  return rep;
}

/// Forward-only scores on frozen parameters.
template <class T>
std::vector<double> score_all(Network<T>& net,
                              const std::vector<Tensor<T>>& inputs) {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs)
    out.push_back(static_cast<double>(net.forward(x, false).data[0]));
  return out;
}

}  // namespace kdt::nn

#endif  // KDT_NN_TRAIN_HPP_
