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

#ifndef KDT_NN_GRADCHECK_HPP_
#define KDT_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "kdt/nn/network.hpp"

namespace kdt::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central finite differences against analytic backprop, in double precision
/// so float rounding cannot mask a backprop defect. Forward passes reuse a
/// fixed dropout seed, keeping the loss a deterministic function of the
/// parameters. Checks every parameter unless max_checked caps the count, in
/// which case a seeded sample is taken per tensor.
inline GradCheckReport grad_check(const std::vector<LayerSpec>& specs,
                                  const Tensor<double>& x, double y,
                                  double epsilon = 1e-3,
                                  double tolerance = 1e-4,
                                  std::uint64_t init_seed = 1,
                                  std::size_t max_checked = 0) {
  Network<double> net(specs, init_seed);
  const std::uint64_t fwd_seed = 42;

  auto loss_at = [&]() {
    Tensor<double> out = net.forward(x, /*training=*/true, fwd_seed);
    return bce_loss(out.data[0], y);
  };

  // Analytic gradients.
  net.zero_grad();
  Tensor<double> out = net.forward(x, true, fwd_seed);
  Tensor<double> gy({1});
  gy.data[0] = bce_grad(out.data[0], y);
  net.backward(gy);

  GradCheckReport rep;
  auto params = net.params();
  std::size_t total = 0;
  for (auto* p : params) total += p->value.numel();
  Rng pick(init_seed ^ 0x5eedULL);
  for (auto* p : params) {
    std::size_t n = p->value.numel();
    std::vector<std::size_t> idxs;
    if (max_checked == 0 || total <= max_checked) {
      idxs.resize(n);
      for (std::size_t i = 0; i < n; ++i) idxs[i] = i;
    } else {
      std::size_t want = std::max<std::size_t>(
          1, max_checked * n / std::max<std::size_t>(1, total));
      for (std::size_t i = 0; i < want; ++i) idxs.push_back(pick.below(n));
    }
    for (std::size_t i : idxs) {
      double orig = p->value.data[i];
      p->value.data[i] = orig + epsilon;
      double lp = loss_at();
      p->value.data[i] = orig - epsilon;
      double lm = loss_at();
      p->value.data[i] = orig;
      double numeric = (lp - lm) / (2.0 * epsilon);
      double analytic = p->grad.data[i];
      double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      double rel = std::abs(numeric - analytic) / denom;
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  rep.pass = rep.max_rel_error < tolerance;
  return rep;
}

}  // namespace kdt::nn

#endif  // KDT_NN_GRADCHECK_HPP_
