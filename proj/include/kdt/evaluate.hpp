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

#ifndef KDT_EVALUATE_HPP_
#define KDT_EVALUATE_HPP_

#include <algorithm>
#include <cstdio>
#include <future>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "kdt/common.hpp"
#include "kdt/features.hpp"
#include "kdt/models.hpp"
#include "kdt/nn/train.hpp"
#include "kdt/tensor.hpp"

namespace kdt {

struct LabeledSample {
  Tensor<float> x;
  int label = 0;                // 1 = target user, 0 = impostor
  std::string source_user;      // provenance for negatives
};

struct LabeledSet {
  std::string user_id;
  std::vector<LabeledSample> samples;
};

/// Per-user binary dataset: every target sample labeled positive, an equal
/// number of negatives drawn without replacement from the other users,
/// allocated proportionally to their sample counts (largest-remainder
/// rounding), uniformly within each user.
inline LabeledSet assemble(
    const std::string& user,
    const std::map<std::string, std::vector<Tensor<float>>>& all_users,
    std::uint64_t seed) {
  auto it = all_users.find(user);
  if (it == all_users.end() || it->second.size() < 2)
    throw ArgumentError("assemble: target user needs at least 2 samples");

  LabeledSet set;
  set.user_id = user;
  for (const auto& t : it->second)
    set.samples.push_back({t, 1, user});
  const std::size_t need = it->second.size();

  std::vector<std::pair<std::string, std::size_t>> others;
  std::size_t avail = 0;
  for (const auto& [uid, feats] : all_users) {
    if (uid == user) continue;
    others.emplace_back(uid, feats.size());
    avail += feats.size();
  }
  if (others.empty()) throw ArgumentError("assemble: no other users");
  if (avail < need)
    throw ArgumentError("assemble: need " + std::to_string(need) +
                        " negatives but only " + std::to_string(avail) +
                        " samples available across other users");

  // Largest-remainder apportionment of `need` negatives.
  std::vector<std::size_t> alloc(others.size());
  std::vector<std::pair<double, std::size_t>> rema;  // remainder, index
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < others.size(); ++i) {
    double exact = static_cast<double>(need) * others[i].second / avail;
    alloc[i] = static_cast<std::size_t>(exact);
    assigned += alloc[i];
    rema.emplace_back(exact - static_cast<double>(alloc[i]), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (std::size_t k = 0; assigned < need; ++assigned, ++k) {
    std::size_t i = rema[k % rema.size()].second;
    ++alloc[i];
  }
  // Cap at availability; spill the excess round-robin.
  for (std::size_t round = 0; round < others.size(); ++round) {
    std::size_t spill = 0;
    for (std::size_t i = 0; i < others.size(); ++i)
      if (alloc[i] > others[i].second) {
        spill += alloc[i] - others[i].second;
        alloc[i] = others[i].second;
      }
    if (spill == 0) break;
    for (std::size_t i = 0; i < others.size() && spill > 0; ++i) {
      std::size_t room = others[i].second - alloc[i];
      std::size_t take = std::min(room, spill);
      alloc[i] += take;
      spill -= take;
    }
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < others.size(); ++i) {
    const auto& feats = all_users.at(others[i].first);
    std::vector<std::size_t> idx(feats.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t j = idx.size(); j > 1; --j)
      std::swap(idx[j - 1], idx[rng.below(j)]);
    for (std::size_t j = 0; j < alloc[i]; ++j)
      set.samples.push_back({feats[idx[j]], 0, others[i].first});
  }
  return set;
}

struct RocPoint {
  double fpr = 0.0;
  double fnr = 0.0;
  double threshold = 0.0;
};

/// ROC as (FPR, FNR, threshold) at every distinct-score midpoint plus
/// endpoints below and above all scores. FPR(t) = fraction of negatives with
/// score >= t; FNR(t) = fraction of positives with score < t.
inline std::vector<RocPoint> roc_points(
    const std::vector<std::pair<double, int>>& scores) {
  std::size_t np = 0, nn = 0;
  for (const auto& [s, y] : scores) (y ? np : nn)++;
  if (np == 0 || nn == 0)
    throw MetricError("roc/eer undefined: need both classes");

  std::vector<double> distinct;
  distinct.reserve(scores.size());
  for (const auto& [s, y] : scores) distinct.push_back(s);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  std::vector<double> thresholds;
  thresholds.push_back(distinct.front() - 1.0);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
    thresholds.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  thresholds.push_back(distinct.back() + 1.0);

  std::vector<double> pos, neg;
  for (const auto& [s, y] : scores) (y ? pos : neg).push_back(s);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    auto fp = neg.end() - std::lower_bound(neg.begin(), neg.end(), t);
    auto fn = std::lower_bound(pos.begin(), pos.end(), t) - pos.begin();
    out.push_back({static_cast<double>(fp) / nn,
                   static_cast<double>(fn) / np, t});
  }
  return out;
}

/// Equal error rate: sweep the distinct-score midpoints, then linearly
/// interpolate between the two adjacent thresholds bracketing FPR = FNR.
/// Interpolation runs in error space, so any strictly increasing transform
/// of the scores leaves the value unchanged.
inline std::pair<double, double> eer(
    const std::vector<std::pair<double, int>>& scores) {
  auto roc = roc_points(scores);
  // FPR falls and FNR rises as t sweeps up, so FPR - FNR is non-increasing;
  // find its sign change.
  for (std::size_t i = 0; i < roc.size(); ++i) {
    double d = roc[i].fpr - roc[i].fnr;
    if (d == 0.0) return {roc[i].fpr, roc[i].threshold};
    if (d < 0.0) {
      if (i == 0) return {roc[0].fpr, roc[0].threshold};  // not reachable
      const auto& a = roc[i - 1];
      const auto& b = roc[i];
      double da = a.fpr - a.fnr;  // > 0
      double db = b.fpr - b.fnr;  // < 0
      double alpha = da / (da - db);
      double value = a.fpr + alpha * (b.fpr - a.fpr);
      double thr = a.threshold + alpha * (b.threshold - a.threshold);
      return {value, thr};
    }
  }
  const auto& last = roc.back();
  return {last.fpr, last.threshold};
}

/// Fraction correct at the given threshold; score >= threshold is positive.
inline double accuracy(const std::vector<std::pair<double, int>>& scores,
                       double threshold = 0.5) {
  if (scores.empty()) throw MetricError("accuracy of empty score set");
  std::size_t correct = 0;
  for (const auto& [s, y] : scores)
    if ((s >= threshold) == (y == 1)) ++correct;
  return static_cast<double>(correct) / scores.size();
}

struct FoldPlan {
  int k = 5;
  std::vector<int> assignment;  // sample index -> fold id
  std::uint64_t seed = 0;
};

/// Stratified partition: each class shuffled with the seed and dealt
/// round-robin, keeping per-fold class balance within one sample.
inline FoldPlan make_folds(const LabeledSet& set, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("make_folds: k must be >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(set.samples.size(), -1);
  Rng rng(seed);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < set.samples.size(); ++i)
      if (set.samples[i].label == cls) idx.push_back(i);
    for (std::size_t j = idx.size(); j > 1; --j)
      std::swap(idx[j - 1], idx[rng.below(j)]);
    for (std::size_t j = 0; j < idx.size(); ++j)
      plan.assignment[idx[j]] = static_cast<int>(j % k);
  }
  return plan;
}

struct Metrics {
  double accuracy = 0.0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::vector<RocPoint> roc;
};

struct CvResult {
  std::vector<Metrics> folds;
  Metrics mean;  // roc left empty in the mean
};

enum class FeatureLayout { Kdi, Kds };

struct EvalConfig {
  std::vector<nn::LayerSpec> model;
  nn::TrainConfig train;
  FeatureLayout layout = FeatureLayout::Kdi;
  CutoutSpec cutout;          // enabled=false disables augmentation
  int k_folds = 5;
  int jobs = 1;
};

/// Stratified k-fold cross validation. The model is re-initialized per fold
/// from a fold-derived seed; all randomness flows from explicit seeds, so
/// parallel and serial schedules give identical results.
inline CvResult cross_validate(const LabeledSet& set, const EvalConfig& cfg,
                               std::uint64_t seed) {
  std::size_t np = 0, nn_ = 0;
  for (const auto& s : set.samples) (s.label ? np : nn_)++;
  if (np < static_cast<std::size_t>(cfg.k_folds) ||
      nn_ < static_cast<std::size_t>(cfg.k_folds))
    throw ArgumentError("cross_validate: need >= k samples per class");

  FoldPlan plan = make_folds(set, cfg.k_folds, mix_seed(seed, 0xF01D));

  auto run_fold = [&](int fold) -> Metrics {
    std::vector<Tensor<float>> train_x, test_x;
    std::vector<int> train_y, test_y;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      if (plan.assignment[i] == fold) {
        test_x.push_back(set.samples[i].x);
        test_y.push_back(set.samples[i].label);
      } else {
        train_x.push_back(set.samples[i].x);
        train_y.push_back(set.samples[i].label);
      }
    }
    nn::TrainConfig tc = cfg.train;
    tc.seed = mix_seed(seed, 0xA000 + fold);
    nn::Network<float> net(cfg.model, mix_seed(seed, 0xB000 + fold));

    std::function<Tensor<float>(const Tensor<float>&, Rng&)> aug;
    if (cfg.cutout.enabled) {
      CutoutSpec cs = cfg.cutout;
      if (cfg.layout == FeatureLayout::Kdi)
        aug = [cs](const Tensor<float>& t, Rng& r) {
          return apply_cutout_kdi(t, cs, r);
        };
      else
        aug = [cs](const Tensor<float>& t, Rng& r) {
          return apply_cutout_kds(t, cs, r);
        };
    }
    try {
      nn::train(net, train_x, train_y, tc, aug);
    } catch (const TrainingAborted& e) {
      throw TrainingAborted("fold " + std::to_string(fold) + ": " + e.what());
    }
    auto s = nn::score_all(net, test_x);
    std::vector<std::pair<double, int>> scored;
    for (std::size_t i = 0; i < s.size(); ++i)
      scored.emplace_back(s[i], test_y[i]);
    Metrics m;
    m.accuracy = accuracy(scored);
    auto [e, t] = eer(scored);
    m.eer = e;
    m.eer_threshold = t;
    m.roc = roc_points(scored);
    return m;
  };

  CvResult res;
  res.folds.resize(cfg.k_folds);
  if (cfg.jobs > 1) {
    std::vector<std::future<Metrics>> futs;
    for (int f = 0; f < cfg.k_folds; ++f)
      futs.push_back(std::async(std::launch::async, run_fold, f));
    for (int f = 0; f < cfg.k_folds; ++f) res.folds[f] = futs[f].get();
  } else {
    for (int f = 0; f < cfg.k_folds; ++f) res.folds[f] = run_fold(f);
  }
  for (const auto& m : res.folds) {
    res.mean.accuracy += m.accuracy / cfg.k_folds;
    res.mean.eer += m.eer / cfg.k_folds;
    res.mean.eer_threshold += m.eer_threshold / cfg.k_folds;
  }
  return res;
}

struct GridSpec {
  std::vector<int> epochs = {100, 200, 500, 1000};
  std::vector<double> learning_rates = {0.1, 0.01, 0.001, 0.0001};
  std::vector<nn::OptKind> optimizers = {nn::OptKind::Adam, nn::OptKind::SGD,
                                         nn::OptKind::SGDMomentum};
  // The published search also lists StepLR gammas 0.3/0.5 and Plateau, but
  // its stated cell count of 48 only holds with the schedule pinned to the
  // winning StepLR(0.1); extra schedules stay reachable through this field.
  std::vector<nn::ScheduleSpec> schedules = {
      {nn::ScheduleKind::StepLR, 0.1, 50, 0.1, 10}};

  static GridSpec paper() { return GridSpec{}; }
  static GridSpec quick() {
    GridSpec g;
    g.epochs = {2, 5};
    g.learning_rates = {0.01, 0.001};
    g.optimizers = {nn::OptKind::Adam};
    g.schedules = {{nn::ScheduleKind::StepLR, 0.1, 50, 0.1, 10}};
    return g;
  }

  std::size_t size() const {
    return epochs.size() * learning_rates.size() * optimizers.size() *
           schedules.size();
  }
};

struct GridRow {
  int epochs;
  double lr;
  nn::OptKind optimizer;
  nn::ScheduleSpec schedule;
  double mean_eer;
  double mean_accuracy;
};

/// Exhaustive grid evaluation via cross_validate; ranked by mean EER
/// ascending, then higher accuracy, then fewer epochs.
inline std::vector<GridRow> grid_search(const LabeledSet& set,
                                        const EvalConfig& base,
                                        const GridSpec& grid, int repeats,
                                        std::uint64_t seed) {
  if (grid.size() == 0) throw ArgumentError("grid_search: empty grid");
  if (repeats < 1) repeats = 1;
  std::vector<GridRow> rows;
  for (int ep : grid.epochs) {
    for (double lr : grid.learning_rates) {
      for (auto opt : grid.optimizers) {
        for (const auto& sch : grid.schedules) {
          EvalConfig cfg = base;
          cfg.train.epochs = ep;
          cfg.train.optimizer.kind = opt;
          cfg.train.optimizer.learning_rate = lr;
          cfg.train.schedule = sch;
          double eer_sum = 0.0, acc_sum = 0.0;
          for (int r = 0; r < repeats; ++r) {
            auto res = cross_validate(set, cfg, mix_seed(seed, r));
            eer_sum += res.mean.eer;
            acc_sum += res.mean.accuracy;
          }
          rows.push_back({ep, lr, opt, sch, eer_sum / repeats,
                          acc_sum / repeats});
        }
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const GridRow& a, const GridRow& b) {
                     if (a.mean_eer != b.mean_eer) return a.mean_eer < b.mean_eer;
                     if (a.mean_accuracy != b.mean_accuracy)
                       return a.mean_accuracy > b.mean_accuracy;
                     return a.epochs < b.epochs;
                   });
  return rows;
}

}  // namespace kdt

#endif  // KDT_EVALUATE_HPP_
