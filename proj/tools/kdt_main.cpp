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
//
// kdt: free-text keystroke-dynamics authentication pipeline.
// Subcommands: ingest, synth, featurize, train, eval, gridsearch, report.
// Exit codes: 0 ok, 1 I/O, 2 usage/format, 3 training abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kdt/kdt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

kdt::LogFormat parse_format(const std::string& s) {
  if (s == "canonical") return kdt::LogFormat::Canonical;
  if (s == "buffalo") return kdt::LogFormat::Buffalo;
  if (s == "clarkson") return kdt::LogFormat::Clarkson;
  throw kdt::ArgumentError("unknown format: " + s);
}

kdt::AdapterConfig adapter_from_json(const json& j, kdt::LogFormat base) {
  kdt::AdapterConfig c = kdt::AdapterConfig::for_format(base);
  if (j.contains("delimiter")) {
    std::string d = j["delimiter"].get<std::string>();
    if (d == "\\t" || d == "tab")
      c.delimiter = '\t';
    else if (!d.empty())
      c.delimiter = d[0];
  }
  if (j.contains("columns")) {
    const auto& cols = j["columns"];
    c.user_col = cols.value("user", c.user_col);
    c.key_col = cols.value("key", c.key_col);
    c.action_col = cols.value("action", c.action_col);
    c.timestamp_col = cols.value("timestamp", c.timestamp_col);
  }
  if (j.contains("action_tokens")) {
    const auto& at = j["action_tokens"];
    if (at.contains("down"))
      c.down_tokens = at["down"].get<std::vector<std::string>>();
    if (at.contains("up"))
      c.up_tokens = at["up"].get<std::vector<std::string>>();
  }
  return c;
}

// Shared train/eval/gridsearch options.
struct RunOpts {
  std::string in_path, out_dir = ".", out_path;
  std::string model = "cnn";
  std::string user = "all";
  std::string cutout = "on";
  std::string rnn = "gru";
  std::string optimizer = "adam";
  std::string schedule = "steplr";
  double steplr_gamma = 0.1;
  int steplr_epochs = 50;
  int kernel = 3;
  int conv_kh = 2;
  int epochs = 200;
  double lr = -1.0;  // resolved per model family when unset
  int folds = 5;
  int jobs = 1;
  std::uint64_t seed = 0;
  int cutout_kdi_size = 8;
  int cutout_kds_span = 10;
  double cutout_prob = 0.5;
  std::string grid = "quick";
  int repeats = 1;
  bool dry_run = false;
};

void add_run_options(CLI::App* cmd, RunOpts& o, bool with_grid) {
  cmd->add_option("--in", o.in_path, "input KDF file")->required();
  cmd->add_option("--model", o.model, "cnn | cnn-rnn");
  cmd->add_option("--user", o.user, "target user id, or 'all'");
  cmd->add_option("--cutout", o.cutout, "on | off");
  cmd->add_option("--rnn", o.rnn, "rnn | gru | lstm");
  cmd->add_option("--kernel", o.kernel, "CNN square kernel side (3/5/7)");
  cmd->add_option("--conv-kh", o.conv_kh, "CNN-RNN kernel height (2/3/5)");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--lr", o.lr, "initial learning rate");
  cmd->add_option("--optimizer", o.optimizer, "adam | sgd | momentum");
  cmd->add_option("--schedule", o.schedule, "steplr | plateau | none");
  cmd->add_option("--steplr-gamma", o.steplr_gamma, "StepLR decay factor");
  cmd->add_option("--steplr-epochs", o.steplr_epochs, "StepLR period");
  cmd->add_option("--folds", o.folds, "cross-validation folds");
  cmd->add_option("--jobs", o.jobs, "parallel fold jobs");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--cutout-size", o.cutout_kdi_size, "KDI cutout square side");
  cmd->add_option("--cutout-span", o.cutout_kds_span, "KDS cutout row span");
  cmd->add_option("--cutout-prob", o.cutout_prob, "cutout probability");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  if (with_grid) {
    cmd->add_option("--grid", o.grid, "paper | quick");
    cmd->add_option("--repeats", o.repeats, "repetitions per grid cell");
    cmd->add_flag("--dry-run", o.dry_run, "enumerate cells without training");
    cmd->add_option("--out", o.out_path, "results CSV path");
  }
}

/// Flags override config-file values: config is applied to the bound
/// variables before parsing, so anything given on the command line wins.
void apply_config_json(const json& cfg, RunOpts& o) {
  o.model = cfg.value("model", o.model);
  o.user = cfg.value("user", o.user);
  o.cutout = cfg.value("cutout", o.cutout);
  o.rnn = cfg.value("rnn", o.rnn);
  o.kernel = cfg.value("kernel", o.kernel);
  o.conv_kh = cfg.value("conv_kh", o.conv_kh);
  o.epochs = cfg.value("epochs", o.epochs);
  o.lr = cfg.value("lr", o.lr);
  o.optimizer = cfg.value("optimizer", o.optimizer);
  o.schedule = cfg.value("schedule", o.schedule);
  o.steplr_gamma = cfg.value("steplr_gamma", o.steplr_gamma);
  o.steplr_epochs = cfg.value("steplr_epochs", o.steplr_epochs);
  o.folds = cfg.value("folds", o.folds);
  o.jobs = cfg.value("jobs", o.jobs);
  o.seed = cfg.value("seed", o.seed);
  o.grid = cfg.value("grid", o.grid);
  o.repeats = cfg.value("repeats", o.repeats);
}

std::map<std::string, std::vector<kdt::Tensor<float>>> features_by_user(
    const kdt::KdfFile& f) {
  std::map<std::string, std::vector<kdt::Tensor<float>>> by_user;
  for (std::size_t i = 0; i < f.samples.size(); ++i)
    by_user[f.user_ids[i]].push_back(f.samples[i]);
  return by_user;
}

kdt::EvalConfig make_eval_config(const RunOpts& o, const kdt::KdfFile& f) {
  bool is_rnn_model = o.model == "cnn-rnn";
  if (o.model != "cnn" && o.model != "cnn-rnn")
    throw kdt::ArgumentError("unknown --model: " + o.model);
  if (is_rnn_model && f.layout != "kds")
    throw kdt::FormatError("--model cnn-rnn requires a kds-layout KDF, got '" +
                           f.layout + "'");
  if (!is_rnn_model && f.layout != "kdi")
    throw kdt::FormatError("--model cnn requires a kdi-layout KDF, got '" +
                           f.layout + "'");

  kdt::EvalConfig cfg;
  if (is_rnn_model) {
    kdt::CnnRnnConfig mc;
    mc.conv_kh = o.conv_kh;
    mc.rnn_kind = kdt::rnn_kind_from_string(o.rnn);
    cfg.model = kdt::build_cnn_rnn(mc, static_cast<int>(f.sample_shape[0]),
                                   static_cast<int>(f.sample_shape[1]));
    cfg.layout = kdt::FeatureLayout::Kds;
  } else {
    kdt::CnnConfig mc;
    mc.kernel = o.kernel;
    cfg.model = kdt::build_cnn(mc);
    cfg.layout = kdt::FeatureLayout::Kdi;
  }
  cfg.train.epochs = o.epochs;
  cfg.train.optimizer.kind = kdt::nn::opt_kind_from_string(
      o.optimizer == "momentum" ? "sgd_momentum" : o.optimizer);
  // Table-2 bold defaults: 0.01 for the CNN family, 0.001 for plain RNN.
  cfg.train.optimizer.learning_rate =
      o.lr > 0 ? o.lr : (is_rnn_model && o.rnn == "rnn" ? 0.001 : 0.01);
  if (o.schedule == "steplr")
    cfg.train.schedule = {kdt::nn::ScheduleKind::StepLR, o.steplr_gamma,
                          o.steplr_epochs, 0.1, 10};
  else if (o.schedule == "plateau")
    cfg.train.schedule = {kdt::nn::ScheduleKind::Plateau, 0.1, 50, 0.1, 10};
  else if (o.schedule == "none")
    cfg.train.schedule = {kdt::nn::ScheduleKind::None, 0.1, 50, 0.1, 10};
  else
    throw kdt::ArgumentError("unknown --schedule: " + o.schedule);
  cfg.cutout.enabled = o.cutout == "on";
  cfg.cutout.kdi_size = o.cutout_kdi_size;
  cfg.cutout.kds_span = o.cutout_kds_span;
  cfg.cutout.probability = o.cutout_prob;
  cfg.k_folds = o.folds;
  cfg.jobs = o.jobs;
  return cfg;
}

std::vector<std::string> select_users(const RunOpts& o,
                                      const std::map<std::string,
                                                     std::vector<kdt::Tensor<float>>>&
                                          by_user) {
  std::vector<std::string> users;
  if (o.user == "all") {
    for (const auto& [uid, _] : by_user) users.push_back(uid);
  } else {
    if (!by_user.count(o.user))
      throw kdt::ArgumentError("user '" + o.user + "' not present in KDF");
    users.push_back(o.user);
  }
  return users;
}

void write_metrics_csv(const fs::path& path,
                       const std::vector<std::tuple<std::string, std::string,
                                                    kdt::Metrics>>& rows) {
  kdt::detail::AtomicWriter w(path);
  auto& out = w.stream();
  out << "user,fold,accuracy,eer,threshold\n";
  for (const auto& [user, fold, m] : rows)
    out << user << ',' << fold << ',' << fmt6(m.accuracy) << ','
        << fmt6(m.eer) << ',' << fmt6(m.eer_threshold) << '\n';
  w.commit();
}

int cmd_ingest(const std::string& format_name, const std::string& adapter_path,
               const std::string& in_path, const std::string& out_path) {
  kdt::LogFormat format = parse_format(format_name);
  kdt::AdapterConfig cfg = kdt::AdapterConfig::for_format(format);
  if (!adapter_path.empty()) {
    std::ifstream af(adapter_path);
    if (!af) throw kdt::IoError("cannot open adapter config " + adapter_path);
    cfg = adapter_from_json(json::parse(af), format);
  }
  if (!fs::exists(in_path))
    throw kdt::IoError("input path does not exist: " + in_path);

  std::vector<fs::path> files;
  if (fs::is_directory(in_path)) {
    for (const auto& e : fs::directory_iterator(in_path))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(in_path);
  }

  std::vector<kdt::KeyEvent> all;
  std::size_t malformed = 0, lines = 0;
  for (const auto& p : files) {
    std::ifstream in(p);
    if (!in) throw kdt::IoError("cannot open " + p.string());
    kdt::AdapterConfig file_cfg = cfg;
    if (file_cfg.user_col < 0) file_cfg.fallback_user = p.stem().string();
    auto rep = kdt::parse_events(in, format, &file_cfg);
    all.insert(all.end(), rep.events.begin(), rep.events.end());
    malformed += rep.malformed_count;
    lines += rep.line_count;
  }
  if (all.empty())
    std::cerr << "warning: no events parsed from " << in_path << "\n";

  kdt::detail::AtomicWriter w(out_path);
  kdt::serialize_events(all, w.stream());
  w.commit();

  auto paired = kdt::pair_events(all);
  std::size_t keystrokes = 0;
  for (const auto& s : paired.streams) keystrokes += s.keystrokes.size();
  json report = {{"lines", lines},
                 {"events", all.size()},
                 {"malformed", malformed},
                 {"users", paired.streams.size()},
                 {"keystrokes", keystrokes},
                 {"dropped_downs", paired.dropped_downs},
                 {"orphan_ups", paired.orphan_ups},
                 {"untracked_skipped", paired.untracked_skipped}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_featurize(const std::string& in_path, const std::string& out_path,
                  const std::string& mode, const std::string& encoding,
                  int length, long min_keystrokes) {
  if (length < 2) throw kdt::ArgumentError("--length must be >= 2");
  if (mode != "kdi" && mode != "kds")
    throw kdt::ArgumentError("--mode must be kdi or kds");
  std::ifstream in(in_path);
  if (!in) throw kdt::IoError("cannot open " + in_path);
  auto rep = kdt::parse_events(in, kdt::LogFormat::Canonical);
  auto paired = kdt::pair_events(rep.events);

  kdt::KdfFile f;
  f.layout = mode;
  kdt::KdsEncoding enc =
      encoding == "index" ? kdt::KdsEncoding::Index : kdt::KdsEncoding::OneHot;
  if (mode == "kdi") {
    f.sample_shape = {kdt::kKdiChannels, kdt::kAlphabetSize,
                      kdt::kAlphabetSize};
    f.channel_order = kdt::kdi_channel_order();
  } else {
    f.sample_shape = {static_cast<std::size_t>(length), kdt::kds_width(enc)};
  }

  json counts = json::object();
  for (const auto& stream : paired.streams) {
    if (static_cast<long>(stream.keystrokes.size()) < min_keystrokes) {
      std::cerr << "notice: user " << stream.user_id << " has "
                << stream.keystrokes.size() << " keystrokes (< "
                << min_keystrokes << "), excluded; use --min-keystrokes to "
                << "override\n";
      continue;
    }
    auto subs = kdt::window(stream, static_cast<std::size_t>(length));
    counts[stream.user_id] = subs.size();
    for (const auto& sub : subs) {
      f.samples.push_back(mode == "kdi" ? kdt::build_kdi(sub)
                                        : kdt::build_kds(sub, enc));
      f.user_ids.push_back(stream.user_id);
    }
  }
  kdt::write_kdf(f, out_path);
  json report = {{"samples", f.samples.size()},
                 {"layout", f.layout},
                 {"per_user", counts}};
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_train(const RunOpts& o) {
  kdt::KdfFile f = kdt::read_kdf(o.in_path);
  kdt::EvalConfig cfg = make_eval_config(o, f);
  auto by_user = features_by_user(f);
  auto users = select_users(o, by_user);
  fs::create_directories(o.out_dir);

  std::vector<std::tuple<std::string, std::string, kdt::Metrics>> rows;
  for (const auto& uid : users) {
    auto set = kdt::assemble(uid, by_user, kdt::mix_seed(o.seed, 0x5E7));
    auto res = kdt::cross_validate(set, cfg, o.seed);
    for (std::size_t fold = 0; fold < res.folds.size(); ++fold)
      rows.emplace_back(uid, std::to_string(fold), res.folds[fold]);
    rows.emplace_back(uid, "mean", res.mean);

    // Final per-user model trained on the full labeled set.
    std::vector<kdt::Tensor<float>> xs;
    std::vector<int> ys;
    for (const auto& s : set.samples) {
      xs.push_back(s.x);
      ys.push_back(s.label);
    }
    kdt::nn::TrainConfig tc = cfg.train;
    tc.seed = kdt::mix_seed(o.seed, 0xF17A1);
    kdt::nn::Network<float> net(cfg.model, kdt::mix_seed(o.seed, 0x171717));
    std::function<kdt::Tensor<float>(const kdt::Tensor<float>&, kdt::Rng&)>
        aug;
    if (cfg.cutout.enabled) {
      auto cs = cfg.cutout;
      bool kdi = cfg.layout == kdt::FeatureLayout::Kdi;
      aug = [cs, kdi](const kdt::Tensor<float>& t, kdt::Rng& r) {
        return kdi ? kdt::apply_cutout_kdi(t, cs, r)
                   : kdt::apply_cutout_kds(t, cs, r);
      };
    }
    kdt::nn::train(net, xs, ys, tc, aug);
    json metrics = {{"mean_accuracy", res.mean.accuracy},
                    {"mean_eer", res.mean.eer}};
    auto ck = kdt::nn::snapshot(net, o.model, o.seed, cfg.train.epochs,
                                metrics);
    kdt::nn::save_checkpoint(ck, fs::path(o.out_dir) /
                                     ("checkpoint_" + uid + ".json"));
    std::cout << uid << ": mean_accuracy=" << fmt6(res.mean.accuracy)
              << " mean_eer=" << fmt6(res.mean.eer) << "\n";
  }
  write_metrics_csv(fs::path(o.out_dir) / "metrics.csv", rows);
  std::cout << "metrics written to " << (fs::path(o.out_dir) / "metrics.csv")
            << "\n";
  return 0;
}

int cmd_eval(const RunOpts& o, const std::string& checkpoint_path) {
  kdt::KdfFile f = kdt::read_kdf(o.in_path);
  auto ck = kdt::nn::load_checkpoint(checkpoint_path);
  if ((ck.model_kind == "cnn-rnn") != (f.layout == "kds"))
    throw kdt::FormatError("checkpoint model '" + ck.model_kind +
                           "' does not match KDF layout '" + f.layout + "'");
  kdt::nn::Network<float> net(ck.layer_specs, 0);
  kdt::nn::restore(ck, net);

  auto by_user = features_by_user(f);
  auto users = select_users(o, by_user);
  std::vector<std::tuple<std::string, std::string, kdt::Metrics>> rows;
  for (const auto& uid : users) {
    auto set = kdt::assemble(uid, by_user, kdt::mix_seed(o.seed, 0x5E7));
    std::vector<std::pair<double, int>> scored;
    for (const auto& s : set.samples)
      scored.emplace_back(
          static_cast<double>(net.forward(s.x, false).data[0]), s.label);
    kdt::Metrics m;
    m.accuracy = kdt::accuracy(scored);
    std::tie(m.eer, m.eer_threshold) = kdt::eer(scored);
    m.roc = kdt::roc_points(scored);
    rows.emplace_back(uid, "all", m);
    std::cout << uid << ": accuracy=" << fmt6(m.accuracy)
              << " eer=" << fmt6(m.eer) << "\n";

    json roc = json::array();
    for (const auto& p : m.roc)
      roc.push_back({{"fpr", p.fpr}, {"fnr", p.fnr}, {"threshold", p.threshold}});
    fs::create_directories(o.out_dir);
    kdt::detail::AtomicWriter w(fs::path(o.out_dir) / ("roc_" + uid + ".json"));
    w.stream() << roc.dump(2) << "\n";
    w.commit();
  }
  fs::create_directories(o.out_dir);
  write_metrics_csv(fs::path(o.out_dir) / "eval_metrics.csv", rows);
  return 0;
}

int cmd_gridsearch(const RunOpts& o) {
  kdt::KdfFile f = kdt::read_kdf(o.in_path);
  kdt::EvalConfig cfg = make_eval_config(o, f);
  kdt::GridSpec grid;
  if (o.grid == "paper")
    grid = kdt::GridSpec::paper();
  else if (o.grid == "quick")
    grid = kdt::GridSpec::quick();
  else
    throw kdt::ArgumentError("unknown --grid preset: " + o.grid);

  std::string out_path = o.out_path.empty() ? "grid_results.csv" : o.out_path;
  if (o.dry_run) {
    kdt::detail::AtomicWriter w(out_path);
    auto& out = w.stream();
    out << "epochs,lr,optimizer,schedule\n";
    std::size_t n = 0;
    for (int ep : grid.epochs)
      for (double lr : grid.learning_rates)
        for (auto opt : grid.optimizers)
          for (const auto& sch : grid.schedules) {
            out << ep << ',' << lr << ',' << kdt::nn::to_string(opt) << ','
                << kdt::nn::to_string(sch) << '\n';
            ++n;
          }
    w.commit();
    std::cout << "grid cells: " << n << "\n";
    return 0;
  }

  auto by_user = features_by_user(f);
  auto users = select_users(o, by_user);
  kdt::detail::AtomicWriter w(out_path);
  auto& out = w.stream();
  out << "user,epochs,lr,optimizer,schedule,mean_eer,mean_accuracy\n";
  for (const auto& uid : users) {
    auto set = kdt::assemble(uid, by_user, kdt::mix_seed(o.seed, 0x5E7));
    auto rows = kdt::grid_search(set, cfg, grid, o.repeats, o.seed);
    for (const auto& r : rows)
      out << uid << ',' << r.epochs << ',' << r.lr << ','
          << kdt::nn::to_string(r.optimizer) << ','
          << kdt::nn::to_string(r.schedule) << ',' << fmt6(r.mean_eer) << ','
          << fmt6(r.mean_accuracy) << '\n';
    std::cout << uid << ": best eer=" << fmt6(rows.front().mean_eer)
              << " (epochs=" << rows.front().epochs
              << ", lr=" << rows.front().lr << ")\n";
  }
  w.commit();
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs,
               const std::string& out_path) {
  // Per-user means averaged unweighted across users.
  std::map<std::string, std::pair<double, double>> per_user;  // acc, eer
  std::map<std::string, int> count;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw kdt::IoError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      auto fields = kdt::detail::split(line, ',');
      if (fields.size() < 5) continue;
      if (fields[1] != "mean" && fields[1] != "all") continue;
      per_user[fields[0]].first += std::stod(fields[2]);
      per_user[fields[0]].second += std::stod(fields[3]);
      count[fields[0]]++;
    }
  }
  if (per_user.empty()) {
    std::cerr << "no summary rows found\n";
    return 0;
  }
  double acc = 0, eer = 0;
  std::ostringstream body;
  body << "user,mean_accuracy,mean_eer\n";
  for (const auto& [uid, sums] : per_user) {
    double a = sums.first / count[uid], e = sums.second / count[uid];
    body << uid << ',' << fmt6(a) << ',' << fmt6(e) << "\n";
    acc += a / per_user.size();
    eer += e / per_user.size();
  }
  body << "overall," << fmt6(acc) << ',' << fmt6(eer) << "\n";
  if (out_path.empty()) {
    std::cout << body.str();
  } else {
    kdt::detail::AtomicWriter w(out_path);
    w.stream() << body.str();
    w.commit();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"free-text keystroke dynamics authentication toolkit"};
  app.require_subcommand(1);

  // ingest
  std::string ing_format = "canonical", ing_adapter, ing_in, ing_out;
  auto* ingest = app.add_subcommand("ingest", "parse raw logs to canonical CSV");
  ingest->add_option("--format", ing_format, "canonical | buffalo | clarkson");
  ingest->add_option("--adapter", ing_adapter, "adapter config JSON");
  ingest->add_option("--in", ing_in, "input file or directory")->required();
  ingest->add_option("--out", ing_out, "output canonical CSV")->required();

  // synth
  std::uint64_t sy_seed = 0;
  int sy_users = 2, sy_keystrokes = 1000;
  std::string sy_out;
  auto* synth = app.add_subcommand("synth", "generate synthetic typing data");
  synth->add_option("--seed", sy_seed);
  synth->add_option("--users", sy_users);
  synth->add_option("--keystrokes", sy_keystrokes, "keystrokes per user");
  synth->add_option("--out", sy_out)->required();

  // featurize
  std::string fe_in, fe_out, fe_mode = "kdi", fe_encoding = "onehot";
  int fe_length = 100;
  long fe_min_keystrokes = 20000;
  auto* feat = app.add_subcommand("featurize", "build KDI/KDS features");
  feat->add_option("--in", fe_in)->required();
  feat->add_option("--out", fe_out)->required();
  feat->add_option("--mode", fe_mode, "kdi | kds");
  feat->add_option("--encoding", fe_encoding, "onehot | index (kds)");
  feat->add_option("--length", fe_length, "subsequence length");
  feat->add_option("--min-keystrokes", fe_min_keystrokes,
                   "exclude users below this keystroke count");

  // train / eval / gridsearch
  RunOpts tr, ev, gs;
  std::string ev_checkpoint, config_path;
  app.add_option("--config", config_path, "JSON config; flags override");
  auto* train = app.add_subcommand("train", "train per-user classifiers with CV");
  add_run_options(train, tr, false);
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a KDF");
  add_run_options(evalc, ev, false);
  evalc->add_option("--checkpoint", ev_checkpoint)->required();
  auto* grids = app.add_subcommand("gridsearch", "hyperparameter grid search");
  add_run_options(grids, gs, true);

  // report
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  auto* report = app.add_subcommand("report", "summarize metrics CSVs");
  report->add_option("--in", rp_inputs, "metrics CSV files")->required();
  report->add_option("--out", rp_out, "summary CSV path (default stdout)");

  // Config file pre-pass: values act as defaults under every subcommand.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream cf(argv[i + 1]);
      if (!cf) {
        std::cerr << "error: cannot open config " << argv[i + 1] << "\n";
        return 1;
      }
      try {
        json cfg = json::parse(cf);
        apply_config_json(cfg, tr);
        apply_config_json(cfg, ev);
        apply_config_json(cfg, gs);
      } catch (const json::exception& e) {
        std::cerr << "error: bad config JSON: " << e.what() << "\n";
        return 2;
      }
    }
  }

  try {
    app.parse(argc, argv);
    if (*ingest) return cmd_ingest(ing_format, ing_adapter, ing_in, ing_out);
    if (*synth) {
      auto events = kdt::synthesize(sy_seed, sy_users, sy_keystrokes);
      kdt::detail::AtomicWriter w(sy_out);
      kdt::serialize_events(events, w.stream());
      w.commit();
      std::cout << "wrote " << events.size() << " events\n";
      return 0;
    }
    if (*feat)
      return cmd_featurize(fe_in, fe_out, fe_mode, fe_encoding, fe_length,
                           fe_min_keystrokes);
    if (*train) return cmd_train(tr);
    if (*evalc) return cmd_eval(ev, ev_checkpoint);
    if (*grids) return cmd_gridsearch(gs);
    if (*report) return cmd_report(rp_inputs, rp_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const kdt::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const kdt::TrainingAborted& e) {
    std::cerr << "error: training aborted: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
