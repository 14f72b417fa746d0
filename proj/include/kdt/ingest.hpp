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

#ifndef KDT_INGEST_HPP_
#define KDT_INGEST_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kdt/common.hpp"

namespace kdt {

enum class KeyAction { Down, Up };

struct KeyEvent {
  std::string user_id;
  std::string key_label;
  KeyAction action = KeyAction::Down;
  std::int64_t timestamp_ms = 0;
};

struct Keystroke {
  int key_index = 0;  // in [0, 41]
  std::int64_t press_ms = 0;
  std::int64_t release_ms = 0;
};

struct UserStream {
  std::string user_id;
  std::vector<Keystroke> keystrokes;  // ordered by press_ms
};

constexpr int kAlphabetSize = 42;

/// The 42 tracked keys: a-z -> 0-25, digits 0-9 -> 26-35, then space,
/// backspace, left shift, right shift, tab, capslock.
class KeyAlphabet {
 public:
  KeyAlphabet() {
    for (int i = 0; i < 26; ++i)
      map_[std::string(1, static_cast<char>('a' + i))] = i;
    for (int i = 0; i < 10; ++i)
      map_[std::string(1, static_cast<char>('0' + i))] = 26 + i;
    map_["space"] = 36;
    map_["backspace"] = 37;
    map_["lshift"] = 38;
    map_["rshift"] = 39;
    map_["tab"] = 40;
    map_["capslock"] = 41;
    // Aliases seen in common logger formats.
    alias_ = {{" ", "space"},        {"spacebar", "space"},
              {"back", "backspace"}, {"bksp", "backspace"},
              {"bs", "backspace"},   {"leftshift", "lshift"},
              {"shift_l", "lshift"}, {"lshiftkey", "lshift"},
              {"shift", "lshift"},   {"rightshift", "rshift"},
              {"shift_r", "rshift"}, {"rshiftkey", "rshift"},
              {"capital", "capslock"}, {"caps", "capslock"},
              {"caps_lock", "capslock"}};
  }

  /// Case-folded, alias-resolved lookup; empty for untracked keys.
  std::optional<int> index_of(const std::string& raw) const {
    std::string k = fold(raw);
    auto a = alias_.find(k);
    if (a != alias_.end()) k = a->second;
    auto it = map_.find(k);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  /// Canonical label for an index (inverse of index_of on canonical names).
  static std::string label_of(int index) {
    if (index < 0 || index >= kAlphabetSize)
      throw ArgumentError("key index out of range");
    if (index < 26) return std::string(1, static_cast<char>('a' + index));
    if (index < 36) return std::string(1, static_cast<char>('0' + index - 26));
    static const char* meta[] = {"space", "backspace", "lshift",
                                 "rshift", "tab",      "capslock"};
    return meta[index - 36];
  }

 private:
  static std::string fold(const std::string& s) {
    if (s == " ") return s;  // literal space survives trimming
    std::string out;
    out.reserve(s.size());
    for (char c : s)
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
  }

  std::unordered_map<std::string, int> map_;
  std::unordered_map<std::string, std::string> alias_;
};

inline std::optional<int> normalize_key(const std::string& key_label,
                                        const KeyAlphabet& alphabet) {
  return alphabet.index_of(key_label);
}

enum class LogFormat { Canonical, Buffalo, Clarkson };

/// Column-map adapter for dataset-specific layouts. The canonical format is
/// CSV `user_id,key,action,timestamp_ms`; Buffalo and Clarkson defaults are
/// placeholders that can be overridden from JSON config since the raw file
/// layouts vary by release.
struct AdapterConfig {
  char delimiter = ',';
  int user_col = 0;
  int key_col = 1;
  int action_col = 2;
  int timestamp_col = 3;
  std::vector<std::string> down_tokens = {"D", "d", "down", "0", "KeyDown"};
  std::vector<std::string> up_tokens = {"U", "u", "up", "1", "KeyUp"};
  /// When the format carries no user column (one file per user), set
  /// user_col = -1 and fill fallback_user from the file name.
  std::string fallback_user;

  static AdapterConfig for_format(LogFormat f) {
    AdapterConfig c;
    switch (f) {
      case LogFormat::Canonical:
        break;
      case LogFormat::Buffalo:
        // Buffalo logs are per-user files: key, action, timestamp.
        c.delimiter = '\t';
        c.user_col = -1;
        c.key_col = 0;
        c.action_col = 1;
        c.timestamp_col = 2;
        break;
      case LogFormat::Clarkson:
        c.delimiter = '\t';
        c.user_col = 0;
        c.timestamp_col = 1;
        c.action_col = 2;
        c.key_col = 3;
        break;
    }
    return c;
  }
};

struct ParseReport {
  std::vector<KeyEvent> events;
  std::size_t malformed_count = 0;
  std::size_t line_count = 0;
  std::string first_bad_line;
  std::size_t first_bad_line_no = 0;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\r' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\r' || s[e - 1] == '\t'))
    --e;
  return s.substr(b, e - b);
}

/// Integer ms; fractional inputs rounded half-up.
inline std::optional<std::int64_t> parse_timestamp(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    if (v < 0) return std::nullopt;
    return static_cast<std::int64_t>(std::floor(v + 0.5));
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Parse a raw event log. Malformed lines are counted, never fatal, unless
/// they exceed half the file, which indicates the wrong adapter.
inline ParseReport parse_events(std::istream& in, LogFormat format,
                                const AdapterConfig* override_cfg = nullptr) {
  AdapterConfig cfg =
      override_cfg ? *override_cfg : AdapterConfig::for_format(format);
  if (!in) throw IoError("cannot read event stream");

  ParseReport rep;
  std::string line;
  bool first = true;
  int max_col = std::max({cfg.user_col, cfg.key_col, cfg.action_col,
                          cfg.timestamp_col});
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    ++rep.line_count;
    auto fields = detail::split(t, cfg.delimiter);
    auto fail = [&] {
      ++rep.malformed_count;
      if (rep.first_bad_line.empty()) {
        rep.first_bad_line = t;
        rep.first_bad_line_no = line_no;
      }
    };
    if (static_cast<int>(fields.size()) <= max_col) {
      // Optional header line: tolerated silently at the top of the file.
      if (first) {
        first = false;
        --rep.line_count;
        continue;
      }
      fail();
      continue;
    }
    auto ts = detail::parse_timestamp(
        detail::trim(fields[cfg.timestamp_col]));
    if (!ts) {
      // Header detection: non-numeric timestamp on the first data line.
      if (first) {
        first = false;
        --rep.line_count;
        continue;
      }
      fail();
      continue;
    }
    first = false;
    std::string action = detail::trim(fields[cfg.action_col]);
    bool down = std::find(cfg.down_tokens.begin(), cfg.down_tokens.end(),
                          action) != cfg.down_tokens.end();
    bool up = std::find(cfg.up_tokens.begin(), cfg.up_tokens.end(), action) !=
              cfg.up_tokens.end();
    if (!down && !up) {
      fail();
      continue;
    }
    KeyEvent ev;
    ev.user_id = cfg.user_col >= 0 ? detail::trim(fields[cfg.user_col])
                                   : cfg.fallback_user;
    ev.key_label = fields[cfg.key_col] == " " ? fields[cfg.key_col]
                                              : detail::trim(fields[cfg.key_col]);
    ev.action = down ? KeyAction::Down : KeyAction::Up;
    ev.timestamp_ms = *ts;
    if (ev.user_id.empty() || ev.key_label.empty()) {
      fail();
      continue;
    }
    rep.events.push_back(std::move(ev));
  }
  if (rep.line_count > 0 && rep.malformed_count * 2 > rep.line_count) {
    throw FormatError("more than half of " + std::to_string(rep.line_count) +
                      " lines malformed; first offending line " +
                      std::to_string(rep.first_bad_line_no) + ": \"" +
                      rep.first_bad_line + "\" (wrong --format/adapter?)");
  }
  return rep;
}

struct PairReport {
  std::vector<UserStream> streams;  // sorted by user_id
  std::size_t dropped_downs = 0;
  std::size_t orphan_ups = 0;
  std::size_t untracked_skipped = 0;
};

/// Match each Down to the earliest subsequent Up of the same key. Handles
/// rollover; auto-repeat Downs beyond the first stay pending and are dropped
/// at end of stream. Untracked keys are skipped before pairing.
inline PairReport pair_events(std::vector<KeyEvent> events,
                              const KeyAlphabet& alphabet = {}) {
  std::stable_sort(events.begin(), events.end(),
                   [](const KeyEvent& a, const KeyEvent& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  PairReport rep;
  struct PerUser {
    // pending Down timestamps per key index
    std::map<int, std::deque<std::int64_t>> pending;
    std::vector<Keystroke> done;
  };
  std::map<std::string, PerUser> users;
  for (const auto& ev : events) {
    auto idx = alphabet.index_of(ev.key_label);
    if (!idx) {
      ++rep.untracked_skipped;
      continue;
    }
    auto& u = users[ev.user_id];
    if (ev.action == KeyAction::Down) {
      u.pending[*idx].push_back(ev.timestamp_ms);
    } else {
      auto it = u.pending.find(*idx);
      if (it == u.pending.end() || it->second.empty()) {
        ++rep.orphan_ups;
        continue;
      }
      Keystroke ks;
      ks.key_index = *idx;
      ks.press_ms = it->second.front();
      ks.release_ms = ev.timestamp_ms;
      it->second.pop_front();
      u.done.push_back(ks);
    }
  }
  for (auto& [uid, u] : users) {
    for (auto& [k, dq] : u.pending) rep.dropped_downs += dq.size();
    std::stable_sort(u.done.begin(), u.done.end(),
                     [](const Keystroke& a, const Keystroke& b) {
                       return a.press_ms < b.press_ms;
                     });
    rep.streams.push_back(UserStream{uid, std::move(u.done)});
  }
  return rep;
}

/// Canonical CSV line per event: user_id,key,action,timestamp_ms.
inline void serialize_events(const std::vector<KeyEvent>& events,
                             std::ostream& out) {
  for (const auto& ev : events) {
    out << ev.user_id << ',' << ev.key_label << ','
        << (ev.action == KeyAction::Down ? 'D' : 'U') << ','
        << ev.timestamp_ms << '\n';
  }
}

/// Serialize a paired stream back to canonical events, time-ordered.
inline std::vector<KeyEvent> stream_to_events(const UserStream& s) {
  std::vector<KeyEvent> evs;
  evs.reserve(s.keystrokes.size() * 2);
  for (const auto& ks : s.keystrokes) {
    std::string label = KeyAlphabet::label_of(ks.key_index);
    evs.push_back({s.user_id, label, KeyAction::Down, ks.press_ms});
    evs.push_back({s.user_id, label, KeyAction::Up, ks.release_ms});
  }
  std::stable_sort(evs.begin(), evs.end(),
                   [](const KeyEvent& a, const KeyEvent& b) {
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  return evs;
}

/// Seeded synthetic typists. Each user draws, once from the seed: a per-key
/// hold mean/std profile, a per-digraph down-down gap mean/std profile, and
/// a skewed key-preference distribution, so users differ both in timing and
/// in which keys they favor.
inline std::vector<KeyEvent> synthesize(std::uint64_t profile_seed,
                                        int n_users, int n_keystrokes) {
  if (n_users < 1) throw ArgumentError("synthesize: n_users must be >= 1");
  if (n_keystrokes < 2)
    throw ArgumentError("synthesize: n_keystrokes must be >= 2");

  std::vector<KeyEvent> all;
  all.reserve(static_cast<std::size_t>(n_users) * n_keystrokes * 2);
  for (int u = 0; u < n_users; ++u) {
    Rng rng(mix_seed(profile_seed, static_cast<std::uint64_t>(u)));
    std::string uid = "synth" + std::to_string(u);

    std::vector<double> hold_mean(kAlphabetSize), hold_std(kAlphabetSize);
    for (int k = 0; k < kAlphabetSize; ++k) {
      hold_mean[k] = rng.uniform(55.0, 145.0);
      hold_std[k] = rng.uniform(4.0, 14.0);
    }
    double user_gap = rng.uniform(110.0, 280.0);
    std::vector<double> gap_mean(kAlphabetSize * kAlphabetSize);
    std::vector<double> gap_std(kAlphabetSize * kAlphabetSize);
    for (std::size_t d = 0; d < gap_mean.size(); ++d) {
      gap_mean[d] = user_gap * rng.uniform(0.6, 1.4);
      gap_std[d] = rng.uniform(8.0, 28.0);
    }
    // Skewed per-user key preference over letters and space.
    std::vector<double> weight(kAlphabetSize);
    double total = 0.0;
    for (int k = 0; k < kAlphabetSize; ++k) {
      double base = (k < 26 || k == 36) ? 1.0 : 0.08;
      double w = rng.real();
      weight[k] = base * w * w * w + 1e-4;
      total += weight[k];
    }

    auto pick_key = [&]() {
      double x = rng.real() * total;
      for (int k = 0; k < kAlphabetSize; ++k) {
        x -= weight[k];
        if (x <= 0) return k;
      }
      return kAlphabetSize - 1;
    };

    std::vector<KeyEvent> evs;
    evs.reserve(static_cast<std::size_t>(n_keystrokes) * 2);
    std::int64_t press = 0;
    int prev = pick_key();
    for (int n = 0; n < n_keystrokes; ++n) {
      int k = (n == 0) ? prev : pick_key();
      if (n > 0) {
        double g = rng.normal(gap_mean[prev * kAlphabetSize + k],
                              gap_std[prev * kAlphabetSize + k]);
        press += std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::floor(g + 0.5)));
      }
      double h = rng.normal(hold_mean[k], hold_std[k]);
      std::int64_t hold = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(std::floor(h + 0.5)));
      std::string label = KeyAlphabet::label_of(k);
      evs.push_back({uid, label, KeyAction::Down, press});
      evs.push_back({uid, label, KeyAction::Up, press + hold});
      prev = k;
    }
    std::stable_sort(evs.begin(), evs.end(),
                     [](const KeyEvent& a, const KeyEvent& b) {
                       return a.timestamp_ms < b.timestamp_ms;
                     });
    all.insert(all.end(), evs.begin(), evs.end());
  }
  return all;
}

}  // namespace kdt

#endif  // KDT_INGEST_HPP_
