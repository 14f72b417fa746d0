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

#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "kdt/ingest.hpp"

using namespace kdt;

TEST_CASE("canonical line maps directly to a KeyEvent") {
  std::istringstream in("u1,a,D,1000\n");
  auto rep = parse_events(in, LogFormat::Canonical);
  REQUIRE(rep.events.size() == 1);
  CHECK(rep.events[0].user_id == "u1");
  CHECK(rep.events[0].key_label == "a");
  CHECK(rep.events[0].action == KeyAction::Down);
  CHECK(rep.events[0].timestamp_ms == 1000);
}

TEST_CASE("parse preserves file order") {
  std::istringstream in("u1,a,D,1000\nu1,a,U,1100\n");
  auto rep = parse_events(in, LogFormat::Canonical);
  REQUIRE(rep.events.size() == 2);
  CHECK(rep.events[0].action == KeyAction::Down);
  CHECK(rep.events[1].action == KeyAction::Up);
  CHECK(rep.events[1].timestamp_ms == 1100);
}

TEST_CASE("malformed lines are counted, not fatal") {
  std::ostringstream fixture;
  for (int i = 0; i < 8; ++i) fixture << "u1,a,D," << 1000 + i << "\n";
  fixture << "garbage line\n";
  fixture << "u1,a,X,9\n";  // bad action token
  std::istringstream in(fixture.str());
  auto rep = parse_events(in, LogFormat::Canonical);
  CHECK(rep.events.size() == 8);
  CHECK(rep.malformed_count == 2);
}

TEST_CASE("mostly-malformed input raises a format mismatch naming the line") {
  std::istringstream in("u1,a,D,10\njunk1\njunk2\njunk3\n");
  REQUIRE_THROWS_AS(parse_events(in, LogFormat::Canonical), FormatError);
  std::istringstream in2("u1,a,D,10\njunk1\njunk2\njunk3\n");
  try {
    parse_events(in2, LogFormat::Canonical);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("junk1") != std::string::npos);
  }
}

TEST_CASE("optional header line is detected by non-numeric timestamp") {
  std::istringstream in("user_id,key,action,timestamp_ms\nu1,a,D,5\n");
  auto rep = parse_events(in, LogFormat::Canonical);
  CHECK(rep.events.size() == 1);
  CHECK(rep.malformed_count == 0);
}

TEST_CASE("sub-millisecond timestamps round half-up") {
  std::istringstream in("u1,a,D,10.5\nu1,a,U,20.4\n");
  auto rep = parse_events(in, LogFormat::Canonical);
  REQUIRE(rep.events.size() == 2);
  CHECK(rep.events[0].timestamp_ms == 11);
  CHECK(rep.events[1].timestamp_ms == 20);
}

TEST_CASE("normalize_key folds case and resolves aliases") {
  KeyAlphabet a;
  CHECK(normalize_key("A", a) == 0);
  CHECK(normalize_key("a", a) == 0);
  CHECK(normalize_key("7", a) == 33);
  CHECK(normalize_key("Space", a) == 36);
  CHECK(normalize_key(" ", a) == 36);
  CHECK(normalize_key("back", a) == 37);
  CHECK(normalize_key("Capital", a) == 41);
  CHECK_FALSE(normalize_key("F5", a).has_value());
}

TEST_CASE("alphabet is bijective over its 42 entries") {
  KeyAlphabet a;
  for (int i = 0; i < kAlphabetSize; ++i)
    CHECK(normalize_key(KeyAlphabet::label_of(i), a) == i);
}

TEST_CASE("pairing matches simple press/release") {
  std::vector<KeyEvent> evs = {{"u", "a", KeyAction::Down, 0},
                               {"u", "a", KeyAction::Up, 100}};
  auto rep = pair_events(evs);
  REQUIRE(rep.streams.size() == 1);
  REQUIRE(rep.streams[0].keystrokes.size() == 1);
  CHECK(rep.streams[0].keystrokes[0].key_index == 0);
  CHECK(rep.streams[0].keystrokes[0].press_ms == 0);
  CHECK(rep.streams[0].keystrokes[0].release_ms == 100);
}

TEST_CASE("rollover pairs by key label, not order") {
  std::vector<KeyEvent> evs = {{"u", "a", KeyAction::Down, 0},
                               {"u", "b", KeyAction::Down, 50},
                               {"u", "a", KeyAction::Up, 120},
                               {"u", "b", KeyAction::Up, 150}};
  auto rep = pair_events(evs);
  REQUIRE(rep.streams[0].keystrokes.size() == 2);
  CHECK(rep.streams[0].keystrokes[0].press_ms == 0);
  CHECK(rep.streams[0].keystrokes[0].release_ms == 120);
  CHECK(rep.streams[0].keystrokes[1].press_ms == 50);
  CHECK(rep.streams[0].keystrokes[1].release_ms == 150);
}

TEST_CASE("auto-repeat: first Down wins, extra Down dropped and counted") {
  std::vector<KeyEvent> evs = {{"u", "a", KeyAction::Down, 0},
                               {"u", "a", KeyAction::Down, 30},
                               {"u", "a", KeyAction::Up, 100}};
  auto rep = pair_events(evs);
  REQUIRE(rep.streams[0].keystrokes.size() == 1);
  CHECK(rep.streams[0].keystrokes[0].press_ms == 0);
  CHECK(rep.streams[0].keystrokes[0].release_ms == 100);
  CHECK(rep.dropped_downs == 1);
}

TEST_CASE("orphan ups are dropped and counted") {
  std::vector<KeyEvent> evs = {{"u", "a", KeyAction::Up, 10},
                               {"u", "b", KeyAction::Down, 20},
                               {"u", "b", KeyAction::Up, 60}};
  auto rep = pair_events(evs);
  CHECK(rep.orphan_ups == 1);
  CHECK(rep.streams[0].keystrokes.size() == 1);
}

TEST_CASE("untracked keys are skipped before pairing") {
  std::vector<KeyEvent> evs = {{"u", "F5", KeyAction::Down, 0},
                               {"u", "F5", KeyAction::Up, 30},
                               {"u", "a", KeyAction::Down, 40},
                               {"u", "a", KeyAction::Up, 90}};
  auto rep = pair_events(evs);
  CHECK(rep.untracked_skipped == 2);
  CHECK(rep.streams[0].keystrokes.size() == 1);
}

namespace {

// Random valid stream: per key, non-overlapping press/release so pairing is
// unambiguous.
UserStream random_stream(Rng& rng, int n) {
  UserStream s;
  s.user_id = "u";
  std::vector<std::int64_t> next_free(kAlphabetSize, 0);
  std::int64_t t = 0;
  for (int i = 0; i < n; ++i) {
    int k = static_cast<int>(rng.below(kAlphabetSize));
    std::int64_t press = std::max<std::int64_t>(t + 1 + static_cast<std::int64_t>(rng.below(200)),
                                                next_free[k] + 1);
    std::int64_t release = press + 1 + static_cast<std::int64_t>(rng.below(150));
    s.keystrokes.push_back({k, press, release});
    next_free[k] = release;
    t = press;
  }
  std::stable_sort(s.keystrokes.begin(), s.keystrokes.end(),
                   [](const Keystroke& a, const Keystroke& b) {
                     return a.press_ms < b.press_ms;
                   });
  return s;
}

}  // namespace

TEST_CASE("property: pair(parse(serialize(stream))) round-trips") {
  Rng rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    UserStream s = random_stream(rng, 60);
    auto evs = stream_to_events(s);
    std::ostringstream csv;
    serialize_events(evs, csv);
    std::istringstream in(csv.str());
    auto parsed = parse_events(in, LogFormat::Canonical);
    auto rep = pair_events(parsed.events);
    REQUIRE(rep.streams.size() == 1);
    REQUIRE(rep.streams[0].keystrokes.size() == s.keystrokes.size());
    for (std::size_t i = 0; i < s.keystrokes.size(); ++i) {
      CHECK(rep.streams[0].keystrokes[i].key_index == s.keystrokes[i].key_index);
      CHECK(rep.streams[0].keystrokes[i].press_ms == s.keystrokes[i].press_ms);
      CHECK(rep.streams[0].keystrokes[i].release_ms ==
            s.keystrokes[i].release_ms);
    }
  }
}

TEST_CASE("property: keystroke invariants and event accounting") {
  auto events = synthesize(3, 2, 300);
  std::size_t tracked_downs = 0;
  KeyAlphabet a;
  for (const auto& ev : events)
    if (ev.action == KeyAction::Down && a.index_of(ev.key_label)) ++tracked_downs;
  auto rep = pair_events(events);
  std::size_t produced = 0;
  for (const auto& s : rep.streams) {
    std::int64_t prev = -1;
    for (const auto& ks : s.keystrokes) {
      CHECK(ks.release_ms >= ks.press_ms);
      CHECK(ks.key_index >= 0);
      CHECK(ks.key_index < kAlphabetSize);
      CHECK(ks.press_ms >= prev);
      prev = ks.press_ms;
    }
    produced += s.keystrokes.size();
  }
  CHECK(produced + rep.dropped_downs == tracked_downs);
}

TEST_CASE("synthesize is a pure function of its arguments") {
  auto a = synthesize(7, 2, 200);
  auto b = synthesize(7, 2, 200);
  REQUIRE(a.size() == b.size());
  std::ostringstream sa, sb;
  serialize_events(a, sa);
  serialize_events(b, sb);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("synthesize: distinct users have different mean hold durations") {
  auto events = synthesize(7, 2, 2000);
  auto rep = pair_events(events);
  REQUIRE(rep.streams.size() == 2);
  double means[2];
  for (int u = 0; u < 2; ++u) {
    double sum = 0;
    for (const auto& ks : rep.streams[u].keystrokes)
      sum += static_cast<double>(ks.release_ms - ks.press_ms);
    means[u] = sum / rep.streams[u].keystrokes.size();
  }
  CHECK(std::abs(means[0] - means[1]) > 1.0);
}

TEST_CASE("synthesize emits exactly two events per keystroke") {
  auto events = synthesize(1, 1, 100);
  CHECK(events.size() == 200);
}

TEST_CASE("synthesize rejects invalid counts") {
  CHECK_THROWS_AS(synthesize(1, 0, 10), ArgumentError);
  CHECK_THROWS_AS(synthesize(1, 1, 1), ArgumentError);
}

TEST_CASE("buffalo adapter uses per-file fallback user") {
  AdapterConfig cfg = AdapterConfig::for_format(LogFormat::Buffalo);
  cfg.fallback_user = "subject01";
  std::istringstream in("a\tKeyDown\t100\na\tKeyUp\t160\n");
  auto rep = parse_events(in, LogFormat::Buffalo, &cfg);
  REQUIRE(rep.events.size() == 2);
  CHECK(rep.events[0].user_id == "subject01");
}
