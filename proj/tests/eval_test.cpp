// eval_test.cpp - edit distances against exhaustive oracles, assignment
// and injection pairing, and the conditioned report bookkeeping.

// Copyright 2026 The Pitmix Authors
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "pitmix/eval.hpp"
#include "test_util.hpp"

using namespace pitmix;

namespace {

std::vector<int> random_units(Rng& rng, int max_len, int alphabet) {
  std::vector<int> out;
  const int len = rng.uniform_int(0, max_len);
  for (int i = 0; i < len; ++i) out.push_back(rng.uniform_int(1, alphabet));
  return out;
}

// All ordered injections of refs into hyps, exhaustively.
int brute_injection_total(const std::vector<std::vector<int>>& hyps,
                          const std::vector<std::vector<int>>& refs) {
  int best = -1;
  std::vector<int> cur(refs.size(), -1);
  std::vector<char> used(hyps.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t r) {
    if (r == refs.size()) {
      int total = 0;
      for (std::size_t j = 0; j < refs.size(); ++j)
        total += eval::levenshtein(hyps[std::size_t(cur[j])], refs[j]).distance;
      if (best < 0 || total < best) best = total;
      return;
    }
    for (std::size_t h = 0; h < hyps.size(); ++h) {
      if (used[h]) continue;
      used[h] = 1;
      cur[r] = int(h);
      rec(r + 1);
      used[h] = 0;
    }
  };
  rec(0);
  return best;
}

models::ArchConfig tiny_arch(models::Arch a, int streams, int labels = 6) {
  models::ArchConfig cfg;
  cfg.arch = a;
  cfg.num_streams = streams;
  cfg.layers = 1;
  cfg.back_layers = 1;
  cfg.hidden = 6;
  cfg.feature_dim = 8;
  cfg.num_labels = labels;
  return cfg;
}

}  // namespace

TEST_CASE("edit distance basics") {
  CHECK(eval::levenshtein({}, {}).distance == 0);
  CHECK(eval::levenshtein({1, 2}, {1, 2}).distance == 0);

  eval::EditCounts del = eval::levenshtein({}, {1, 2, 3});
  CHECK(del.distance == 3);
  CHECK(del.dels == 3);
  CHECK(del.ins == 0);

  eval::EditCounts ins = eval::levenshtein({1, 2, 3}, {});
  CHECK(ins.distance == 3);
  CHECK(ins.ins == 3);

  eval::EditCounts sub = eval::levenshtein({1}, {2});
  CHECK(sub.distance == 1);
  CHECK(sub.subs == 1);

  eval::EditCounts one_extra = eval::levenshtein({1, 2, 3}, {1, 3});
  CHECK(one_extra.distance == 1);
  CHECK(one_extra.ins == 1);
}

TEST_CASE("edit distance matches the exhaustive oracle") {
  Rng rng(61);
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<int> hyp = random_units(rng, 8, 4);
    std::vector<int> ref = random_units(rng, 8, 4);
    eval::EditCounts got = eval::levenshtein(hyp, ref);
    testutil::LevOracle want = testutil::lev_oracle(hyp, ref);
    CHECK(got.distance == want.dist);
    CHECK(got.subs + got.dels + got.ins == got.distance);
    CHECK(want.triples.count({got.subs, got.dels, got.ins}) == 1);
  }
}

TEST_CASE("edit distance obeys the triangle inequality") {
  Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> a = random_units(rng, 6, 3);
    std::vector<int> b = random_units(rng, 6, 3);
    std::vector<int> c = random_units(rng, 6, 3);
    int ab = eval::levenshtein(a, b).distance;
    int bc = eval::levenshtein(b, c).distance;
    int ac = eval::levenshtein(a, c).distance;
    CHECK(ac <= ab + bc);
    CHECK(eval::levenshtein(b, a).distance == ab);
  }
}

TEST_CASE("assignment scoring finds the swap") {
  std::vector<std::vector<int>> refs = {{1, 2, 3}, {4, 5}};
  std::vector<std::vector<int>> hyps = {{4, 5}, {1, 2, 3}};
  eval::AssignmentScore s = eval::best_assignment_score(hyps, refs);
  CHECK(s.total == 0);
  CHECK(s.perm == std::vector<int>{1, 0});
  REQUIRE(s.per_stream.size() == 2);
  CHECK(s.per_stream[0].distance == 0);
}

TEST_CASE("assignment scoring matches brute force at three streams") {
  Rng rng(63);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::vector<int>> hyps, refs;
    for (int s = 0; s < 3; ++s) {
      hyps.push_back(random_units(rng, 6, 3));
      refs.push_back(random_units(rng, 6, 3));
    }
    eval::AssignmentScore got = eval::best_assignment_score(hyps, refs);

    int want = -1;
    std::vector<int> idx = {0, 1, 2};
    std::sort(idx.begin(), idx.end());
    do {
      int total = 0;
      for (int s = 0; s < 3; ++s)
        total += eval::levenshtein(hyps[std::size_t(s)],
                                   refs[std::size_t(idx[std::size_t(s)])])
                     .distance;
      if (want < 0 || total < want) want = total;
    } while (std::next_permutation(idx.begin(), idx.end()));
    CHECK(got.total == want);

    int per_stream_total = 0;
    for (const auto& e : got.per_stream) per_stream_total += e.distance;
    CHECK(per_stream_total == got.total);
  }
}

TEST_CASE("assignment ties resolve to the first permutation") {
  std::vector<std::vector<int>> twin_refs = {{1, 2}, {1, 2}};
  std::vector<std::vector<int>> hyps = {{1, 2}, {3}};
  eval::AssignmentScore s = eval::best_assignment_score(hyps, twin_refs);
  CHECK(s.perm == std::vector<int>{0, 1});
}

TEST_CASE("permuting references relabels the assignment only") {
  Rng rng(64);
  int unique_seen = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::vector<int>> hyps, refs;
    for (int s = 0; s < 3; ++s) {
      hyps.push_back(random_units(rng, 5, 5));
      refs.push_back(random_units(rng, 5, 5));
    }
    eval::AssignmentScore base = eval::best_assignment_score(hyps, refs);

    // Integer edit distances tie often; the composed-assignment identity
    // only binds when the optimum is unique.
    int best_count = 0;
    std::vector<int> idx = {0, 1, 2};
    do {
      int total = 0;
      for (int s = 0; s < 3; ++s)
        total += eval::levenshtein(hyps[std::size_t(s)],
                                   refs[std::size_t(idx[std::size_t(s)])])
                     .distance;
      if (total == base.total) ++best_count;
    } while (std::next_permutation(idx.begin(), idx.end()));
    REQUIRE(best_count >= 1);

    std::vector<int> sigma = {2, 0, 1};  // moved[j] = refs[sigma[j]]
    std::vector<std::vector<int>> moved;
    for (int j = 0; j < 3; ++j)
      moved.push_back(refs[std::size_t(sigma[std::size_t(j)])]);
    eval::AssignmentScore after = eval::best_assignment_score(hyps, moved);
    CHECK(after.total == base.total);
    if (best_count == 1) {
      ++unique_seen;
      for (int s = 0; s < 3; ++s)
        CHECK(sigma[std::size_t(after.perm[std::size_t(s)])] ==
              base.perm[std::size_t(s)]);
    }
  }
  CHECK(unique_seen > 0);
}

TEST_CASE("injection pairing matches brute force") {
  Rng rng(65);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::vector<int>> hyps, refs;
    for (int s = 0; s < 3; ++s) hyps.push_back(random_units(rng, 5, 3));
    for (int s = 0; s < 2; ++s) refs.push_back(random_units(rng, 5, 3));
    eval::InjectionScore got = eval::best_injection_score(hyps, refs);
    CHECK(got.total == brute_injection_total(hyps, refs));

    REQUIRE(got.injection.size() == 2);
    REQUIRE(got.surplus.size() == 1);
    std::vector<char> used(3, 0);
    for (int h : got.injection) used[std::size_t(h)] = 1;
    CHECK(used[std::size_t(got.surplus[0])] == 0);
  }
}

TEST_CASE("a silent surplus stream reduces to plain assignment") {
  std::vector<std::vector<int>> refs = {{1, 2, 3}, {2, 4}};
  std::vector<std::vector<int>> hyps = {{1, 2, 3}, {2, 4}, {}};
  eval::InjectionScore s = eval::best_injection_score(hyps, refs);
  CHECK(s.total == 0);
  CHECK(s.injection == std::vector<int>{0, 1});
  CHECK(s.surplus == std::vector<int>{2});

  // Injection is strictly for the wider-than-reference case.
  std::vector<std::vector<int>> h2 = {{1}, {2}};
  std::vector<std::vector<int>> r2 = {{1}, {2}};
  CHECK_THROWS_AS(eval::best_injection_score(h2, r2), Error);
}

TEST_CASE("injection ties resolve lexicographically") {
  std::vector<std::vector<int>> hyps = {{7}, {7}, {9}};
  std::vector<std::vector<int>> refs = {{7}, {7}};
  eval::InjectionScore s = eval::best_injection_score(hyps, refs);
  CHECK(s.total == 0);
  CHECK(s.injection == std::vector<int>{0, 1});
}

TEST_CASE("oracle hypotheses score a clean sheet") {
  auto samples = testutil::tiny_mixtures(8, 901);
  std::vector<std::vector<std::vector<int>>> hyps;
  for (const auto& s : samples) hyps.push_back(s.source_labels);
  eval::ScoreReport rep = eval::score_frame_labels(samples, hyps);

  eval::ConditionStats all = rep.overall();
  CHECK(all.subs + all.dels + all.ins == 0);
  CHECK(all.frame_errs == 0);
  CHECK(all.ref_units > 0);
  CHECK(all.unit_err() == 0.0);
  CHECK(all.frame_err() == 0.0);

  // One utterance count per role row, summing to the sample count.
  std::map<double, std::size_t> high_counts;
  for (const auto& [key, stats] : rep.rows) {
    if (key.role == "high_e") high_counts[key.snr_db] += stats.n_utts;
  }
  std::size_t total = 0;
  for (const auto& [snr, n] : high_counts) total += n;
  CHECK(total == samples.size());

  // PIT property: swapping the streams must not cost anything.
  std::vector<std::vector<std::vector<int>>> swapped;
  for (const auto& s : samples)
    swapped.push_back({s.source_labels[1], s.source_labels[0]});
  eval::ConditionStats sw =
      eval::score_frame_labels(samples, swapped).overall();
  CHECK(sw.subs + sw.dels + sw.ins == 0);
  CHECK(sw.frame_errs == 0);
}

TEST_CASE("corrupted hypotheses are charged for their damage") {
  auto samples = testutil::tiny_mixtures(4, 902);
  std::vector<std::vector<std::vector<int>>> hyps;
  for (const auto& s : samples) hyps.push_back(s.source_labels);
  // Silence one full stream of the first sample.
  std::fill(hyps[0][0].begin(), hyps[0][0].end(), 0);
  eval::ConditionStats all =
      eval::score_frame_labels(samples, hyps).overall();
  CHECK(all.dels > 0);
  CHECK(all.frame_errs > 0);
  CHECK(all.unit_err() > 0.0);
}

TEST_CASE("an untrained recognizer is hopeless") {
  auto samples = testutil::tiny_mixtures(6, 903, 2, 21);
  models::Model m(tiny_arch(models::Arch::kA3DirectPitCE, 2, 21), 904);
  eval::ScoreReport rep = eval::score_dataset(m, samples);
  CHECK(rep.overall().unit_err() > 0.8);

  // Model-driven scoring is the frame-label path on its own decodes.
  std::vector<std::vector<std::vector<int>>> hyps;
  for (const auto& s : samples)
    hyps.push_back(models::decode_frames(m.forward(s.mixed_features.frames)));
  eval::ScoreReport redo = eval::score_frame_labels(samples, hyps);
  CHECK(redo.overall().subs == rep.overall().subs);
  CHECK(redo.overall().dels == rep.overall().dels);
  CHECK(redo.overall().ins == rep.overall().ins);
  CHECK(redo.overall().frame_errs == rep.overall().frame_errs);
}

TEST_CASE("scoring rejects stream-count mismatches") {
  auto samples = testutil::tiny_mixtures(2, 905);
  models::Model three(tiny_arch(models::Arch::kA3DirectPitCE, 3), 906);
  CHECK_THROWS_AS(eval::score_dataset(three, samples), Error);

  models::Model a1(tiny_arch(models::Arch::kA1FixedSep, 2), 907);
  CHECK_THROWS_AS(eval::score_dataset(a1, samples), Error);

  models::Model two(tiny_arch(models::Arch::kA3DirectPitCE, 2), 908);
  CHECK_THROWS_AS(eval::cross_count_eval(two, samples), Error);
}

TEST_CASE("cross-count scoring accounts for surplus streams") {
  auto samples = testutil::tiny_mixtures(5, 909);
  models::Model three(tiny_arch(models::Arch::kA3DirectPitCE, 3), 910);
  eval::ScoreReport rep = eval::cross_count_eval(three, samples);
  CHECK(rep.surplus_streams == samples.size());
  CHECK(rep.mean_surplus_len >= 0.0);
  CHECK(rep.overall().ref_units > 0);

  // The per-sample pairing must be the exhaustive optimum.
  for (const auto& s : samples) {
    auto decoded = models::decode_streams(three.forward(s.mixed_features.frames));
    std::vector<std::vector<int>> refs;
    for (const auto& stream : s.source_labels)
      refs.push_back(models::collapse_labels(stream));
    CHECK(eval::best_injection_score(decoded, refs).total ==
          brute_injection_total(decoded, refs));
  }
}

TEST_CASE("the two-stage pipeline scores end to end") {
  auto samples = testutil::tiny_mixtures(3, 911);
  models::Model sep(tiny_arch(models::Arch::kA2PitSep, 2), 912);
  models::Model rec(tiny_arch(models::Arch::kA3DirectPitCE, 1), 913);
  eval::ScoreReport rep = eval::score_pipeline(sep, rec, samples);
  CHECK(rep.overall().ref_units > 0);

  models::Model wide_rec(tiny_arch(models::Arch::kA3DirectPitCE, 2), 914);
  CHECK_THROWS_AS(eval::score_pipeline(sep, wide_rec, samples), Error);
  CHECK_THROWS_AS(eval::score_pipeline(rec, rec, samples), Error);
}

TEST_CASE("reports serialize with the documented schema") {
  auto samples = testutil::tiny_mixtures(5, 915);
  std::vector<std::vector<std::vector<int>>> hyps;
  for (const auto& s : samples) hyps.push_back(s.source_labels);
  eval::ScoreReport rep = eval::score_frame_labels(samples, hyps);
  rep.surplus_streams = 2;
  rep.mean_surplus_len = 1.5;

  std::string dir = testutil::fresh_dir("eval_report");
  eval::write_report(dir + "/report.csv", rep);
  eval::write_surplus(dir + "/report.surplus.csv", rep);

  std::string body = testutil::read_file(dir + "/report.csv");
  CHECK(body.rfind("snr_db,stream_role,n_utts,unit_err,frame_err,subs,dels,"
                   "ins\n",
                   0) == 0);
  std::size_t lines = std::count(body.begin(), body.end(), '\n');
  CHECK(lines == rep.rows.size() + 1);

  std::string surplus = testutil::read_file(dir + "/report.surplus.csv");
  CHECK(surplus.rfind("surplus_streams,mean_surplus_len\n", 0) == 0);
  CHECK(surplus.find("2,1.5") != std::string::npos);

  // Scoring is pure: a second pass writes identical bytes.
  eval::ScoreReport again = eval::score_frame_labels(samples, hyps);
  again.surplus_streams = 2;
  again.mean_surplus_len = 1.5;
  eval::write_report(dir + "/report2.csv", again);
  CHECK(testutil::files_equal(dir + "/report.csv", dir + "/report2.csv"));
}
