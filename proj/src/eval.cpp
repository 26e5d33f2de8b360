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

#include "pitmix/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "pitmix/pit.hpp"

namespace pitmix::eval {

namespace {

// Per-sample scoring intermediate, keyed by reference stream.
struct SampleScore {
  std::vector<EditCounts> per_ref;
  std::vector<long> ref_units;
  std::vector<long> frame_errs;
  long frames = 0;
  std::vector<int> surplus_lens;
};

long count_frame_errors(const std::vector<int>& hyp,
                        const std::vector<int>& ref) {
  PITMIX_CHECK(hyp.size() == ref.size(), "frame stream length mismatch");
  long errs = 0;
  for (std::size_t t = 0; t < hyp.size(); ++t)
    if (hyp[t] != ref[t]) ++errs;
  return errs;
}

// Scores one utterance's per-frame hypothesis streams against the sample's
// references, pairing by the unit-level optimum.
SampleScore score_frames(const std::vector<std::vector<int>>& hyp_frames,
                         const corpus::MixtureSample& sample, bool injection) {
  std::vector<std::vector<int>> hyp_units;
  for (const auto& f : hyp_frames)
    hyp_units.push_back(models::collapse_labels(f));
  std::vector<std::vector<int>> ref_units;
  for (const auto& l : sample.source_labels)
    ref_units.push_back(models::collapse_labels(l));

  const int refs = sample.sources();
  SampleScore out;
  out.frames = long(sample.frames());
  out.per_ref.resize(std::size_t(refs));
  out.ref_units.resize(std::size_t(refs), 0);
  out.frame_errs.resize(std::size_t(refs), 0);
  std::vector<int> hyp_of_ref(std::size_t(refs), -1);

  if (injection) {
    InjectionScore inj = best_injection_score(hyp_units, ref_units);
    for (int r = 0; r < refs; ++r) {
      out.per_ref[std::size_t(r)] = inj.per_ref[std::size_t(r)];
      hyp_of_ref[std::size_t(r)] = inj.injection[std::size_t(r)];
    }
    for (int s : inj.surplus)
      out.surplus_lens.push_back(int(hyp_units[std::size_t(s)].size()));
  } else {
    AssignmentScore as = best_assignment_score(hyp_units, ref_units);
    for (int h = 0; h < refs; ++h) {
      int r = as.perm[std::size_t(h)];
      out.per_ref[std::size_t(r)] = as.per_stream[std::size_t(h)];
      hyp_of_ref[std::size_t(r)] = h;
    }
  }

  for (int r = 0; r < refs; ++r) {
    out.ref_units[std::size_t(r)] = long(ref_units[std::size_t(r)].size());
    out.frame_errs[std::size_t(r)] = count_frame_errors(
        hyp_frames[std::size_t(hyp_of_ref[std::size_t(r)])],
        sample.source_labels[std::size_t(r)]);
  }
  return out;
}

ScoreReport aggregate(const std::vector<SampleScore>& scores,
                      const std::vector<corpus::MixtureSample>& samples) {
  std::map<ConditionKey, ConditionStats> rows;
  long surplus_count = 0, surplus_len_sum = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const SampleScore& sc = scores[i];
    for (std::size_t r = 0; r < sc.per_ref.size(); ++r) {
      ConditionKey key{samples[i].snr_db, r == 0 ? "high_e" : "low_e"};
      ConditionStats& st = rows[key];
      if (r <= 1) ++st.n_utts;  // one count per utterance per role
      st.ref_units += sc.ref_units[r];
      st.subs += sc.per_ref[r].subs;
      st.dels += sc.per_ref[r].dels;
      st.ins += sc.per_ref[r].ins;
      st.ref_frames += sc.frames;
      st.frame_errs += sc.frame_errs[r];
    }
    for (int len : sc.surplus_lens) {
      ++surplus_count;
      surplus_len_sum += len;
    }
  }
  ScoreReport report;
  report.rows.assign(rows.begin(), rows.end());
  report.surplus_streams = std::size_t(surplus_count);
  report.mean_surplus_len =
      surplus_count == 0 ? 0.0 : double(surplus_len_sum) / double(surplus_count);
  return report;
}

using FrameFn =
    std::function<std::vector<std::vector<int>>(const corpus::MixtureSample&)>;

ScoreReport run_scoring(const std::vector<corpus::MixtureSample>& samples,
                        const FrameFn& hyp_frames_of, bool injection,
                        int jobs) {
  PITMIX_CHECK(!samples.empty(), "nothing to score");
  std::vector<SampleScore> scores(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    scores[i] = score_frames(hyp_frames_of(samples[i]), samples[i], injection);
  });
  return aggregate(scores, samples);
}

}  // namespace

EditCounts levenshtein(const std::vector<int>& hyp,
                       const std::vector<int>& ref) {
  const std::size_t h = hyp.size(), r = ref.size();
  std::vector<std::vector<int>> d(h + 1, std::vector<int>(r + 1, 0));
  for (std::size_t i = 0; i <= h; ++i) d[i][0] = int(i);
  for (std::size_t j = 0; j <= r; ++j) d[0][j] = int(j);
  for (std::size_t i = 1; i <= h; ++i) {
    for (std::size_t j = 1; j <= r; ++j) {
      int diag = d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1] ? 1 : 0);
      int del = d[i][j - 1] + 1;  // reference unit not covered
      int ins = d[i - 1][j] + 1;  // extra hypothesis unit
      d[i][j] = std::min(diag, std::min(del, ins));
    }
  }
  EditCounts c;
  c.distance = d[h][r];
  // Backtrace one optimal alignment: substitution before deletion before
  // insertion on ties.
  std::size_t i = h, j = r;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[i][j] == d[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1] ? 1 : 0)) {
      if (hyp[i - 1] != ref[j - 1]) ++c.subs;
      --i;
      --j;
    } else if (j > 0 && d[i][j] == d[i][j - 1] + 1) {
      ++c.dels;
      --j;
    } else {
      ++c.ins;
      --i;
    }
  }
  PITMIX_CHECK(c.distance == c.subs + c.dels + c.ins,
               "edit decomposition out of balance");
  return c;
}

AssignmentScore best_assignment_score(
    const std::vector<std::vector<int>>& hyps,
    const std::vector<std::vector<int>>& refs) {
  PITMIX_CHECK(hyps.size() == refs.size(), "stream count mismatch");
  const int s = int(hyps.size());
  PITMIX_CHECK(s >= 1 && s <= 6, "supported stream counts are 1..6");

  std::vector<std::vector<EditCounts>> cost;
  cost.assign(std::size_t(s), std::vector<EditCounts>(std::size_t(s)));
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b)
      cost[std::size_t(a)][std::size_t(b)] =
          levenshtein(hyps[std::size_t(a)], refs[std::size_t(b)]);
  }

  AssignmentScore best;
  bool have = false;
  for (const auto& perm : pit::permutations(s)) {
    int total = 0;
    for (int a = 0; a < s; ++a)
      total += cost[std::size_t(a)][std::size_t(perm[std::size_t(a)])].distance;
    if (!have || total < best.total) {
      have = true;
      best.perm = perm;
      best.total = total;
    }
  }
  best.per_stream.resize(std::size_t(s));
  for (int a = 0; a < s; ++a)
    best.per_stream[std::size_t(a)] =
        cost[std::size_t(a)][std::size_t(best.perm[std::size_t(a)])];
  return best;
}

InjectionScore best_injection_score(const std::vector<std::vector<int>>& hyps,
                                    const std::vector<std::vector<int>>& refs) {
  const int nh = int(hyps.size()), nr = int(refs.size());
  PITMIX_CHECK(nh > nr, "cross-count needs more hypothesis streams than refs");
  PITMIX_CHECK(nr >= 1 && nh <= 6, "supported stream counts are 1..6");

  std::vector<std::vector<EditCounts>> cost;
  cost.assign(std::size_t(nr), std::vector<EditCounts>(std::size_t(nh)));
  for (int r = 0; r < nr; ++r) {
    for (int h = 0; h < nh; ++h)
      cost[std::size_t(r)][std::size_t(h)] =
          levenshtein(hyps[std::size_t(h)], refs[std::size_t(r)]);
  }

  InjectionScore best;
  bool have = false;
  std::vector<int> cur(std::size_t(nr), -1);
  std::vector<char> used(std::size_t(nh), 0);
  // Ascending choice order makes the enumeration lexicographic, so the
  // first minimum is the tie-break winner.
  auto recurse = [&](auto&& self, int r, int total) -> void {
    if (r == nr) {
      if (!have || total < best.total) {
        have = true;
        best.injection = cur;
        best.total = total;
      }
      return;
    }
    for (int h = 0; h < nh; ++h) {
      if (used[std::size_t(h)]) continue;
      used[std::size_t(h)] = 1;
      cur[std::size_t(r)] = h;
      self(self, r + 1, total + cost[std::size_t(r)][std::size_t(h)].distance);
      used[std::size_t(h)] = 0;
    }
  };
  recurse(recurse, 0, 0);

  best.per_ref.resize(std::size_t(nr));
  std::vector<char> assigned(std::size_t(nh), 0);
  for (int r = 0; r < nr; ++r) {
    best.per_ref[std::size_t(r)] =
        cost[std::size_t(r)][std::size_t(best.injection[std::size_t(r)])];
    assigned[std::size_t(best.injection[std::size_t(r)])] = 1;
  }
  for (int h = 0; h < nh; ++h)
    if (!assigned[std::size_t(h)]) best.surplus.push_back(h);
  return best;
}

ConditionStats ScoreReport::overall() const {
  ConditionStats total;
  for (const auto& [key, st] : rows) {
    total.n_utts += st.n_utts;
    total.ref_units += st.ref_units;
    total.subs += st.subs;
    total.dels += st.dels;
    total.ins += st.ins;
    total.ref_frames += st.ref_frames;
    total.frame_errs += st.frame_errs;
  }
  return total;
}

ScoreReport score_frame_labels(
    const std::vector<corpus::MixtureSample>& samples,
    const std::vector<std::vector<std::vector<int>>>& hyp_frames,
    bool injection, int jobs) {
  PITMIX_CHECK(samples.size() == hyp_frames.size(),
               "one hypothesis grid per sample required");
  PITMIX_CHECK(!samples.empty(), "nothing to score");
  std::vector<SampleScore> scores(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    scores[i] = score_frames(hyp_frames[i], samples[i], injection);
  });
  return aggregate(scores, samples);
}

ScoreReport score_dataset(const models::Model& model,
                          const std::vector<corpus::MixtureSample>& samples,
                          int jobs) {
  PITMIX_CHECK(model.config().arch == models::Arch::kA3DirectPitCE ||
                   model.config().arch == models::Arch::kA4Joint,
               "scoring needs an architecture with logit heads");
  return run_scoring(
      samples,
      [&](const corpus::MixtureSample& s) {
        PITMIX_CHECK(s.sources() == model.config().num_streams,
                     "sample stream count does not match the model");
        return models::decode_frames(model.forward(s.mixed_features.frames));
      },
      /*injection=*/false, jobs);
}

ScoreReport score_pipeline(const models::Model& separator,
                           const models::Model& recognizer,
                           const std::vector<corpus::MixtureSample>& samples,
                           int jobs) {
  PITMIX_CHECK(separator.config().arch == models::Arch::kA1FixedSep ||
                   separator.config().arch == models::Arch::kA2PitSep,
               "pipeline front end must be a separation architecture");
  PITMIX_CHECK(recognizer.config().arch == models::Arch::kA3DirectPitCE &&
                   recognizer.config().num_streams == 1,
               "pipeline back end must be a single-stream recognizer");
  return run_scoring(
      samples,
      [&](const corpus::MixtureSample& s) {
        PITMIX_CHECK(s.sources() == separator.config().num_streams,
                     "sample stream count does not match the separator");
        models::ForwardOutput sep = separator.forward(s.mixed_features.frames);
        std::vector<std::vector<int>> hyp_frames;
        for (const Matrix& est : sep.separated_features) {
          dsp::FeatureSequence f;
          f.frames = est;
          f.frame_hop = s.mixed_features.frame_hop;
          models::ForwardOutput rec =
              recognizer.forward(dsp::cmvn(f).frames);
          hyp_frames.push_back(models::decode_frames(rec)[0]);
        }
        return hyp_frames;
      },
      /*injection=*/false, jobs);
}

ScoreReport cross_count_eval(const models::Model& model,
                             const std::vector<corpus::MixtureSample>& samples,
                             int jobs) {
  PITMIX_CHECK(model.config().arch == models::Arch::kA3DirectPitCE ||
                   model.config().arch == models::Arch::kA4Joint,
               "scoring needs an architecture with logit heads");
  return run_scoring(
      samples,
      [&](const corpus::MixtureSample& s) {
        PITMIX_CHECK(s.sources() < model.config().num_streams,
                     "cross-count needs fewer sample sources than model streams");
        return models::decode_frames(model.forward(s.mixed_features.frames));
      },
      /*injection=*/true, jobs);
}

void write_report(const std::string& path, const ScoreReport& report) {
  std::ofstream os(path, std::ios::binary);
  PITMIX_CHECK(os.good(), "cannot write report: " + path);
  os << "snr_db,stream_role,n_utts,unit_err,frame_err,subs,dels,ins\n";
  for (const auto& [key, st] : report.rows) {
    os << format_double(key.snr_db) << "," << key.role << "," << st.n_utts
       << "," << format_double(st.unit_err()) << ","
       << format_double(st.frame_err()) << "," << st.subs << "," << st.dels
       << "," << st.ins << "\n";
  }
  PITMIX_CHECK(os.good(), "report write failed: " + path);
}

void write_surplus(const std::string& path, const ScoreReport& report) {
  std::ofstream os(path, std::ios::binary);
  PITMIX_CHECK(os.good(), "cannot write surplus report: " + path);
  os << "surplus_streams,mean_surplus_len\n";
  os << report.surplus_streams << ","
     << format_double(report.mean_surplus_len) << "\n";
  PITMIX_CHECK(os.good(), "surplus write failed: " + path);
}

}  // namespace pitmix::eval
