// eval.hpp - permutation-optimal scoring: Levenshtein alignment with
// substitution/deletion/insertion decomposition, best-assignment selection
// over all stream pairings, SNR-conditioned reports, and the cross-count
// harness that scores a wider model on a narrower mixture.

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

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pitmix/corpus.hpp"
#include "pitmix/models.hpp"

namespace pitmix::eval {

struct EditCounts {
  int distance = 0;  // always subs + dels + ins
  int subs = 0;
  int dels = 0;
  int ins = 0;
};

// Minimal unit-cost edit distance with one optimal alignment decomposed
// into counts; ties prefer substitution over deletion over insertion.
EditCounts levenshtein(const std::vector<int>& hyp, const std::vector<int>& ref);

struct AssignmentScore {
  std::vector<int> perm;  // hypothesis stream s is scored against ref perm[s]
  int total = 0;
  std::vector<EditCounts> per_stream;  // indexed by hypothesis stream
};

// Exhaustive minimum of total edit distance over all S! pairings,
// lexicographically first permutation on ties.
AssignmentScore best_assignment_score(
    const std::vector<std::vector<int>>& hyps,
    const std::vector<std::vector<int>>& refs);

struct InjectionScore {
  std::vector<int> injection;  // ref r is scored against hyp injection[r]
  int total = 0;
  std::vector<EditCounts> per_ref;
  std::vector<int> surplus;  // hypothesis streams left unassigned
};

// Cross-count pairing: all ordered injections of the refs into the (more
// numerous) hypothesis streams, minimum total distance, lexicographically
// first injection on ties.
InjectionScore best_injection_score(const std::vector<std::vector<int>>& hyps,
                                    const std::vector<std::vector<int>>& refs);

// One report row: an SNR condition crossed with the reference stream role
// ("high_e" is the SNR-reference source, "low_e" the interferers).
struct ConditionKey {
  double snr_db = 0.0;
  std::string role;

  bool operator<(const ConditionKey& o) const {
    if (snr_db != o.snr_db) return snr_db < o.snr_db;
    return role < o.role;
  }
  bool operator==(const ConditionKey& o) const {
    return snr_db == o.snr_db && role == o.role;
  }
};

struct ConditionStats {
  std::size_t n_utts = 0;
  long ref_units = 0;
  long subs = 0, dels = 0, ins = 0;
  long ref_frames = 0;
  long frame_errs = 0;

  // May exceed 1 when insertions dominate.
  double unit_err() const {
    return ref_units == 0 ? 0.0 : double(subs + dels + ins) / double(ref_units);
  }
  double frame_err() const {
    return ref_frames == 0 ? 0.0 : double(frame_errs) / double(ref_frames);
  }
};

struct ScoreReport {
  std::vector<std::pair<ConditionKey, ConditionStats>> rows;  // sorted by key
  // Cross-count bookkeeping: unassigned hypothesis streams.
  std::size_t surplus_streams = 0;
  double mean_surplus_len = 0.0;  // mean decoded unit count per surplus stream

  ConditionStats overall() const;
};

// Scores externally supplied per-frame stream hypotheses (one label grid
// per sample, streams x frames). The model-driven entry points below
// decode with a model and delegate to the same bookkeeping.
ScoreReport score_frame_labels(
    const std::vector<corpus::MixtureSample>& samples,
    const std::vector<std::vector<std::vector<int>>>& hyp_frames,
    bool injection = false, int jobs = 1);

// Decodes and scores every sample with the model's own logit heads.
// The model stream count must equal the sample source count.
ScoreReport score_dataset(const models::Model& model,
                          const std::vector<corpus::MixtureSample>& samples,
                          int jobs = 1);

// Two-stage pipeline: the separator's feature streams are re-normalized
// per utterance and pushed through a single-stream recognizer, then scored
// like score_dataset.
ScoreReport score_pipeline(const models::Model& separator,
                           const models::Model& recognizer,
                           const std::vector<corpus::MixtureSample>& samples,
                           int jobs = 1);

// Scores a model with more streams than the mixtures have speakers via
// best_injection_score; surplus-stream statistics land in the report.
ScoreReport cross_count_eval(const models::Model& model,
                             const std::vector<corpus::MixtureSample>& samples,
                             int jobs = 1);

// CSV: snr_db,stream_role,n_utts,unit_err,frame_err,subs,dels,ins.
void write_report(const std::string& path, const ScoreReport& report);
// CSV sidecar: surplus_streams,mean_surplus_len.
void write_surplus(const std::string& path, const ScoreReport& report);

}  // namespace pitmix::eval
