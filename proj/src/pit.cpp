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

#include "pitmix/pit.hpp"

#include <algorithm>
#include <numeric>

namespace pitmix::pit {

namespace {

// Per-(output, target) loss nodes; pairwise[s][s'] pairs output s with
// target s'. The chosen permutation's nodes are summed into the returned
// scalar; the rest stay off the gradient path.
PitResult select_best(Tape& t, int S,
                      const std::vector<std::vector<Var>>& pairwise,
                      Criterion criterion) {
  PitResult res;
  res.criterion = criterion;
  auto perms = permutations(S);
  res.all_losses.reserve(perms.size());
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < perms.size(); ++i) {
    double sum = 0.0;
    for (int s = 0; s < S; ++s)
      sum += t.value(pairwise[std::size_t(s)]
                             [std::size_t(perms[i][std::size_t(s)])])(0, 0);
    Assignment a;
    a.perm = perms[i];
    // Same rounding as the scale node below, so best.loss is bit-equal
    // to the tape value even when S is not a power of two.
    a.loss = sum * (1.0 / double(S));
    res.all_losses.push_back(std::move(a));
    if (res.all_losses[i].loss < res.all_losses[best_idx].loss) best_idx = i;
  }
  res.best = res.all_losses[best_idx];
  std::vector<Var> chosen(std::size_t(S), Var{});
  for (int s = 0; s < S; ++s)
    chosen[std::size_t(s)] =
        pairwise[std::size_t(s)]
                [std::size_t(res.best.perm[std::size_t(s)])];
  res.loss_var = t.scale(t.add_n(chosen), 1.0 / double(S));
  return res;
}

void check_weights(const pit::FrameWeights* weights, std::size_t S) {
  if (weights)
    PITMIX_CHECK(weights->size() == S,
                 "frame weights: one vector per target stream required");
}

}  // namespace

std::vector<std::vector<int>> permutations(int s) {
  PITMIX_CHECK(s >= 1 && s <= 6, "permutations: S must be in [1, 6]");
  std::vector<int> p(std::size_t(s), 0);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

Var fixed_mse(Tape& t, const std::vector<Var>& outputs,
              const std::vector<Var>& targets, const FrameWeights* weights) {
  PITMIX_CHECK(!outputs.empty() && outputs.size() == targets.size(),
               "fixed_mse: stream count mismatch");
  check_weights(weights, targets.size());
  std::vector<Var> terms(outputs.size());
  for (std::size_t s = 0; s < outputs.size(); ++s)
    terms[s] = weights ? t.mse_sum(outputs[s], targets[s], (*weights)[s])
                       : t.mse_sum(outputs[s], targets[s]);
  return t.scale(t.add_n(terms), 1.0 / double(outputs.size()));
}

PitResult pit_mse(Tape& t, const std::vector<Var>& outputs,
                  const std::vector<Var>& targets,
                  const FrameWeights* weights) {
  PITMIX_CHECK(!outputs.empty() && outputs.size() == targets.size(),
               "pit_mse: stream count mismatch");
  check_weights(weights, targets.size());
  const int S = int(outputs.size());
  std::vector<std::vector<Var>> pairwise(outputs.size(),
                                         std::vector<Var>(targets.size()));
  for (std::size_t s = 0; s < outputs.size(); ++s)
    for (std::size_t sp = 0; sp < targets.size(); ++sp)
      pairwise[s][sp] = weights
                            ? t.mse_sum(outputs[s], targets[sp], (*weights)[sp])
                            : t.mse_sum(outputs[s], targets[sp]);
  return select_best(t, S, pairwise, Criterion::kMse);
}

PitResult pit_ce(Tape& t, const std::vector<Var>& outputs,
                 const std::vector<std::vector<int>>& labels,
                 const FrameWeights* weights) {
  PITMIX_CHECK(!outputs.empty() && outputs.size() == labels.size(),
               "pit_ce: stream count mismatch");
  check_weights(weights, labels.size());
  const int S = int(outputs.size());
  for (const auto& l : labels)
    PITMIX_CHECK(Index(l.size()) == t.value(outputs[0]).rows(),
                 "pit_ce: label length must match frame count");
  std::vector<std::vector<Var>> pairwise(outputs.size(),
                                         std::vector<Var>(labels.size()));
  for (std::size_t s = 0; s < outputs.size(); ++s)
    for (std::size_t sp = 0; sp < labels.size(); ++sp)
      pairwise[s][sp] =
          weights ? t.softmax_ce_sum(outputs[s], labels[sp], (*weights)[sp])
                  : t.softmax_ce_sum(outputs[s], labels[sp]);
  return select_best(t, S, pairwise, Criterion::kCe);
}

JointResult joint_objectives(Tape& t, const std::vector<Var>& sep_outputs,
                             const std::vector<Var>& sep_targets,
                             const std::vector<Var>& rec_outputs,
                             const std::vector<std::vector<int>>& rec_labels,
                             bool consistent_assignment,
                             const FrameWeights* mse_weights,
                             const FrameWeights* ce_weights) {
  PITMIX_CHECK(sep_outputs.size() == rec_outputs.size() &&
                   sep_outputs.size() == rec_labels.size(),
               "joint_objectives: stream counts must agree");
  JointResult res;
  res.j1 = pit_mse(t, sep_outputs, sep_targets, mse_weights);
  res.j2 = pit_ce(t, rec_outputs, rec_labels, ce_weights);
  if (consistent_assignment) {
    const int S = int(rec_outputs.size());
    const auto& perm = res.j1.best.perm;
    std::vector<Var> terms(std::size_t(S), Var{});
    double sum = 0.0;
    for (int s = 0; s < S; ++s) {
      const auto& lab = rec_labels[std::size_t(perm[std::size_t(s)])];
      terms[std::size_t(s)] =
          ce_weights
              ? t.softmax_ce_sum(rec_outputs[std::size_t(s)], lab,
                                 (*ce_weights)[std::size_t(perm[std::size_t(s)])])
              : t.softmax_ce_sum(rec_outputs[std::size_t(s)], lab);
      sum += t.value(terms[std::size_t(s)])(0, 0);
    }
    res.j2.best.perm = perm;
    res.j2.best.loss = sum / double(S);
    res.j2.loss_var = t.scale(t.add_n(terms), 1.0 / double(S));
  }
  return res;
}

}  // namespace pitmix::pit
