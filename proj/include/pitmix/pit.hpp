// pit.hpp - permutation invariant objectives. An utterance gets one
// output-to-target assignment, chosen as the loss-minimizing permutation
// over all S! candidates; gradients flow through the chosen assignment only.

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

#include <vector>

#include "pitmix/autodiff.hpp"
#include "pitmix/common.hpp"

namespace pitmix::pit {

using nn::Tape;
using nn::Var;

// All S! bijections of {0..S-1} in lexicographic order. 1 <= S <= 6.
std::vector<std::vector<int>> permutations(int s);

// perm[s] is the target index assigned to output stream s.
struct Assignment {
  std::vector<int> perm;
  double loss = 0.0;
};

enum class Criterion { kMse, kCe };

// Outcome of one PIT evaluation. all_losses holds every permutation in
// lexicographic order; best is the minimum, ties broken toward the
// lexicographically smallest permutation. loss_var is the tape node of
// best.loss. All losses carry the 1/S factor.
struct PitResult {
  Assignment best;
  std::vector<Assignment> all_losses;
  Criterion criterion = Criterion::kMse;
  Var loss_var;
};

// Optional per-target frame weights (silence masking ablation): weights[s']
// has one entry per frame of target s'; omitted frames use weight 0.
// Null means every frame counts.
using FrameWeights = std::vector<Vector>;

// J = (1/S) sum_s mse(outputs[s], targets[s]), identity assignment.
Var fixed_mse(Tape& t, const std::vector<Var>& outputs,
              const std::vector<Var>& targets,
              const FrameWeights* weights = nullptr);

// Eq.-style utterance-level PIT over squared feature distances.
PitResult pit_mse(Tape& t, const std::vector<Var>& outputs,
                  const std::vector<Var>& targets,
                  const FrameWeights* weights = nullptr);

// PIT over summed frame cross entropies against padded label streams.
PitResult pit_ce(Tape& t, const std::vector<Var>& outputs,
                 const std::vector<std::vector<int>>& labels,
                 const FrameWeights* weights = nullptr);

// Two-stage objective. J1 is pit_mse over the separation streams. With
// consistent_assignment set, J2 evaluates the CE under J1's chosen
// permutation (its best is inherited, so best.loss can exceed the CE
// enumeration's minimum); unset, J2 is an independent pit_ce.
struct JointResult {
  PitResult j1, j2;
};
JointResult joint_objectives(Tape& t, const std::vector<Var>& sep_outputs,
                             const std::vector<Var>& sep_targets,
                             const std::vector<Var>& rec_outputs,
                             const std::vector<std::vector<int>>& rec_labels,
                             bool consistent_assignment = true,
                             const FrameWeights* mse_weights = nullptr,
                             const FrameWeights* ce_weights = nullptr);

}  // namespace pitmix::pit
