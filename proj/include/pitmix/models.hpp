// models.hpp - the four architectures: stacked bidirectional recurrent
// encoders with per-stream heads, loss dispatch onto the permutation
// invariant objectives, stream decoding, and checkpoint round trips.

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

#include <cstdint>
#include <string>
#include <vector>

#include "pitmix/corpus.hpp"
#include "pitmix/layers.hpp"
#include "pitmix/pit.hpp"

namespace pitmix::models {

// A1 trains separation heads with a fixed output-target order; A2 trains
// the same network permutation invariantly; A3 recognizes streams directly
// with PIT over cross entropy; A4 stacks a separation front end and a
// shared recognition back end with per-stream logit heads.
enum class Arch { kA1FixedSep = 0, kA2PitSep = 1, kA3DirectPitCE = 2,
                  kA4Joint = 3 };

std::string arch_name(Arch a);

struct ArchConfig {
  Arch arch = Arch::kA3DirectPitCE;
  int num_streams = 2;  // S; 1 is allowed for A3 (single-talker recognizer)
  int layers = 2;       // encoder depth N (front stack for A4)
  int back_layers = 2;  // A4 recognition stack depth
  int hidden = 32;      // H per direction
  int feature_dim = 16;
  int num_labels = 21;
};

void validate(const ArchConfig& cfg);

// Initialization stream for a given toolkit seed, separated per
// architecture so sibling models in one experiment do not share draws.
inline std::uint64_t init_seed(std::uint64_t master, Arch arch) {
  return child_seed(master, fnv1a64("model-init"), std::uint64_t(arch));
}

// Plain-value forward results.
struct ForwardOutput {
  std::vector<Matrix> separated_features;  // S entries, or empty
  std::vector<Matrix> stream_logits;       // S entries, or empty
};

// Tape-resident forward results for training.
struct TapeForward {
  std::vector<nn::Var> separated_features;
  std::vector<nn::Var> stream_logits;
  std::vector<nn::Var> param_vars;  // aligned with Model::params() order
};

struct LossOptions {
  bool mask_silence = false;     // drop silence-labeled frames from the sums
  bool joint_consistent = true;  // A4: J2 under J1's assignment
  // A4 stage selection: which objective the returned loss_var carries.
  enum class Phase { kFrontMse, kBackCe, kJointCe };
  Phase phase = Phase::kJointCe;
};

struct LossResult {
  double value = 0.0;
  nn::Var loss_var;
  // A2/A3: one entry; A4: {J1, J2}; A1: empty (fixed assignment).
  std::vector<pit::PitResult> pit;
};

class Model {
 public:
  Model(const ArchConfig& cfg, std::uint64_t seed);

  const ArchConfig& config() const { return cfg_; }
  std::vector<nn::NamedParam>& params() { return params_; }
  const std::vector<nn::NamedParam>& params() const { return params_; }
  // Total scalar parameter count.
  std::size_t param_count() const;

  // Stages parameters as tape leaves and runs the forward pass over a
  // T x D feature matrix. A non-null trainable mask (one flag per
  // parameter, params() order) restricts which leaves take gradients;
  // frozen subtrees then cost nothing in the backward pass.
  TapeForward forward_on(nn::Tape& t, const Matrix& mixed_features,
                         bool requires_grad = true,
                         const std::vector<char>* trainable = nullptr) const;
  // Forward-only convenience over a throwaway tape.
  ForwardOutput forward(const Matrix& mixed_features) const;

  // Architecture-dispatched objective against the sample's reference
  // streams (source features for A1/A2, label streams for A3/A4).
  LossResult loss(nn::Tape& t, const TapeForward& fwd,
                  const corpus::MixtureSample& sample,
                  const LossOptions& options = {}) const;

 private:
  friend Model load_checkpoint(const std::string& path);
  Model() = default;

  ArchConfig cfg_;
  std::vector<nn::NamedParam> params_;
};

// Per-frame argmax labels per stream.
std::vector<std::vector<int>> decode_frames(const ForwardOutput& out);
// Collapse runs of identical labels, then drop silence.
std::vector<int> collapse_labels(const std::vector<int>& frame_labels);
// argmax, collapse, drop silence per stream: the decoded unit sequences.
std::vector<std::vector<int>> decode_streams(const ForwardOutput& out);

// Checkpoint: magic "PITNN1\0", u32 arch tag, u32 recurrent layer count,
// u32 parameter tensor count, then per tensor: u32 name length, name,
// u32 rank, u32 dims, f64 row-major data. Bit-exact round trip.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace pitmix::models
