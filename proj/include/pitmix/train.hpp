// train.hpp - minibatch training loops: per-batch summed gradients with a
// single clip and update, plateau learning-rate halving, the three-phase
// progressive schedule for the joint architecture, CSV logs, and resumable
// checkpointing.

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
#include <utility>
#include <vector>

#include "pitmix/corpus.hpp"
#include "pitmix/models.hpp"

namespace pitmix::train {

// Progressive schedule for the joint architecture: front end under the
// separation objective, then the recognition stack with the front end
// frozen, then everything at a reduced rate.
struct PhaseSchedule {
  int phase1_epochs = 10;
  int phase2_epochs = 10;
  int phase3_epochs = 10;
  double joint_lr_mult = 0.1;  // phase-3 lr = lr * mult
};

struct TrainConfig {
  int minibatch_utts = 8;
  double lr = 1e-2;
  double clip = 0.1;
  nn::ClipMode clip_mode = nn::ClipMode::kElement;
  int max_epochs = 50;  // single-phase architectures
  std::uint64_t seed = 1234;
  int plateau_patience = 3;  // epochs without validation gain before halving
  double lr_floor = 1e-5;    // halving stops here
  bool mask_silence = false;
  int jobs = 1;
  PhaseSchedule schedule;
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;  // 1-based, global across phases
  int phase = 0;  // 0 for single-phase runs, else 1..3
  double train_loss = 0.0;
  double valid_loss = 0.0;
  // Fraction of training utterances whose best assignment changed since the
  // previous epoch; 0 on the first epoch (nothing to compare against).
  double perm_switch_rate = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

// CSV with header epoch,phase,train_loss,valid_loss,perm_switch_rate,seconds.
void write_train_log(const std::string& path, const TrainLog& log);
TrainLog read_train_log(const std::string& path);

struct EvalStats {
  double mean_loss = 0.0;
  std::size_t count = 0;
  // Best-assignment histogram over the loss-driving objective, sorted by
  // permutation. Empty for the fixed-assignment architecture.
  std::vector<std::pair<std::vector<int>, std::size_t>> perm_counts;
};

// Mean per-utterance loss plus assignment stats. Pure: no model mutation,
// deterministic summation in sample order regardless of jobs.
EvalStats evaluate(const models::Model& model,
                   const std::vector<corpus::MixtureSample>& samples,
                   const models::LossOptions& options = {}, int jobs = 1);

class Trainer {
 public:
  // The trainer owns a copy of the model; the sample vectors are
  // referenced and must outlive it.
  Trainer(models::Model model, TrainConfig cfg,
          const std::vector<corpus::MixtureSample>& train_samples,
          const std::vector<corpus::MixtureSample>& valid_samples);

  // Runs the architecture-appropriate schedule: one phase for A1/A2/A3,
  // the three-phase plan for A4 (with the best-validation parameters
  // restored at the end of phase 3). A non-empty out_dir gets per-epoch
  // checkpoints epoch_NNN.ckpt, final.ckpt, train_log.csv and a
  // train_state.txt resume file; when the state file already exists the
  // run resumes after the last completed epoch and reproduces the
  // uninterrupted log.
  const TrainLog& run(const std::string& out_dir = std::string());

  const models::Model& model() const { return model_; }
  const TrainLog& log() const { return log_; }

 private:
  struct PhasePlan {
    int phase = 0;
    int epochs = 0;
    double lr = 0.0;
    models::LossOptions::Phase objective = models::LossOptions::Phase::kJointCe;
    std::vector<char> trainable;
  };

  std::vector<PhasePlan> plan() const;
  models::LossOptions options_for(const PhasePlan& p) const;
  EpochRecord run_epoch(int global_epoch, const PhasePlan& p);
  void save_artifacts(const std::string& out_dir, int global_epoch);
  bool load_state(const std::string& out_dir, int total_epochs);

  models::Model model_;
  TrainConfig cfg_;
  const std::vector<corpus::MixtureSample>& train_;
  const std::vector<corpus::MixtureSample>& valid_;
  TrainLog log_;

  // Schedule state, persisted for resume.
  int done_epochs_ = 0;
  int current_phase_ = -1;
  double lr_ = 0.0;
  double best_valid_ = 0.0;
  int bad_epochs_ = 0;
  double phase_best_valid_ = 0.0;  // phase-3 keep-best tracking
  bool have_best_ = false;
  std::vector<nn::NamedParam> best_params_;
  std::vector<std::vector<int>> prev_perms_;
};

}  // namespace pitmix::train
