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

#include "pitmix/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace pitmix::train {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string ckpt_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03d.ckpt", epoch);
  return buf;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Rewrites atomically so an interrupt never leaves a torn file behind.
void write_text(const std::string& path, const std::string& body) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    PITMIX_CHECK(os.good(), "cannot write " + tmp);
    os << body;
    PITMIX_CHECK(os.good(), "write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  PITMIX_CHECK(cfg.minibatch_utts >= 1, "minibatch must hold at least one utterance");
  // lr 0 is allowed as the no-op optimizer (loss probing); negative is not.
  PITMIX_CHECK(cfg.lr >= 0.0 && std::isfinite(cfg.lr), "bad learning rate");
  PITMIX_CHECK(cfg.clip > 0.0, "clip threshold must be positive");
  PITMIX_CHECK(cfg.max_epochs >= 1, "need at least one epoch");
  PITMIX_CHECK(cfg.plateau_patience >= 1, "plateau patience must be positive");
  PITMIX_CHECK(cfg.lr_floor > 0.0, "learning-rate floor must be positive");
  PITMIX_CHECK(cfg.jobs >= 1, "jobs must be positive");
  PITMIX_CHECK(cfg.schedule.joint_lr_mult > 0.0 && cfg.schedule.joint_lr_mult <= 1.0,
               "joint-phase multiplier must be in (0, 1]");
}

void write_train_log(const std::string& path, const TrainLog& log) {
  std::string body = "epoch,phase,train_loss,valid_loss,perm_switch_rate,seconds\n";
  for (const EpochRecord& r : log.records) {
    body += std::to_string(r.epoch) + "," + std::to_string(r.phase) + "," +
            format_double(r.train_loss) + "," + format_double(r.valid_loss) +
            "," + format_double(r.perm_switch_rate) + "," +
            format_double(r.seconds) + "\n";
  }
  write_text(path, body);
}

TrainLog read_train_log(const std::string& path) {
  std::ifstream is(path);
  PITMIX_CHECK(is.good(), "cannot open train log: " + path);
  TrainLog log;
  std::string line;
  PITMIX_CHECK(std::getline(is, line) &&
                   line == "epoch,phase,train_loss,valid_loss,perm_switch_rate,seconds",
               "unexpected train log header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    PITMIX_CHECK(f.size() == 6, "malformed train log row: " + line);
    EpochRecord r;
    r.epoch = int(parse_long(f[0]));
    r.phase = int(parse_long(f[1]));
    r.train_loss = parse_double(f[2]);
    r.valid_loss = parse_double(f[3]);
    r.perm_switch_rate = parse_double(f[4]);
    r.seconds = parse_double(f[5]);
    log.records.push_back(r);
  }
  return log;
}

EvalStats evaluate(const models::Model& model,
                   const std::vector<corpus::MixtureSample>& samples,
                   const models::LossOptions& options, int jobs) {
  const std::size_t n = samples.size();
  std::vector<double> losses(n, 0.0);
  std::vector<std::vector<int>> perms(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    nn::Tape t;
    models::TapeForward fwd =
        model.forward_on(t, samples[i].mixed_features.frames,
                         /*requires_grad=*/false);
    models::LossResult res = model.loss(t, fwd, samples[i], options);
    losses[i] = res.value;
    if (!res.pit.empty()) perms[i] = res.pit.back().best.perm;
  });
  EvalStats out;
  out.count = n;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += losses[i];
  out.mean_loss = n == 0 ? 0.0 : sum / double(n);
  std::map<std::vector<int>, std::size_t> hist;
  for (const auto& p : perms)
    if (!p.empty()) ++hist[p];
  out.perm_counts.assign(hist.begin(), hist.end());
  return out;
}

Trainer::Trainer(models::Model model, TrainConfig cfg,
                 const std::vector<corpus::MixtureSample>& train_samples,
                 const std::vector<corpus::MixtureSample>& valid_samples)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      train_(train_samples),
      valid_(valid_samples) {
  validate(cfg_);
  PITMIX_CHECK(!train_.empty() && !valid_.empty(), "empty dataset");
  prev_perms_.resize(train_.size());
  lr_ = cfg_.lr;
  best_valid_ = kInf;
  phase_best_valid_ = kInf;
}

std::vector<Trainer::PhasePlan> Trainer::plan() const {
  const auto& params = model_.params();
  auto mask = [&](auto pred) {
    std::vector<char> m(params.size(), 0);
    for (std::size_t i = 0; i < params.size(); ++i)
      m[i] = pred(params[i].name) ? 1 : 0;
    return m;
  };
  std::vector<char> all = mask([](const std::string&) { return true; });

  if (model_.config().arch != models::Arch::kA4Joint)
    return {{0, cfg_.max_epochs, cfg_.lr, models::LossOptions::Phase::kJointCe,
             all}};

  const PhaseSchedule& s = cfg_.schedule;
  PITMIX_CHECK(s.phase1_epochs >= 1 && s.phase2_epochs >= 1 &&
                   s.phase3_epochs >= 1,
               "the progressive schedule needs at least one epoch per phase");
  auto front = [](const std::string& n) {
    return n.starts_with("enc") || n.starts_with("sep_head");
  };
  std::vector<PhasePlan> plans;
  plans.push_back({1, s.phase1_epochs, cfg_.lr,
                   models::LossOptions::Phase::kFrontMse, mask(front)});
  plans.push_back({2, s.phase2_epochs, cfg_.lr,
                   models::LossOptions::Phase::kBackCe,
                   mask([&](const std::string& n) { return !front(n); })});
  plans.push_back({3, s.phase3_epochs, cfg_.lr * s.joint_lr_mult,
                   models::LossOptions::Phase::kJointCe, all});
  return plans;
}

models::LossOptions Trainer::options_for(const PhasePlan& p) const {
  models::LossOptions opts;
  opts.mask_silence = cfg_.mask_silence;
  opts.phase = p.objective;
  return opts;
}

EpochRecord Trainer::run_epoch(int global_epoch, const PhasePlan& p) {
  auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = train_.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  Rng shuffle_rng(child_seed(cfg_.seed, fnv1a64("epoch-shuffle"),
                             std::uint64_t(global_epoch)));
  shuffle_rng.shuffle(order);

  const models::LossOptions opts = options_for(p);
  std::vector<double> losses(n, 0.0);
  std::size_t switched = 0;

  for (std::size_t start = 0; start < n;
       start += std::size_t(cfg_.minibatch_utts)) {
    const std::size_t bs = std::min(n - start, std::size_t(cfg_.minibatch_utts));
    std::vector<std::vector<Matrix>> grads(bs);
    std::vector<double> batch_loss(bs, 0.0);
    std::vector<std::vector<int>> batch_perm(bs);

    parallel_for(bs, cfg_.jobs, [&](std::size_t i) {
      const std::size_t idx = order[start + i];
      const corpus::MixtureSample& sample = train_[idx];
      nn::Tape t;
      models::TapeForward fwd = model_.forward_on(
          t, sample.mixed_features.frames, /*requires_grad=*/true,
          &p.trainable);
      models::LossResult res = model_.loss(t, fwd, sample, opts);
      PITMIX_CHECK(std::isfinite(res.value),
                   "non-finite loss at epoch " + std::to_string(global_epoch) +
                       ", sample " + std::to_string(idx) + " (" +
                       models::arch_name(model_.config().arch) + ")");
      t.backward(res.loss_var);
      batch_loss[i] = res.value;
      if (!res.pit.empty()) batch_perm[i] = res.pit.back().best.perm;
      std::vector<Matrix>& g = grads[i];
      g.reserve(fwd.param_vars.size());
      for (std::size_t k = 0; k < fwd.param_vars.size(); ++k) {
        if (t.has_grad(fwd.param_vars[k])) {
          g.push_back(t.grad(fwd.param_vars[k]));
        } else {
          const Matrix& v = model_.params()[k].value;
          g.push_back(Matrix::Zero(v.rows(), v.cols()));
        }
      }
    });

    // Sum the batch in utterance order, then clip and apply once.
    std::vector<Matrix> summed = std::move(grads[0]);
    for (std::size_t i = 1; i < bs; ++i)
      for (std::size_t k = 0; k < summed.size(); ++k)
        summed[k] += grads[i][k];
    // lr 0 skips the update but still walks the full epoch (loss probing).
    if (lr_ > 0.0)
      nn::sgd_step(model_.params(), std::move(summed), lr_, cfg_.clip,
                   cfg_.clip_mode);

    for (std::size_t i = 0; i < bs; ++i) {
      const std::size_t idx = order[start + i];
      losses[idx] = batch_loss[i];
      if (!batch_perm[i].empty()) {
        if (!prev_perms_[idx].empty() && prev_perms_[idx] != batch_perm[i])
          ++switched;
        prev_perms_[idx] = batch_perm[i];
      }
    }
  }

  double sum = 0.0;
  for (double l : losses) sum += l;
  EvalStats vstats = evaluate(model_, valid_, opts, cfg_.jobs);

  EpochRecord rec;
  rec.epoch = global_epoch;
  rec.phase = p.phase;
  rec.train_loss = sum / double(n);
  rec.valid_loss = vstats.mean_loss;
  rec.perm_switch_rate = double(switched) / double(n);
  rec.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

const TrainLog& Trainer::run(const std::string& out_dir) {
  std::vector<PhasePlan> plans = plan();
  int total = 0;
  for (const PhasePlan& p : plans) total += p.epochs;

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    load_state(out_dir, total);
  }

  for (int e = done_epochs_ + 1; e <= total; ++e) {
    const PhasePlan* p = nullptr;
    int acc = 0;
    for (const PhasePlan& cand : plans) {
      acc += cand.epochs;
      if (e <= acc) {
        p = &cand;
        break;
      }
    }
    PITMIX_CHECK(p != nullptr, "epoch outside the schedule");
    if (p->phase != current_phase_) {
      current_phase_ = p->phase;
      lr_ = p->lr;
      best_valid_ = kInf;
      bad_epochs_ = 0;
      if (p->phase == 3) {
        // The end-of-phase-2 model is the baseline the joint refinement
        // must not regress below.
        phase_best_valid_ =
            log_.records.empty() ? kInf : log_.records.back().valid_loss;
        best_params_ = model_.params();
        have_best_ = true;
      }
    }

    EpochRecord rec = run_epoch(e, *p);
    log_.records.push_back(rec);

    if (rec.valid_loss < best_valid_ - 1e-12) {
      best_valid_ = rec.valid_loss;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= cfg_.plateau_patience) {
      if (lr_ * 0.5 >= cfg_.lr_floor) lr_ *= 0.5;
      bad_epochs_ = 0;
    }
    if (p->phase == 3 && rec.valid_loss < phase_best_valid_) {
      phase_best_valid_ = rec.valid_loss;
      best_params_ = model_.params();
      have_best_ = true;
    }

    done_epochs_ = e;
    if (!out_dir.empty()) save_artifacts(out_dir, e);
  }

  if (model_.config().arch == models::Arch::kA4Joint && have_best_)
    model_.params() = best_params_;
  if (!out_dir.empty()) {
    models::save_checkpoint(join(out_dir, "final.ckpt"), model_);
    write_train_log(join(out_dir, "train_log.csv"), log_);
  }
  return log_;
}

void Trainer::save_artifacts(const std::string& out_dir, int global_epoch) {
  models::save_checkpoint(join(out_dir, ckpt_name(global_epoch)), model_);
  if (have_best_) {
    models::Model best = model_;
    best.params() = best_params_;
    models::save_checkpoint(join(out_dir, "best.ckpt"), best);
  }
  write_train_log(join(out_dir, "train_log.csv"), log_);

  std::string body = "pitmix-train-state 1\n";
  body += "seed " + std::to_string(cfg_.seed) + "\n";
  body += "done_epochs " + std::to_string(done_epochs_) + "\n";
  body += "current_phase " + std::to_string(current_phase_) + "\n";
  body += "lr " + format_double(lr_) + "\n";
  body += "best_valid " + format_double(best_valid_) + "\n";
  body += "bad_epochs " + std::to_string(bad_epochs_) + "\n";
  body += "phase_best_valid " + format_double(phase_best_valid_) + "\n";
  body += "have_best " + std::to_string(have_best_ ? 1 : 0) + "\n";
  body += "records " + std::to_string(log_.records.size()) + "\n";
  for (const EpochRecord& r : log_.records) {
    body += std::to_string(r.epoch) + " " + std::to_string(r.phase) + " " +
            format_double(r.train_loss) + " " + format_double(r.valid_loss) +
            " " + format_double(r.perm_switch_rate) + " " +
            format_double(r.seconds) + "\n";
  }
  std::size_t tracked = 0;
  for (const auto& p : prev_perms_)
    if (!p.empty()) ++tracked;
  body += "perms " + std::to_string(tracked) + "\n";
  for (std::size_t i = 0; i < prev_perms_.size(); ++i) {
    if (prev_perms_[i].empty()) continue;
    body += std::to_string(i);
    for (int v : prev_perms_[i]) body += " " + std::to_string(v);
    body += "\n";
  }
  body += "end\n";
  // The state file goes last: it is the commit point a resume trusts.
  write_text(join(out_dir, "train_state.txt"), body);
}

bool Trainer::load_state(const std::string& out_dir, int total_epochs) {
  std::ifstream is(join(out_dir, "train_state.txt"));
  if (!is.good()) return false;

  std::string tok;
  auto expect = [&](const std::string& key) {
    PITMIX_CHECK(bool(is >> tok) && tok == key,
                 "train state: expected '" + key + "'");
    PITMIX_CHECK(bool(is >> tok), "train state: missing value for " + key);
    return tok;
  };
  PITMIX_CHECK(bool(is >> tok) && tok == "pitmix-train-state",
               "not a train state file");
  PITMIX_CHECK(bool(is >> tok) && tok == "1", "unknown train state version");
  PITMIX_CHECK(std::stoull(expect("seed")) == cfg_.seed,
               "train state was written with a different seed");
  done_epochs_ = int(parse_long(expect("done_epochs")));
  PITMIX_CHECK(done_epochs_ >= 1 && done_epochs_ <= total_epochs,
               "train state epoch count out of range");
  current_phase_ = int(parse_long(expect("current_phase")));
  lr_ = parse_double(expect("lr"));
  best_valid_ = parse_double(expect("best_valid"));
  bad_epochs_ = int(parse_long(expect("bad_epochs")));
  phase_best_valid_ = parse_double(expect("phase_best_valid"));
  have_best_ = parse_long(expect("have_best")) != 0;

  std::size_t n_records = std::size_t(parse_long(expect("records")));
  log_.records.clear();
  for (std::size_t i = 0; i < n_records; ++i) {
    EpochRecord r;
    std::string a, b, c, d, f, g;
    PITMIX_CHECK(bool(is >> a >> b >> c >> d >> f >> g),
                 "train state: truncated record table");
    r.epoch = int(parse_long(a));
    r.phase = int(parse_long(b));
    r.train_loss = parse_double(c);
    r.valid_loss = parse_double(d);
    r.perm_switch_rate = parse_double(f);
    r.seconds = parse_double(g);
    log_.records.push_back(r);
  }

  std::size_t n_perms = std::size_t(parse_long(expect("perms")));
  const int streams = model_.config().num_streams;
  prev_perms_.assign(train_.size(), {});
  for (std::size_t i = 0; i < n_perms; ++i) {
    PITMIX_CHECK(bool(is >> tok), "train state: truncated perm table");
    std::size_t idx = std::size_t(parse_long(tok));
    PITMIX_CHECK(idx < train_.size(), "train state: perm index out of range");
    std::vector<int> perm(std::size_t(streams), 0);
    for (int s = 0; s < streams; ++s) {
      PITMIX_CHECK(bool(is >> tok), "train state: truncated perm entry");
      perm[std::size_t(s)] = int(parse_long(tok));
    }
    prev_perms_[idx] = std::move(perm);
  }
  PITMIX_CHECK(bool(is >> tok) && tok == "end", "train state: missing trailer");

  model_ = models::load_checkpoint(join(out_dir, ckpt_name(done_epochs_)));
  if (have_best_) {
    models::Model best = models::load_checkpoint(join(out_dir, "best.ckpt"));
    best_params_ = best.params();
  }
  return true;
}

}  // namespace pitmix::train
