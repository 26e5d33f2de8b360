// pitmix - command-line surface: data generation, training, evaluation,
// gradient checking and record inspection.
//
// Exit codes: 0 ok, 1 usage/config error, 2 runtime failure, 3 check failure.

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pitmix/config.hpp"
#include "pitmix/eval.hpp"
#include "pitmix/gradcheck.hpp"
#include "pitmix/train.hpp"

namespace fs = std::filesystem;
using namespace pitmix;

namespace {

constexpr int kOk = 0, kUsage = 1, kRuntime = 2, kCheckFail = 3;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  int jobs = 0;  // 0: keep the config value
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "key = value config file");
  cmd->add_option("--set", opts->sets,
                  "config override key=value (repeatable, wins over file/env)");
  cmd->add_option("--jobs", opts->jobs, "worker thread cap");
}

// Config resolution failures are usage errors; anything after is runtime.
config::ToolkitConfig resolve_or_exit(const CommonOpts& opts) {
  try {
    config::ToolkitConfig cfg = config::resolve(opts.config_path, opts.sets);
    if (opts.jobs > 0) cfg.trainer.jobs = opts.jobs;
    return cfg;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    std::exit(kUsage);
  }
}

std::string manifest_path(const std::string& dir, corpus::Split split) {
  return (fs::path(dir) / (corpus::split_name(split) + ".manifest")).string();
}

void check_fingerprint(const corpus::DatasetManifest& manifest,
                       const config::ToolkitConfig& cfg,
                       const std::string& what) {
  std::string want = corpus::dataset_fingerprint(cfg.data);
  PITMIX_CHECK(manifest.fingerprint == want,
               what + " was generated with a different config (fingerprint " +
                   manifest.fingerprint + ", config wants " + want + ")");
}

int cmd_gen_data(const CommonOpts& opts, const std::string& out_dir) {
  config::ToolkitConfig cfg = resolve_or_exit(opts);
  try {
    corpus::validate(cfg.data);
    dsp::validate(cfg.data.features);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  }
  try {
    int jobs = std::max(1, cfg.trainer.jobs);
    std::printf("config fingerprint %s\n",
                corpus::dataset_fingerprint(cfg.data).c_str());
    for (corpus::Split split :
         {corpus::Split::kTrain, corpus::Split::kValid, corpus::Split::kTest}) {
      corpus::DatasetManifest m =
          corpus::generate_dataset(cfg.data, split, out_dir, jobs);

      std::map<double, int> per_snr;
      for (const auto& r : m.records) ++per_snr[r.snr_db];
      double overlap_sum = 0.0;
      std::size_t overlap_n = 0;
      auto samples =
          corpus::load_dataset(manifest_path(out_dir, split));
      for (const auto& s : samples) {
        if (s.sources() < 2) continue;
        long shortest = -1, longest = -1;
        for (const auto& labels : s.source_labels) {
          long speech = 0;
          for (int l : labels)
            if (l != corpus::kSilenceLabel) ++speech;
          if (shortest < 0 || speech < shortest) shortest = speech;
          if (speech > longest) longest = speech;
        }
        if (longest > 0) {
          overlap_sum += double(shortest) / double(longest);
          ++overlap_n;
        }
      }

      std::printf("%s: %zu samples", corpus::split_name(split).c_str(),
                  m.records.size());
      for (const auto& [snr, count] : per_snr)
        std::printf("  %gdB:%d", snr, count);
      if (overlap_n > 0)
        std::printf("  mean overlap %.3f", overlap_sum / double(overlap_n));
      std::printf("\n");
    }
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "gen-data failed: " << e.what() << "\n";
    return kRuntime;
  }
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir,
              const std::string& out_dir) {
  config::ToolkitConfig cfg = resolve_or_exit(opts);
  try {
    config::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  }
  try {
    std::string train_path = manifest_path(data_dir, corpus::Split::kTrain);
    std::string valid_path = manifest_path(data_dir, corpus::Split::kValid);
    check_fingerprint(corpus::read_manifest(train_path), cfg, train_path);
    check_fingerprint(corpus::read_manifest(valid_path), cfg, valid_path);
    auto train_samples = corpus::load_dataset(train_path);
    auto valid_samples = corpus::load_dataset(valid_path);

    models::Model model(cfg.arch,
                        models::init_seed(cfg.data.seed, cfg.arch.arch));
    std::printf("%s: %zu parameters, %zu train / %zu valid utterances\n",
                models::arch_name(cfg.arch.arch).c_str(), model.param_count(),
                train_samples.size(), valid_samples.size());

    train::Trainer trainer(std::move(model), cfg.trainer, train_samples,
                           valid_samples);
    const train::TrainLog& log = trainer.run(out_dir);
    for (const auto& r : log.records)
      std::printf(
          "epoch %3d phase %d  train %.6f  valid %.6f  switch %.3f  %.1fs\n",
          r.epoch, r.phase, r.train_loss, r.valid_loss, r.perm_switch_rate,
          r.seconds);
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "train failed: " << e.what() << "\n";
    return kRuntime;
  }
}

int cmd_eval(const std::string& ckpt, const std::string& manifest,
             const std::string& out, const std::string& recognizer_ckpt,
             bool cross_count, int jobs) {
  try {
    models::Model model = models::load_checkpoint(ckpt);
    auto samples = corpus::load_dataset(manifest);
    eval::ScoreReport report;
    if (cross_count) {
      report = eval::cross_count_eval(model, samples, jobs);
    } else if (!recognizer_ckpt.empty()) {
      models::Model rec = models::load_checkpoint(recognizer_ckpt);
      report = eval::score_pipeline(model, rec, samples, jobs);
    } else {
      report = eval::score_dataset(model, samples, jobs);
    }
    eval::write_report(out, report);
    if (cross_count) {
      std::string base = out;
      if (base.size() > 4 && base.ends_with(".csv"))
        base.resize(base.size() - 4);
      eval::write_surplus(base + ".surplus.csv", report);
      std::printf("surplus streams %zu, mean decoded length %.3f\n",
                  report.surplus_streams, report.mean_surplus_len);
    }
    eval::ConditionStats all = report.overall();
    std::printf("scored %zu rows: unit_err %.4f frame_err %.4f\n",
                report.rows.size(), all.unit_err(), all.frame_err());
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return kRuntime;
  }
}

int cmd_gradcheck(std::uint64_t seed, int configs, double corrupt) {
  try {
    auto reports = nn::gradcheck_suite(seed, configs, corrupt);
    bool all_ok = true;
    for (const auto& r : reports) {
      std::printf("%-24s max_rel_err %.3e  %s\n", r.name.c_str(),
                  r.max_rel_err, r.pass ? "ok" : "FAIL");
      all_ok = all_ok && r.pass;
    }
    std::printf("%zu ops checked: %s\n", reports.size(),
                all_ok ? "all passed" : "FAILURES");
    return all_ok ? kOk : kCheckFail;
  } catch (const std::exception& e) {
    std::cerr << "gradcheck failed: " << e.what() << "\n";
    return kRuntime;
  }
}

int cmd_inspect(const std::string& manifest, int index) {
  try {
    corpus::DatasetManifest m = corpus::read_manifest(manifest);
    PITMIX_CHECK(index >= 0 && std::size_t(index) < m.records.size(),
                 "record index out of range");
    const corpus::ManifestRecord& rec = m.records[std::size_t(index)];
    fs::path file = fs::path(manifest).parent_path() / rec.file;
    std::ifstream is(file, std::ios::binary);
    PITMIX_CHECK(is.good(), "cannot open " + file.string());
    is.seekg(std::streamoff(rec.offset));
    corpus::MixtureSample s = corpus::read_sample(is);

    std::printf("record %d: %d sources, %ld frames x %ld dims, snr %g dB\n",
                index, s.sources(), long(s.frames()),
                long(s.mixed_features.dim()), s.snr_db);
    for (int src = 0; src < s.sources(); ++src) {
      std::printf("  source %d: speaker %d gain %.4f labels:", src,
                  s.speaker_ids[std::size_t(src)], s.gains[std::size_t(src)]);
      int prev = -1;
      for (int l : s.source_labels[std::size_t(src)]) {
        if (l != prev && l != corpus::kSilenceLabel) std::printf(" %d", l);
        prev = l;
      }
      std::printf("\n");
    }
    const Matrix& f = s.mixed_features.frames;
    std::printf("  mixed features: min %.3f max %.3f mean %.3f\n",
                f.minCoeff(), f.maxCoeff(), f.mean());
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "inspect failed: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pitmix: permutation invariant training toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_opts;
  std::string gen_out = "data";
  CLI::App* gen = app.add_subcommand("gen-data",
                                     "generate train/valid/test splits");
  add_common(gen, &gen_opts);
  gen->add_option("--out", gen_out, "output directory");

  CommonOpts train_opts;
  std::string train_data = "data", train_out = "run";
  CLI::App* tr = app.add_subcommand("train", "train one architecture");
  add_common(tr, &train_opts);
  tr->add_option("--data", train_data, "directory with generated manifests");
  tr->add_option("--out", train_out, "checkpoint/log directory");

  std::string eval_ckpt, eval_manifest, eval_out = "report.csv";
  std::string eval_recognizer;
  bool eval_cross = false;
  int eval_jobs = 1;
  CLI::App* ev = app.add_subcommand("eval", "score a checkpoint");
  ev->add_option("--ckpt", eval_ckpt, "model checkpoint")->required();
  ev->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  ev->add_option("--out", eval_out, "report CSV path");
  ev->add_option("--recognizer", eval_recognizer,
                 "single-stream recognizer checkpoint (pipeline scoring of a "
                 "separation model)");
  ev->add_flag("--cross-count", eval_cross,
               "model has more streams than the mixtures have speakers");
  ev->add_option("--jobs", eval_jobs, "worker thread cap");

  std::uint64_t gc_seed = 1234;
  int gc_configs = 5;
  double gc_corrupt = 0.0;
  CLI::App* gc = app.add_subcommand("gradcheck",
                                    "finite-difference gradient checks");
  gc->add_option("--seed", gc_seed, "suite seed");
  gc->add_option("--configs", gc_configs, "configurations per op");
  gc->add_option("--corrupt", gc_corrupt,
                 "perturb one analytic entry (negative control)");

  std::string ins_manifest;
  int ins_index = 0;
  CLI::App* ins = app.add_subcommand("inspect", "dump one sample record");
  ins->add_option("--manifest", ins_manifest, "dataset manifest")->required();
  ins->add_option("--index", ins_index, "record index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (gen->parsed()) return cmd_gen_data(gen_opts, gen_out);
  if (tr->parsed()) return cmd_train(train_opts, train_data, train_out);
  if (ev->parsed())
    return cmd_eval(eval_ckpt, eval_manifest, eval_out, eval_recognizer,
                    eval_cross, eval_jobs);
  if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_configs, gc_corrupt);
  if (ins->parsed()) return cmd_inspect(ins_manifest, ins_index);
  return kUsage;
}
