// cli_test.cpp - end-to-end runs of the command-line tool: generation,
// training, scoring, gradcheck gating, exit codes and resume, all through
// the real binary.

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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "pitmix/train.hpp"
#include "test_util.hpp"

using namespace pitmix;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

std::string& scratch_dir() {
  static std::string dir = testutil::fresh_dir("cli_logs");
  return dir;
}

RunResult run_tool(const std::string& args) {
  static int counter = 0;
  std::string log = scratch_dir() + "/run_" + std::to_string(counter++) + ".txt";
  std::string cmd =
      std::string(PITMIX_TOOL_PATH) + " " + args + " > " + log + " 2>&1";
  int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = testutil::read_file(log);
  return r;
}

std::string first_line(const std::string& s) {
  return s.substr(0, s.find('\n'));
}

// Small enough that a full generate/train/eval cycle takes seconds.
const char* kTinyCfg =
    "# tiny smoke profile\n"
    "preset = desk\n"
    "seed = 101\n"
    "arch = A3\n"
    "sources = 2\n"
    "speakers = 4\n"
    "mixtures = 6\n"
    "valid_mixtures = 2\n"
    "test_mixtures = 2\n"
    "num_labels = 6\n"
    "n_mels = 8\n"
    "hidden = 8\n"
    "layers = 1\n"
    "back_layers = 1\n"
    "epochs = 2\n"
    "minibatch = 3\n"
    "lr = 0.02\n"
    "min_utt_frames = 30\n"
    "max_utt_frames = 40\n"
    "min_unit_frames = 5\n"
    "max_unit_frames = 9\n";

struct CliWorld {
  std::string root, cfg, data;
  RunResult gen;
};

CliWorld& world() {
  static CliWorld w = [] {
    CliWorld v;
    v.root = testutil::fresh_dir("cli_world");
    v.cfg = v.root + "/tiny.cfg";
    std::ofstream os(v.cfg, std::ios::binary);
    os << kTinyCfg;
    os.close();
    v.data = v.root + "/data";
    v.gen = run_tool("gen-data --config " + v.cfg + " --out " + v.data);
    return v;
  }();
  return w;
}

std::string& model_dir() {
  static std::string dir = [] {
    CliWorld& w = world();
    std::string out = w.root + "/m1";
    run_tool("train --config " + w.cfg + " --data " + w.data + " --out " + out);
    return out;
  }();
  return dir;
}

void check_logs_equal_ignoring_seconds(const std::string& a,
                                       const std::string& b) {
  train::TrainLog la = train::read_train_log(a);
  train::TrainLog lb = train::read_train_log(b);
  REQUIRE(la.records.size() == lb.records.size());
  for (std::size_t i = 0; i < la.records.size(); ++i) {
    CHECK(la.records[i].epoch == lb.records[i].epoch);
    CHECK(la.records[i].phase == lb.records[i].phase);
    CHECK(la.records[i].train_loss == lb.records[i].train_loss);
    CHECK(la.records[i].valid_loss == lb.records[i].valid_loss);
    CHECK(la.records[i].perm_switch_rate == lb.records[i].perm_switch_rate);
  }
}

}  // namespace

TEST_CASE("generation reports its fingerprint and reproduces bytes") {
  CliWorld& w = world();
  REQUIRE(w.gen.code == 0);
  CHECK(w.gen.out.rfind("config fingerprint ", 0) == 0);
  CHECK(w.gen.out.find("train: 6 samples") != std::string::npos);
  CHECK(w.gen.out.find("test: 2 samples") != std::string::npos);

  std::string again = w.root + "/data_again";
  REQUIRE(run_tool("gen-data --config " + w.cfg + " --out " + again).code == 0);
  for (const char* split : {"train", "valid", "test"}) {
    CHECK(testutil::files_equal(w.data + "/" + split + ".bin",
                                again + "/" + split + ".bin"));
    CHECK(testutil::files_equal(w.data + "/" + split + ".manifest",
                                again + "/" + split + ".manifest"));
  }
}

TEST_CASE("training runs and reproduces its checkpoint") {
  CliWorld& w = world();
  REQUIRE(w.gen.code == 0);
  std::string m1 = model_dir();
  REQUIRE(testutil::read_file(m1 + "/train_log.csv").size() > 0);

  std::string m2 = w.root + "/m2";
  RunResult r = run_tool("train --config " + w.cfg + " --data " + w.data +
                         " --out " + m2);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("A3_DirectPitCE") != std::string::npos);
  CHECK(r.out.find("epoch   2") != std::string::npos);
  CHECK(testutil::files_equal(m1 + "/final.ckpt", m2 + "/final.ckpt"));
  check_logs_equal_ignoring_seconds(m1 + "/train_log.csv",
                                    m2 + "/train_log.csv");
}

TEST_CASE("a drifted config is refused at training time") {
  CliWorld& w = world();
  RunResult r = run_tool("train --config " + w.cfg + " --set seed=999 --data " +
                         w.data + " --out " + w.root + "/drift");
  CHECK(r.code == 2);
  CHECK(r.out.find("different config") != std::string::npos);
}

TEST_CASE("evaluation writes a deterministic report") {
  CliWorld& w = world();
  std::string m1 = model_dir();
  std::string r1 = w.root + "/report1.csv";
  RunResult a = run_tool("eval --ckpt " + m1 + "/final.ckpt --manifest " +
                         w.data + "/test.manifest --out " + r1);
  REQUIRE(a.code == 0);
  CHECK(a.out.find("unit_err") != std::string::npos);
  CHECK(testutil::read_file(r1).rfind("snr_db,stream_role,", 0) == 0);

  std::string r2 = w.root + "/report2.csv";
  REQUIRE(run_tool("eval --ckpt " + m1 + "/final.ckpt --manifest " + w.data +
                   "/test.manifest --out " + r2)
              .code == 0);
  CHECK(testutil::files_equal(r1, r2));
}

TEST_CASE("cross-count evaluation writes the surplus sidecar") {
  CliWorld& w = world();
  std::string cfg3 = w.root + "/wide.cfg";
  {
    std::ofstream os(cfg3, std::ios::binary);
    os << kTinyCfg << "sources = 3\nspeakers = 6\nmixtures = 4\n"
       << "valid_mixtures = 1\ntest_mixtures = 1\nepochs = 1\n";
  }
  std::string data3 = w.root + "/data3";
  REQUIRE(run_tool("gen-data --config " + cfg3 + " --out " + data3).code == 0);
  std::string m3 = w.root + "/m3";
  REQUIRE(run_tool("train --config " + cfg3 + " --data " + data3 + " --out " +
                   m3)
              .code == 0);

  RunResult r = run_tool("eval --ckpt " + m3 + "/final.ckpt --manifest " +
                         w.data + "/test.manifest --cross-count --out " +
                         w.root + "/cc.csv");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("surplus streams") != std::string::npos);
  CHECK(testutil::read_file(w.root + "/cc.surplus.csv")
            .rfind("surplus_streams,", 0) == 0);
}

TEST_CASE("gradcheck gates the tape") {
  RunResult ok = run_tool("gradcheck --seed 7 --configs 1");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("all passed") != std::string::npos);

  RunResult bad = run_tool("gradcheck --seed 7 --configs 1 --corrupt 0.5");
  CHECK(bad.code == 3);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("usage errors exit with one") {
  CliWorld& w = world();
  CHECK(run_tool("gen-data --config " + w.root + "/absent.cfg --out " +
                 w.root + "/x")
            .code == 1);
  CHECK(run_tool("gen-data --config " + w.cfg + " --set bogus=1 --out " +
                 w.root + "/x")
            .code == 1);
  CHECK(run_tool("train --config " + w.cfg + " --set epochs=banana --data " +
                 w.data + " --out " + w.root + "/x")
            .code == 1);
  CHECK(run_tool("").code == 1);
}

TEST_CASE("runtime errors exit with two") {
  CliWorld& w = world();
  CHECK(run_tool("train --config " + w.cfg + " --data " + w.root +
                 "/no_such_dir --out " + w.root + "/x")
            .code == 2);
  CHECK(run_tool("eval --ckpt " + w.root + "/absent.ckpt --manifest " +
                 w.data + "/test.manifest --out " + w.root + "/x.csv")
            .code == 2);
}

TEST_CASE("inspect prints a readable record") {
  CliWorld& w = world();
  RunResult r =
      run_tool("inspect --manifest " + w.data + "/test.manifest --index 0");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("record 0: 2 sources", 0) == 0);
  CHECK(r.out.find("speaker") != std::string::npos);
  CHECK(r.out.find("mixed features:") != std::string::npos);
}

TEST_CASE("training resumes from its checkpoints") {
  CliWorld& w = world();
  std::string fresh = w.root + "/fresh4";
  REQUIRE(run_tool("train --config " + w.cfg + " --set epochs=4 --data " +
                   w.data + " --out " + fresh)
              .code == 0);

  std::string resumed = w.root + "/resumed4";
  REQUIRE(run_tool("train --config " + w.cfg + " --data " + w.data +
                   " --out " + resumed)
              .code == 0);  // two epochs, leaves a state file behind
  REQUIRE(run_tool("train --config " + w.cfg + " --set epochs=4 --data " +
                   w.data + " --out " + resumed)
              .code == 0);

  CHECK(testutil::files_equal(fresh + "/final.ckpt", resumed + "/final.ckpt"));
  CHECK(testutil::files_equal(fresh + "/epoch_004.ckpt",
                              resumed + "/epoch_004.ckpt"));
  check_logs_equal_ignoring_seconds(fresh + "/train_log.csv",
                                    resumed + "/train_log.csv");
}

TEST_CASE("the seed environment variable sits between file and flags") {
  CliWorld& w = world();
  std::string base_line = first_line(w.gen.out);

  setenv("PITMIX_SEED", "777", 1);
  RunResult env_run =
      run_tool("gen-data --config " + w.cfg + " --out " + w.root + "/env_data");
  RunResult set_run = run_tool("gen-data --config " + w.cfg +
                               " --set seed=101 --out " + w.root + "/set_data");
  unsetenv("PITMIX_SEED");

  REQUIRE(env_run.code == 0);
  REQUIRE(set_run.code == 0);
  CHECK(first_line(env_run.out) != base_line);
  CHECK(first_line(set_run.out) == base_line);
}
