// corpus_test.cpp - speaker synthesis, mixing into samples, dataset
// generation, and the binary sample/manifest round trips.

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

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <vector>

#include "pitmix/corpus.hpp"
#include "pitmix/dsp.hpp"
#include "test_util.hpp"

using namespace pitmix;

namespace {

const int kLabels = 6;

dsp::FeatureConfig fcfg() { return testutil::tiny_features(); }

std::vector<corpus::ScriptEntry> script_of_frames(Rng& rng, int frames) {
  std::vector<corpus::ScriptEntry> script;
  int left = frames;
  while (left > 0) {
    int len = std::min(left, rng.uniform_int(5, 9));
    script.push_back({rng.uniform_int(1, kLabels - 1), len});
    left -= len;
  }
  return script;
}

corpus::Utterance utt_of_frames(int speaker, int frames, std::uint64_t seed) {
  Rng rng(seed);
  corpus::SpeakerProfile p = corpus::make_speaker(speaker, kLabels, 77);
  return corpus::synth_utterance(p, script_of_frames(rng, frames), seed,
                                 fcfg());
}

corpus::DatasetConfig small_ds(std::uint64_t seed, int sources = 2) {
  corpus::DatasetConfig cfg;
  cfg.num_speakers = 6;
  cfg.num_mixtures = 10;
  cfg.num_valid_mixtures = 4;
  cfg.num_test_mixtures = 4;
  cfg.num_sources = sources;
  cfg.num_labels = kLabels;
  cfg.min_utt_frames = 30;
  cfg.max_utt_frames = 40;
  cfg.min_unit_frames = 5;
  cfg.max_unit_frames = 9;
  cfg.seed = seed;
  cfg.features = fcfg();
  return cfg;
}

std::multiset<int> voiced(const std::vector<int>& labels) {
  std::multiset<int> out;
  for (int l : labels)
    if (l != corpus::kSilenceLabel) out.insert(l);
  return out;
}

}  // namespace

TEST_CASE("speaker profiles are deterministic and distinct") {
  corpus::SpeakerProfile a = corpus::make_speaker(3, kLabels, 42);
  corpus::SpeakerProfile b = corpus::make_speaker(3, kLabels, 42);
  REQUIRE(a.unit_signatures.size() == kLabels);
  CHECK(a.f0_hz == b.f0_hz);
  CHECK(a.unit_signatures[1].partial_hz == b.unit_signatures[1].partial_hz);
  CHECK(a.unit_signatures[1].partial_phase ==
        b.unit_signatures[1].partial_phase);

  corpus::SpeakerProfile c = corpus::make_speaker(4, kLabels, 42);
  CHECK(c.f0_hz != a.f0_hz);
  CHECK(c.unit_signatures[1].partial_hz != a.unit_signatures[1].partial_hz);
}

TEST_CASE("a silence script renders near-silence") {
  corpus::SpeakerProfile p = corpus::make_speaker(0, kLabels, 42);
  corpus::Utterance sil =
      corpus::synth_utterance(p, {{corpus::kSilenceLabel, 20}}, 5, fcfg());
  CHECK(dsp::energy(sil.waveform) < 1e-6);

  corpus::Utterance speech = corpus::synth_utterance(p, {{2, 20}}, 5, fcfg());
  CHECK(dsp::energy(speech.waveform) > 1e-3);
}

TEST_CASE("utterance synthesis is deterministic and frame-exact") {
  corpus::SpeakerProfile p = corpus::make_speaker(1, kLabels, 42);
  std::vector<corpus::ScriptEntry> script = {{1, 9}, {3, 12}, {2, 7}};
  corpus::Utterance a = corpus::synth_utterance(p, script, 9, fcfg());
  corpus::Utterance b = corpus::synth_utterance(p, script, 9, fcfg());
  CHECK((a.waveform.samples - b.waveform.samples).cwiseAbs().maxCoeff() ==
        0.0);

  REQUIRE(a.labels.size() == 28);
  CHECK(a.labels[0] == 1);
  CHECK(a.labels[8] == 1);
  CHECK(a.labels[9] == 3);
  CHECK(a.labels[27] == 2);
  // The waveform length must yield exactly the scripted frame count.
  CHECK(dsp::logfbank(a.waveform, fcfg()).num_frames() == 28);

  corpus::Utterance c = corpus::synth_utterance(p, script, 10, fcfg());
  CHECK((a.waveform.samples - c.waveform.samples).cwiseAbs().maxCoeff() >
        0.0);
}

TEST_CASE("different speakers place their energy differently") {
  std::vector<corpus::ScriptEntry> script = {{1, 15}, {2, 15}};
  corpus::Utterance a = corpus::synth_utterance(
      corpus::make_speaker(0, kLabels, 42), script, 3, fcfg());
  corpus::Utterance b = corpus::synth_utterance(
      corpus::make_speaker(5, kLabels, 42), script, 3, fcfg());
  Eigen::RowVectorXd ma =
      dsp::logfbank(a.waveform, fcfg()).frames.colwise().mean();
  Eigen::RowVectorXd mb =
      dsp::logfbank(b.waveform, fcfg()).frames.colwise().mean();
  CHECK((ma - mb).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("label padding splits front-heavy") {
  std::vector<int> two = {1, 2};
  CHECK(corpus::pad_labels(two, 7) ==
        std::vector<int>{0, 0, 0, 1, 2, 0, 0});
  CHECK(corpus::pad_labels(two, 2) == two);
  CHECK(corpus::pad_labels(two, 4) == std::vector<int>{0, 1, 2, 0});
}

TEST_CASE("mixing pads the shorter stream with centered silence") {
  corpus::Utterance a = utt_of_frames(0, 40, 11);
  corpus::Utterance b = utt_of_frames(1, 34, 12);
  dsp::StftPlan plan(fcfg());
  corpus::MixtureSample s =
      corpus::make_mixture({a, b}, {5.0}, 123, plan, kLabels);

  REQUIRE(s.frames() == 40);
  REQUIRE(s.sources() == 2);
  CHECK(s.source_labels[0] == a.labels);
  // Deficit 6: three silence frames each side around the original labels.
  const auto& padded = s.source_labels[1];
  for (int i = 0; i < 3; ++i) {
    CHECK(padded[std::size_t(i)] == corpus::kSilenceLabel);
    CHECK(padded[padded.size() - 1 - std::size_t(i)] ==
          corpus::kSilenceLabel);
  }
  for (std::size_t i = 0; i < b.labels.size(); ++i)
    CHECK(padded[i + 3] == b.labels[i]);

  CHECK(voiced(padded) == voiced(b.labels));
  CHECK(s.snr_db == 5.0);
  CHECK(s.gains[0] == 1.0);
  CHECK(s.mixed_features.normalized);
  CHECK_FALSE(s.source_features[1].normalized);
  CHECK(s.mixed_features.dim() == fcfg().n_mels);

  // Odd deficit: the front takes the extra frame.
  corpus::Utterance c = utt_of_frames(1, 33, 13);
  corpus::MixtureSample s2 =
      corpus::make_mixture({a, c}, {5.0}, 123, plan, kLabels);
  const auto& p2 = s2.source_labels[1];
  CHECK(p2[3] == corpus::kSilenceLabel);
  CHECK(p2[4] != corpus::kSilenceLabel);
  CHECK(p2[p2.size() - 3] == corpus::kSilenceLabel);
  CHECK(p2[p2.size() - 4] != corpus::kSilenceLabel);
}

TEST_CASE("mixing rejects collisions and weak overlap") {
  dsp::StftPlan plan(fcfg());
  corpus::Utterance a = utt_of_frames(0, 40, 21);
  corpus::Utterance same_speaker = utt_of_frames(0, 38, 22);
  CHECK_THROWS_AS(
      corpus::make_mixture({a, same_speaker}, {0.0}, 1, plan, kLabels),
      Error);

  corpus::Utterance tiny = utt_of_frames(1, 19, 23);  // under half of 40
  CHECK_THROWS_AS(corpus::make_mixture({a, tiny}, {0.0}, 1, plan, kLabels),
                  Error);

  corpus::Utterance b = utt_of_frames(1, 36, 24);
  CHECK_THROWS_AS(corpus::make_mixture({a, b}, {0.0, 5.0}, 1, plan, kLabels),
                  Error);
}

TEST_CASE("equal-length three-talker mixing is measurably equal energy") {
  // Equal lengths mean no padding, so the stored gains and the raw
  // waveforms fully determine the pairwise energy ratios.
  corpus::Utterance a = utt_of_frames(0, 36, 31);
  corpus::Utterance b = utt_of_frames(1, 36, 32);
  corpus::Utterance c = utt_of_frames(2, 36, 33);
  dsp::StftPlan plan(fcfg());
  corpus::MixtureSample s =
      corpus::make_mixture({a, b, c}, {0.0, 0.0}, 9, plan, kLabels);

  REQUIRE(s.gains.size() == 3);
  const double e0 = dsp::energy(a.waveform);
  const double e1 = s.gains[1] * s.gains[1] * dsp::energy(b.waveform);
  const double e2 = s.gains[2] * s.gains[2] * dsp::energy(c.waveform);
  CHECK(std::abs(10.0 * std::log10(e0 / e1)) < 1e-6);
  CHECK(std::abs(10.0 * std::log10(e0 / e2)) < 1e-6);
  CHECK(std::abs(10.0 * std::log10(e1 / e2)) < 1e-6);
  CHECK(s.snr_db == 0.0);
}

TEST_CASE("single-talker samples carry the clean stream") {
  corpus::Utterance a = utt_of_frames(2, 32, 41);
  dsp::StftPlan plan(fcfg());
  corpus::MixtureSample s = corpus::single_sample(a, plan, kLabels);
  CHECK(s.sources() == 1);
  CHECK(s.frames() == 32);
  CHECK(s.source_labels[0] == a.labels);
  CHECK(s.mixed_features.normalized);
  CHECK(s.gains[0] == 1.0);
}

TEST_CASE("sample serialization round-trips") {
  corpus::Utterance a = utt_of_frames(0, 36, 51);
  corpus::Utterance b = utt_of_frames(1, 30, 52);
  dsp::StftPlan plan(fcfg());
  corpus::MixtureSample s =
      corpus::make_mixture({a, b}, {10.0}, 7, plan, kLabels);

  std::ostringstream os1(std::ios::binary);
  corpus::write_sample(os1, s);
  std::istringstream is1(os1.str(), std::ios::binary);
  corpus::MixtureSample r = corpus::read_sample(is1);

  CHECK(r.sources() == s.sources());
  CHECK(r.frames() == s.frames());
  CHECK(r.source_labels == s.source_labels);
  CHECK(r.speaker_ids == s.speaker_ids);
  CHECK(r.num_labels == s.num_labels);
  CHECK(r.snr_db == doctest::Approx(s.snr_db).epsilon(1e-6));
  CHECK((r.mixed_features.frames - s.mixed_features.frames)
            .cwiseAbs()
            .maxCoeff() < 1e-5);

  // Stored form is the fixed point: a second pass is bit-identical.
  std::ostringstream os2(std::ios::binary);
  corpus::write_sample(os2, r);
  std::istringstream is2(os2.str(), std::ios::binary);
  corpus::MixtureSample r2 = corpus::read_sample(is2);
  std::ostringstream os3(std::ios::binary);
  corpus::write_sample(os3, r2);
  CHECK(os2.str() == os3.str());

  std::string bad = os1.str();
  bad[0] = 'X';
  std::istringstream isb(bad, std::ios::binary);
  CHECK_THROWS_AS(corpus::read_sample(isb), Error);
}

TEST_CASE("dataset generation stratifies the SNR grid") {
  corpus::DatasetConfig cfg = small_ds(1001);
  std::string dir = testutil::fresh_dir("corpus_strat");
  corpus::DatasetManifest m =
      corpus::generate_dataset(cfg, corpus::Split::kTrain, dir);
  REQUIRE(m.records.size() == 10);

  std::map<double, int> by_snr;
  for (const auto& r : m.records) by_snr[r.snr_db]++;
  REQUIRE(by_snr.size() == cfg.snr_grid_db.size());
  for (double snr : cfg.snr_grid_db) CHECK(by_snr[snr] == 2);
}

TEST_CASE("splits use disjoint speaker parities") {
  corpus::DatasetConfig cfg = small_ds(1002);
  std::string dir = testutil::fresh_dir("corpus_pools");
  corpus::DatasetManifest train =
      corpus::generate_dataset(cfg, corpus::Split::kTrain, dir);
  corpus::DatasetManifest test =
      corpus::generate_dataset(cfg, corpus::Split::kTest, dir);
  for (const auto& r : train.records)
    for (int id : r.speaker_ids) CHECK(id % 2 == 0);
  for (const auto& r : test.records)
    for (int id : r.speaker_ids) CHECK(id % 2 == 1);
}

TEST_CASE("generation is bit-identical across runs and job counts") {
  corpus::DatasetConfig cfg = small_ds(1003);
  std::string d1 = testutil::fresh_dir("corpus_det1");
  std::string d2 = testutil::fresh_dir("corpus_det2");
  corpus::generate_dataset(cfg, corpus::Split::kTrain, d1, 1);
  corpus::generate_dataset(cfg, corpus::Split::kTrain, d2, 3);
  CHECK(testutil::files_equal(d1 + "/train.bin", d2 + "/train.bin"));
  CHECK(testutil::files_equal(d1 + "/train.manifest", d2 + "/train.manifest"));
}

TEST_CASE("three-talker test mixtures are pinned at zero dB") {
  corpus::DatasetConfig cfg = small_ds(1004, 3);
  std::string dir = testutil::fresh_dir("corpus_three");
  corpus::DatasetManifest m =
      corpus::generate_dataset(cfg, corpus::Split::kTest, dir);
  for (const auto& r : m.records) {
    CHECK(r.snr_db == 0.0);
    CHECK(r.num_sources == 3);
  }
}

TEST_CASE("generated mixtures keep the overlap bound") {
  corpus::DatasetConfig cfg = small_ds(1005);
  std::string dir = testutil::fresh_dir("corpus_overlap");
  corpus::generate_dataset(cfg, corpus::Split::kTrain, dir);
  auto samples = corpus::load_dataset(dir + "/train.manifest");
  REQUIRE(samples.size() == 10);
  for (const auto& s : samples) {
    Index both = 0;
    for (Index t = 0; t < s.frames(); ++t) {
      int talking = 0;
      for (const auto& stream : s.source_labels)
        if (stream[std::size_t(t)] != corpus::kSilenceLabel) ++talking;
      if (talking >= 2) ++both;
    }
    CHECK(double(both) / double(s.frames()) >= 0.5);
    CHECK(s.frames() <= cfg.max_utt_frames);
  }
}

TEST_CASE("manifests round-trip and carry the config fingerprint") {
  corpus::DatasetConfig cfg = small_ds(1006);
  std::string dir = testutil::fresh_dir("corpus_manifest");
  corpus::DatasetManifest m =
      corpus::generate_dataset(cfg, corpus::Split::kValid, dir);
  CHECK(m.fingerprint == corpus::dataset_fingerprint(cfg));
  CHECK(m.fingerprint.size() == 16);

  corpus::DatasetManifest r =
      corpus::read_manifest(dir + "/valid.manifest");
  REQUIRE(r.records.size() == m.records.size());
  CHECK(r.fingerprint == m.fingerprint);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    CHECK(r.records[i].file == m.records[i].file);
    CHECK(r.records[i].offset == m.records[i].offset);
    CHECK(r.records[i].frames == m.records[i].frames);
    CHECK(r.records[i].snr_db == m.records[i].snr_db);
    CHECK(r.records[i].speaker_ids == m.records[i].speaker_ids);
  }

  corpus::DatasetConfig other = cfg;
  other.seed += 1;
  CHECK(corpus::dataset_fingerprint(other) != m.fingerprint);
}

TEST_CASE("loaded datasets match their manifests") {
  corpus::DatasetConfig cfg = small_ds(1007);
  std::string dir = testutil::fresh_dir("corpus_load");
  corpus::DatasetManifest m =
      corpus::generate_dataset(cfg, corpus::Split::kTest, dir);
  auto samples = corpus::load_dataset(dir + "/test.manifest");
  REQUIRE(samples.size() == m.records.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].frames() == m.records[i].frames);
    CHECK(samples[i].speaker_ids == m.records[i].speaker_ids);
    CHECK(samples[i].sources() == m.records[i].num_sources);
  }
}

TEST_CASE("config validation rejects inconsistent corpora") {
  corpus::DatasetConfig cfg = small_ds(1);
  cfg.num_speakers = 3;  // below twice the source count
  CHECK_THROWS_AS(corpus::validate(cfg), Error);

  cfg = small_ds(1);
  cfg.snr_grid_db.clear();
  CHECK_THROWS_AS(corpus::validate(cfg), Error);

  cfg = small_ds(1);
  cfg.min_utt_frames = 50;  // exceeds the maximum
  CHECK_THROWS_AS(corpus::validate(cfg), Error);

  cfg = small_ds(1);
  cfg.num_labels = 1;
  CHECK_THROWS_AS(corpus::validate(cfg), Error);
}
