// corpus.hpp - synthetic multi-speaker corpus: per-speaker unit signatures,
// utterance rendering, SNR-controlled mixing, dataset files and manifests.

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
#include <iosfwd>
#include <string>
#include <vector>

#include "pitmix/common.hpp"
#include "pitmix/dsp.hpp"

namespace pitmix::corpus {

// How one speaker renders one label: a small set of partials plus noise.
// Partial frequencies blend a label-wide band layout (shared across
// speakers so labels stay identifiable) with speaker traits (f0, a spectral
// warp and tilt) so speakers stay distinct.
struct UnitSignature {
  std::vector<double> partial_hz;
  std::vector<double> partial_amp;
  std::vector<double> partial_phase;
  double noise_amp = 0.0;  // absolute amplitude of additive uniform noise
};

struct SpeakerProfile {
  int speaker_id = -1;
  int gender_tag = 0;  // 0 = A, 1 = B
  double f0_hz = 0.0;
  std::vector<UnitSignature> unit_signatures;  // one per label; [0] silence
};

// Label 0 is the silence label throughout.
constexpr int kSilenceLabel = 0;

// Deterministic profile for (corpus seed, speaker id). gender_tag is
// (id >> 1) & 1 so each id parity contains both genders.
SpeakerProfile make_speaker(int speaker_id, int num_labels,
                            std::uint64_t corpus_seed);

struct ScriptEntry {
  int label = 0;
  int frames = 0;
};

struct Utterance {
  dsp::Waveform waveform;
  std::vector<int> labels;  // one label per feature frame
  int speaker_id = -1;
};

// Renders a script to a waveform whose length yields exactly the scripted
// frame count under cfg. Additive noise comes from rng_seed.
Utterance synth_utterance(const SpeakerProfile& profile,
                          const std::vector<ScriptEntry>& script,
                          std::uint64_t rng_seed,
                          const dsp::FeatureConfig& cfg);

struct MixtureSample {
  dsp::FeatureSequence mixed_features;                // CMVN applied
  std::vector<dsp::FeatureSequence> source_features;  // raw reference streams
  std::vector<std::vector<int>> source_labels;        // silence-padded to T
  double snr_db = 0.0;  // first interferer's target SNR
  std::vector<int> speaker_ids;
  std::vector<double> gains;  // one per source; the reference gets 1.0
  int num_labels = 0;

  Index frames() const { return mixed_features.num_frames(); }
  int sources() const { return int(source_features.size()); }
};

// Pads labels to `frames` with the silence label, split front/back with the
// front taking the odd extra frame.
std::vector<int> pad_labels(const std::vector<int>& labels, Index frames);

// Mixes sources at the given per-interferer SNRs. sources[0] is the SNR
// reference ("High E"). All sources are noise-padded to the longest length;
// the overlap precondition (shortest >= half the longest, in frames) and
// distinct speakers are enforced.
MixtureSample make_mixture(const std::vector<Utterance>& sources,
                           const std::vector<double>& interferer_snr_db,
                           std::uint64_t rng_seed, const dsp::StftPlan& plan,
                           int num_labels);

// A one-source sample: CMVN features of the clean waveform plus its label
// stream. Backs the single-speaker recognition corpus.
MixtureSample single_sample(const Utterance& source, const dsp::StftPlan& plan,
                            int num_labels);

enum class Split { kTrain, kValid, kTest };

std::string split_name(Split s);

struct DatasetConfig {
  int num_speakers = 20;
  int num_mixtures = 400;  // train split; valid/test have their own counts
  int num_valid_mixtures = 80;
  int num_test_mixtures = 100;
  int num_sources = 2;
  std::vector<double> snr_grid_db = {0.0, 5.0, 10.0, 15.0, 20.0};
  int num_labels = 21;  // including silence
  int min_utt_frames = 100;
  int max_utt_frames = 200;
  int min_unit_frames = 8;
  int max_unit_frames = 20;
  std::uint64_t seed = 1234;
  dsp::FeatureConfig features;
};

void validate(const DatasetConfig& cfg);

// Canonical serialization of every generation-relevant field; its FNV-1a
// digest is the manifest fingerprint.
std::string serialize_config(const DatasetConfig& cfg);
std::string dataset_fingerprint(const DatasetConfig& cfg);

// Speakers participating in a split: even ids for train/valid, odd for
// test. Valid draws different utterances from the same speakers.
std::vector<int> speaker_pool(const DatasetConfig& cfg, Split split);

struct ManifestRecord {
  std::string file;
  std::uint64_t offset = 0;
  int num_sources = 0;
  int frames = 0;
  double snr_db = 0.0;
  std::vector<int> speaker_ids;
};

struct DatasetManifest {
  std::string fingerprint;
  std::vector<ManifestRecord> records;
};

// Binary sample record, little-endian, magic "PITMIX1\0".
void write_sample(std::ostream& os, const MixtureSample& sample);
MixtureSample read_sample(std::istream& is);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

// Generates one split into out_dir as <split>.bin + <split>.manifest.
// Sample i is a pure function of (cfg, split, i), so the written bytes do
// not depend on jobs.
DatasetManifest generate_dataset(const DatasetConfig& cfg, Split split,
                                 const std::string& out_dir, int jobs = 1);

// Loads every record of a manifest, resolving file names against the
// manifest's directory.
std::vector<MixtureSample> load_dataset(const std::string& manifest_path);

}  // namespace pitmix::corpus
