// dsp.hpp - waveform mixing at target SNR, padding, and the log mel
// filterbank front end with per-utterance CMVN.

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
#include <utility>
#include <vector>

#include "pitmix/common.hpp"

namespace pitmix::dsp {

// A single-channel waveform. Samples are dimensionless amplitudes with
// nominal range [-1, 1].
struct Waveform {
  Vector samples;
  int sample_rate = 16000;

  Index size() const { return samples.size(); }
};

// T x D matrix of log filterbank frames (rows are frames).
struct FeatureSequence {
  Matrix frames;
  double frame_hop = 0.010;  // seconds
  bool normalized = false;   // CMVN applied

  Index num_frames() const { return frames.rows(); }
  Index dim() const { return frames.cols(); }
};

struct MixSpec {
  double target_snr_db = 0.0;
  int num_sources = 2;
  double pad_noise_amplitude = 1e-4;
};

// Front-end configuration. n_fft == 0 selects the next power of two that
// holds one analysis window.
struct FeatureConfig {
  double frame_len = 0.025;  // seconds
  double frame_hop = 0.010;  // seconds
  int n_fft = 0;
  int n_mels = 40;
  double floor = 1e-10;
  int sample_rate = 16000;
  double pad_noise_amplitude = 1e-4;

  int frame_len_samples() const;
  int hop_samples() const;
  int fft_size() const;
};

void validate(const Waveform& w);
void validate(const FeatureSequence& f);
void validate(const FeatureConfig& cfg);

// Mean squared amplitude over the full utterance.
double energy(const Waveform& w);

// 10*log10(energy(a) / energy(b)).
double measured_snr_db(const Waveform& a, const Waveform& b);

// Scale each interferer so its energy sits target_snr_db below the target,
// then sum everything. Returns the mixture and the per-interferer gains.
std::pair<Waveform, std::vector<double>> mix_at_snr(
    const Waveform& target, const std::vector<Waveform>& interferers,
    const MixSpec& spec);

// Per-interferer target SNRs, one entry per interferer.
std::pair<Waveform, std::vector<double>> mix_at_snr(
    const Waveform& target, const std::vector<Waveform>& interferers,
    const std::vector<double>& snr_db);

// Extend w to `length` samples with uniform noise in [-amp, +amp]; the
// deficit is split front/back with the front taking the odd extra sample.
Waveform pad_to_length(const Waveform& w, Index length, double noise_amplitude,
                       std::uint64_t rng_seed);

// Precomputed windowed-DFT and mel matrices for one FeatureConfig. The
// window is folded into the cos/sin matrices so one GEMM per utterance
// produces each spectrum half.
class StftPlan {
 public:
  explicit StftPlan(const FeatureConfig& cfg);

  const FeatureConfig& config() const { return cfg_; }
  // Center frequency (Hz) of each mel filter.
  const std::vector<double>& mel_centers_hz() const { return mel_centers_; }

  // T x n_mels log mel energies; T = 1 + floor((len - frame_len)/hop).
  FeatureSequence logfbank(const Waveform& w) const;

 private:
  FeatureConfig cfg_;
  Matrix dft_cos_;  // (n_fft/2+1) x frame_len, window folded in
  Matrix dft_sin_;
  Matrix mel_;      // n_mels x (n_fft/2+1)
  std::vector<double> mel_centers_;
};

// One-shot convenience wrapper around StftPlan.
FeatureSequence logfbank(const Waveform& w, const FeatureConfig& cfg);

// Per-utterance, per-dimension zero mean and unit variance (population
// variance). Dimensions with variance below 1e-10 are mean-subtracted only.
FeatureSequence cmvn(const FeatureSequence& f);

// Triangular mel filterbank, n_mels x (n_fft/2+1); centers_hz_out optionally
// receives the filter center frequencies.
Matrix mel_filterbank(int n_mels, int n_fft, int sample_rate,
                      std::vector<double>* centers_hz_out = nullptr);

}  // namespace pitmix::dsp
