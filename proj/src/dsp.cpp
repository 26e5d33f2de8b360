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

#include "pitmix/dsp.hpp"

#include <cmath>

namespace pitmix::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

int FeatureConfig::frame_len_samples() const {
  return int(std::lround(frame_len * sample_rate));
}

int FeatureConfig::hop_samples() const {
  return int(std::lround(frame_hop * sample_rate));
}

int FeatureConfig::fft_size() const {
  return n_fft > 0 ? n_fft : next_pow2(frame_len_samples());
}

void validate(const FeatureConfig& cfg) {
  PITMIX_CHECK(cfg.sample_rate > 0, "sample rate must be positive");
  PITMIX_CHECK(cfg.frame_len > 0.0 && cfg.frame_hop > 0.0,
               "frame length and hop must be positive");
  PITMIX_CHECK(cfg.frame_len_samples() >= 2,
               "analysis window shorter than two samples");
  PITMIX_CHECK(cfg.hop_samples() >= 1, "hop shorter than one sample");
  PITMIX_CHECK(cfg.fft_size() >= cfg.frame_len_samples(),
               "n_fft must hold one analysis window");
  PITMIX_CHECK(cfg.n_mels >= 1, "need at least one mel band");
  PITMIX_CHECK(cfg.floor > 0.0, "filterbank floor must be positive");
  PITMIX_CHECK(cfg.pad_noise_amplitude >= 0.0,
               "pad noise amplitude must be >= 0");
}

void validate(const Waveform& w) {
  PITMIX_CHECK(w.samples.size() > 0, "waveform must be non-empty");
  PITMIX_CHECK(w.sample_rate > 0, "sample rate must be positive");
  PITMIX_CHECK(w.samples.allFinite(), "waveform contains non-finite samples");
}

void validate(const FeatureSequence& f) {
  PITMIX_CHECK(f.frames.rows() >= 1 && f.frames.cols() >= 1,
               "feature sequence must have T >= 1 and D >= 1");
  PITMIX_CHECK(f.frames.allFinite(), "feature sequence contains non-finite entries");
  if (f.normalized && f.frames.rows() > 1) {
    Eigen::RowVectorXd mean = f.frames.colwise().mean();
    Matrix centered = f.frames.rowwise() - mean;
    Eigen::RowVectorXd var =
        centered.array().square().colwise().mean();
    for (Index d = 0; d < f.frames.cols(); ++d) {
      if (var(d) < 1e-10) continue;  // degenerate dimension, mean-only rule
      PITMIX_CHECK(std::abs(mean(d)) < 1e-6, "CMVN mean off zero");
      PITMIX_CHECK(std::abs(var(d) - 1.0) < 1e-6, "CMVN variance off one");
    }
  }
}

double energy(const Waveform& w) {
  validate(w);
  return w.samples.squaredNorm() / double(w.samples.size());
}

double measured_snr_db(const Waveform& a, const Waveform& b) {
  return 10.0 * std::log10(energy(a) / energy(b));
}

std::pair<Waveform, std::vector<double>> mix_at_snr(
    const Waveform& target, const std::vector<Waveform>& interferers,
    const MixSpec& spec) {
  std::vector<double> snrs(interferers.size(), spec.target_snr_db);
  return mix_at_snr(target, interferers, snrs);
}

std::pair<Waveform, std::vector<double>> mix_at_snr(
    const Waveform& target, const std::vector<Waveform>& interferers,
    const std::vector<double>& snr_db) {
  validate(target);
  PITMIX_CHECK(snr_db.size() == interferers.size(),
               "one target SNR per interferer required");
  double e_target = energy(target);
  PITMIX_CHECK(e_target > 0.0, "zero-energy target makes the SNR undefined");

  Waveform mixed = target;
  std::vector<double> gains;
  gains.reserve(interferers.size());
  for (std::size_t i = 0; i < interferers.size(); ++i) {
    const Waveform& itf = interferers[i];
    validate(itf);
    PITMIX_CHECK(itf.sample_rate == target.sample_rate,
                 "sample rate mismatch between sources");
    PITMIX_CHECK(itf.size() == target.size(),
                 "length mismatch between sources; pad first");
    double e_itf = energy(itf);
    PITMIX_CHECK(e_itf > 0.0, "zero-energy interferer makes the SNR undefined");
    // 10*log10(E_target / (g^2 * E_itf)) == snr_db[i]
    double g =
        std::sqrt(e_target / (e_itf * std::pow(10.0, snr_db[i] / 10.0)));
    mixed.samples += g * itf.samples;
    gains.push_back(g);
  }
  return {std::move(mixed), std::move(gains)};
}

Waveform pad_to_length(const Waveform& w, Index length, double noise_amplitude,
                       std::uint64_t rng_seed) {
  validate(w);
  PITMIX_CHECK(noise_amplitude >= 0.0, "noise amplitude must be >= 0");
  PITMIX_CHECK(length >= w.size(), "cannot pad to a shorter length");
  if (length == w.size()) return w;

  Index deficit = length - w.size();
  Index front = (deficit + 1) / 2;  // odd deficit: front takes the extra
  Index back = deficit - front;

  Rng rng(rng_seed);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(length);
  for (Index i = 0; i < front; ++i)
    out.samples(i) = rng.uniform(-noise_amplitude, noise_amplitude);
  out.samples.segment(front, w.size()) = w.samples;
  for (Index i = 0; i < back; ++i)
    out.samples(front + w.size() + i) =
        rng.uniform(-noise_amplitude, noise_amplitude);
  return out;
}

Matrix mel_filterbank(int n_mels, int n_fft, int sample_rate,
                      std::vector<double>* centers_hz_out) {
  PITMIX_CHECK(n_mels >= 1, "need at least one mel filter");
  int n_bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(0.0);
  double mel_hi = hz_to_mel(sample_rate / 2.0);

  std::vector<double> edges(std::size_t(n_mels) + 2);
  for (int j = 0; j < n_mels + 2; ++j)
    edges[std::size_t(j)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * j / double(n_mels + 1));
  if (centers_hz_out) {
    centers_hz_out->assign(edges.begin() + 1, edges.end() - 1);
  }

  Matrix fb = Matrix::Zero(n_mels, n_bins);
  for (int j = 0; j < n_mels; ++j) {
    double lo = edges[std::size_t(j)];
    double center = edges[std::size_t(j) + 1];
    double hi = edges[std::size_t(j) + 2];
    for (int k = 0; k < n_bins; ++k) {
      double f = double(k) * sample_rate / n_fft;
      double wgt = 0.0;
      if (f > lo && f < center)
        wgt = (f - lo) / (center - lo);
      else if (f >= center && f < hi)
        wgt = (hi - f) / (hi - center);
      fb(j, k) = wgt;
    }
  }
  return fb;
}

StftPlan::StftPlan(const FeatureConfig& cfg) : cfg_(cfg) {
  int win = cfg.frame_len_samples();
  int n_fft = cfg.fft_size();
  int n_bins = n_fft / 2 + 1;
  PITMIX_CHECK(win >= 2, "analysis window shorter than two samples");
  PITMIX_CHECK(n_fft >= win, "n_fft must hold one analysis window");

  Vector window(win);
  for (int n = 0; n < win; ++n)
    window(n) = 0.5 - 0.5 * std::cos(2.0 * kPi * n / win);

  dft_cos_.resize(n_bins, win);
  dft_sin_.resize(n_bins, win);
  for (int b = 0; b < n_bins; ++b) {
    for (int n = 0; n < win; ++n) {
      double phase = 2.0 * kPi * b * n / n_fft;
      dft_cos_(b, n) = std::cos(phase) * window(n);
      dft_sin_(b, n) = std::sin(phase) * window(n);
    }
  }
  mel_ = mel_filterbank(cfg.n_mels, n_fft, cfg.sample_rate, &mel_centers_);
}

FeatureSequence StftPlan::logfbank(const Waveform& w) const {
  validate(w);
  PITMIX_CHECK(w.sample_rate == cfg_.sample_rate,
               "waveform sample rate does not match the feature config");
  int win = cfg_.frame_len_samples();
  int hop = cfg_.hop_samples();
  PITMIX_CHECK(w.size() >= win, "waveform shorter than one frame");
  Index num_frames = 1 + (w.size() - win) / hop;

  Matrix frames(win, num_frames);
  for (Index t = 0; t < num_frames; ++t)
    frames.col(t) = w.samples.segment(t * hop, win);

  Matrix power = (dft_cos_ * frames).array().square() +
                 (dft_sin_ * frames).array().square();
  Matrix mel_energy = mel_ * power;  // n_mels x T

  FeatureSequence out;
  out.frame_hop = cfg_.frame_hop;
  out.normalized = false;
  out.frames = mel_energy.transpose()
                   .array()
                   .max(cfg_.floor)
                   .log()
                   .matrix();
  return out;
}

FeatureSequence logfbank(const Waveform& w, const FeatureConfig& cfg) {
  return StftPlan(cfg).logfbank(w);
}

FeatureSequence cmvn(const FeatureSequence& f) {
  PITMIX_CHECK(f.num_frames() >= 2, "CMVN needs at least two frames");
  Eigen::RowVectorXd mean = f.frames.colwise().mean();
  Matrix centered = f.frames.rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().mean();

  FeatureSequence out;
  out.frame_hop = f.frame_hop;
  out.normalized = true;
  out.frames = centered;
  for (Index d = 0; d < centered.cols(); ++d) {
    if (var(d) >= 1e-10) out.frames.col(d) /= std::sqrt(var(d));
  }
  return out;
}

}  // namespace pitmix::dsp
