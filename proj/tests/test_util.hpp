// test_util.hpp - shared helpers for the test runners: independent loss
// and edit-distance oracles, tiny deterministic corpora, file plumbing.

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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pitmix/common.hpp"
#include "pitmix/corpus.hpp"
#include "pitmix/dsp.hpp"

namespace testutil {

using pitmix::Index;
using pitmix::Matrix;
using pitmix::Rng;

inline Matrix random_matrix(Rng& rng, Index rows, Index cols,
                            double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

// Summed per-row cross entropy via explicit log-sum-exp; written without
// the library's softmax so the two computations share nothing.
inline double ce_sum_oracle(const Matrix& logits,
                            const std::vector<int>& labels) {
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    double m = logits.row(r).maxCoeff();
    double lse = 0.0;
    for (Index c = 0; c < logits.cols(); ++c)
      lse += std::exp(logits(r, c) - m);
    total += m + std::log(lse) - logits(r, labels[std::size_t(r)]);
  }
  return total;
}

// Naive double-loop summed squared error.
inline double sse_oracle(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) {
      double d = a(r, c) - b(r, c);
      total += d * d;
    }
  return total;
}

// Edit-distance oracle keeping every (subs, dels, ins) decomposition that
// attains the minimum, so a backtrace can be checked without fixing its
// tie-break order. Deletions are uncovered reference units, insertions
// extra hypothesis units.
struct LevOracle {
  int dist = 0;
  std::set<std::array<int, 3>> triples;  // (subs, dels, ins)
};

inline LevOracle lev_oracle(const std::vector<int>& hyp,
                            const std::vector<int>& ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::vector<LevOracle>> d(n + 1,
                                        std::vector<LevOracle>(m + 1));
  d[0][0].triples.insert({0, 0, 0});
  for (std::size_t i = 1; i <= n; ++i) {
    d[i][0].dist = int(i);
    d[i][0].triples.insert({0, 0, int(i)});
  }
  for (std::size_t j = 1; j <= m; ++j) {
    d[0][j].dist = int(j);
    d[0][j].triples.insert({0, int(j), 0});
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub_cost = hyp[i - 1] == ref[j - 1] ? 0 : 1;
      const int via_sub = d[i - 1][j - 1].dist + sub_cost;
      const int via_del = d[i][j - 1].dist + 1;
      const int via_ins = d[i - 1][j].dist + 1;
      int best = std::min(via_sub, std::min(via_del, via_ins));
      d[i][j].dist = best;
      if (via_sub == best)
        for (auto t : d[i - 1][j - 1].triples)
          d[i][j].triples.insert({t[0] + sub_cost, t[1], t[2]});
      if (via_del == best)
        for (auto t : d[i][j - 1].triples)
          d[i][j].triples.insert({t[0], t[1] + 1, t[2]});
      if (via_ins == best)
        for (auto t : d[i - 1][j].triples)
          d[i][j].triples.insert({t[0], t[1], t[2] + 1});
    }
  }
  return d[n][m];
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline bool files_equal(const std::string& a, const std::string& b) {
  return read_file(a) == read_file(b);
}

// A scratch directory wiped at acquisition, under the build tree's temp.
inline std::string fresh_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / ("pitmix_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// Small feature front end shared by the synthetic fixtures.
inline pitmix::dsp::FeatureConfig tiny_features() {
  pitmix::dsp::FeatureConfig cfg;
  cfg.sample_rate = 8000;
  cfg.n_mels = 8;
  return cfg;
}

// Deterministic miniature mixtures for model and trainer tests: `sources`
// talkers per sample (1 uses the clean single-talker path), labels drawn
// from [1, num_labels), utterance lengths kept inside the overlap bound.
inline std::vector<pitmix::corpus::MixtureSample> tiny_mixtures(
    int n, std::uint64_t seed, int sources = 2, int num_labels = 6) {
  namespace corpus = pitmix::corpus;
  pitmix::dsp::FeatureConfig fcfg = tiny_features();
  pitmix::dsp::StftPlan plan(fcfg);
  Rng rng(seed);

  std::vector<corpus::SpeakerProfile> speakers;
  const int num_speakers = std::max(2 * sources, 4);
  for (int i = 0; i < num_speakers; ++i)
    speakers.push_back(corpus::make_speaker(i, num_labels, seed));

  std::vector<corpus::MixtureSample> out;
  for (int i = 0; i < n; ++i) {
    std::vector<corpus::Utterance> utts;
    std::vector<int> used;
    for (int s = 0; s < sources; ++s) {
      int spk;
      do {
        spk = rng.uniform_int(0, num_speakers - 1);
      } while (std::find(used.begin(), used.end(), spk) != used.end());
      used.push_back(spk);
      std::vector<corpus::ScriptEntry> script;
      int frames = 0;
      const int want = rng.uniform_int(28, 40);
      while (frames < want) {
        int len = rng.uniform_int(5, 9);
        script.push_back({rng.uniform_int(1, num_labels - 1), len});
        frames += len;
      }
      utts.push_back(corpus::synth_utterance(
          speakers[std::size_t(spk)], script,
          pitmix::child_seed(seed, 17, std::uint64_t(i * 8 + s)), fcfg));
    }
    if (sources == 1) {
      out.push_back(corpus::single_sample(utts[0], plan, num_labels));
    } else {
      std::vector<double> snrs(std::size_t(sources - 1),
                               double(rng.uniform_int(0, 4)) * 5.0);
      out.push_back(corpus::make_mixture(
          utts, snrs, pitmix::child_seed(seed, 29, std::uint64_t(i)), plan,
          num_labels));
    }
  }
  return out;
}

}  // namespace testutil
