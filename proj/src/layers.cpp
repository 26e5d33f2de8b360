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

#include "pitmix/layers.hpp"

#include <cmath>

namespace pitmix::nn {

Matrix uniform_init(Index rows, Index cols, Rng& rng, double range) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-range, range);
  return m;
}

LstmDirParams make_lstm_dir(Index input, Index hidden, Rng& rng) {
  PITMIX_CHECK(input >= 1 && hidden >= 1, "lstm: widths must be positive");
  LstmDirParams p;
  p.wx = uniform_init(4 * hidden, input, rng);
  p.wh = uniform_init(4 * hidden, hidden, rng);
  p.b = uniform_init(4 * hidden, 1, rng);
  p.b.block(hidden, 0, hidden, 1).setConstant(1.0);  // forget gate
  return p;
}

BiLstmParams make_bilstm(Index input, Index hidden, Rng& rng) {
  BiLstmParams p;
  p.fw = make_lstm_dir(input, hidden, rng);
  p.bw = make_lstm_dir(input, hidden, rng);
  return p;
}

LinearParams make_linear(Index input, Index output, Rng& rng) {
  PITMIX_CHECK(input >= 1 && output >= 1, "linear: widths must be positive");
  LinearParams p;
  p.w = uniform_init(output, input, rng);
  p.b = uniform_init(output, 1, rng);
  return p;
}

LstmDirVars stage(Tape& t, const LstmDirParams& p, bool requires_grad) {
  LstmDirVars v;
  v.wx = t.leaf(p.wx, requires_grad);
  v.wh = t.leaf(p.wh, requires_grad);
  v.b = t.leaf(p.b, requires_grad);
  return v;
}

BiLstmVars stage(Tape& t, const BiLstmParams& p, bool requires_grad) {
  return BiLstmVars{stage(t, p.fw, requires_grad), stage(t, p.bw, requires_grad)};
}

Var linear(Tape& t, Var x, Var w, Var b) { return t.affine(x, w, b); }

std::pair<Var, Var> lstm_step(Tape& t, Var x_t, Var h, Var c,
                              const LstmDirVars& p) {
  const Index H = t.value(p.wh).cols();
  Var pre = t.add(t.affine(x_t, p.wx, p.b), t.matmul_nt(h, p.wh));
  Var gi = t.sigmoid(t.slice_cols(pre, 0, H));
  Var gf = t.sigmoid(t.slice_cols(pre, H, H));
  Var gg = t.tanh(t.slice_cols(pre, 2 * H, H));
  Var go = t.sigmoid(t.slice_cols(pre, 3 * H, H));
  Var c_new = t.add(t.hadamard(gf, c), t.hadamard(gi, gg));
  Var h_new = t.hadamard(go, t.tanh(c_new));
  return {h_new, c_new};
}

Var bidi_layer(Tape& t, Var x, const BiLstmVars& p) { return t.bilstm(x, p); }

Var softmax_ce(Tape& t, Var logits, const std::vector<int>& labels) {
  Var s = t.softmax_ce_sum(logits, labels);
  return t.scale(s, 1.0 / double(labels.size()));
}

Var mse(Tape& t, Var a, Var b) { return t.mse_sum(a, b); }

void clip_gradients(std::vector<Matrix>& grads, double clip, ClipMode mode) {
  PITMIX_CHECK(clip > 0.0, "clip threshold must be positive");
  if (mode == ClipMode::kElement) {
    for (Matrix& g : grads)
      g = g.array().min(clip).max(-clip).matrix();
    return;
  }
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > clip) {
    double s = clip / norm;
    for (Matrix& g : grads) g *= s;
  }
}

void sgd_step(std::vector<NamedParam>& params, std::vector<Matrix> grads,
              double lr, double clip, ClipMode mode) {
  PITMIX_CHECK(lr > 0.0, "learning rate must be positive");
  PITMIX_CHECK(params.size() == grads.size(),
               "sgd_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    PITMIX_CHECK(grads[i].rows() == params[i].value.rows() &&
                     grads[i].cols() == params[i].value.cols(),
                 "sgd_step: gradient shape mismatch at " + params[i].name);
    PITMIX_CHECK(grads[i].allFinite(),
                 "sgd_step: non-finite gradient at " + params[i].name);
  }
  clip_gradients(grads, clip, mode);
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].value -= lr * grads[i];
}

}  // namespace pitmix::nn
