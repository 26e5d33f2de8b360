// layers.hpp - parameterized layers on top of the tape: linear, LSTM cell,
// bidirectional layer, losses, and the SGD update with gradient clipping.

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

#include <string>
#include <utility>
#include <vector>

#include "pitmix/autodiff.hpp"
#include "pitmix/common.hpp"

namespace pitmix::nn {

// One named parameter matrix. Models keep a flat list; gradients live in a
// parallel list owned by the trainer.
struct NamedParam {
  std::string name;
  Matrix value;
};

// Uniform init in [-range, range].
Matrix uniform_init(Index rows, Index cols, Rng& rng, double range = 0.05);

// Plain-value LSTM direction parameters. Layout matches LstmDirVars:
// wx (4H x Din), wh (4H x H), b (4H x 1), gates [input|forget|cell|output].
struct LstmDirParams {
  Matrix wx, wh, b;
  Index hidden() const { return wh.cols(); }
};

struct BiLstmParams {
  LstmDirParams fw, bw;
};

struct LinearParams {
  Matrix w, b;  // w (Dout x Din), b (Dout x 1)
};

// Seeded initializers. All entries uniform in [-0.05, 0.05] except the
// forget-gate bias block, which starts at 1.0.
LstmDirParams make_lstm_dir(Index input, Index hidden, Rng& rng);
BiLstmParams make_bilstm(Index input, Index hidden, Rng& rng);
LinearParams make_linear(Index input, Index output, Rng& rng);

// Registers the parameter values as differentiable leaves on the tape.
LstmDirVars stage(Tape& t, const LstmDirParams& p, bool requires_grad = true);
BiLstmVars stage(Tape& t, const BiLstmParams& p, bool requires_grad = true);

// y = x W^T + 1 b^T.
Var linear(Tape& t, Var x, Var w, Var b);

// One LSTM cell step from composed tape ops. x_t is 1 x Din, h and c are
// 1 x H; returns (h', c').
std::pair<Var, Var> lstm_step(Tape& t, Var x_t, Var h, Var c,
                              const LstmDirVars& p);

// Bidirectional layer over a T x Din sequence, output T x 2H, forward block
// first, zero initial states.
Var bidi_layer(Tape& t, Var x, const BiLstmVars& p);

// Mean over frames of -log softmax(logits.row(t))[labels[t]].
Var softmax_ce(Tape& t, Var logits, const std::vector<int>& labels);

// Sum over frames of squared Euclidean distance.
Var mse(Tape& t, Var a, Var b);

enum class ClipMode { kElement, kNorm };

// Clamp each gradient entry to [-clip, clip], or rescale the whole set to
// global L2 norm clip in kNorm mode. clip must be positive.
void clip_gradients(std::vector<Matrix>& grads, double clip, ClipMode mode);

// In-place p <- p - lr * clip(g). Rejects non-finite gradients before
// touching any parameter.
void sgd_step(std::vector<NamedParam>& params, std::vector<Matrix> grads,
              double lr, double clip, ClipMode mode = ClipMode::kElement);

}  // namespace pitmix::nn
