// autodiff.hpp - tape-based reverse-mode differentiation over dense
// matrices. One Tape records one forward pass; backward() replays the ops in
// exact reverse order, accumulating each node's gradient exactly once.

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

#include <functional>
#include <memory>
#include <vector>

#include "pitmix/common.hpp"

namespace pitmix::nn {

// Handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Parameter handles of one LSTM direction: wx (4H x Din), wh (4H x H),
// b (4H x 1), gate block order [input | forget | cell | output].
struct LstmDirVars {
  Var wx, wh, b;
};

struct BiLstmVars {
  LstmDirVars fw, bw;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. Values are checked finite on entry, as for every op below.
  Var leaf(Matrix value, bool requires_grad);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const;
  bool has_grad(Var v) const;
  const Matrix& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // y = x * W^T + 1 b^T, rows of x mapped independently.
  Var affine(Var x, Var w, Var b);
  // y = x * W^T.
  Var matmul_nt(Var x, Var w);
  Var add(Var a, Var b);
  Var add_n(const std::vector<Var>& vs);
  Var hadamard(Var a, Var b);
  Var sigmoid(Var x);
  Var tanh(Var x);
  Var scale(Var x, double c);
  Var slice_cols(Var x, Index c0, Index n);
  Var hconcat(Var a, Var b);

  // Sum over all entries of (a - b)^2; scalar output.
  Var mse_sum(Var a, Var b);
  // Row-weighted variant: sum_t w_t * ||a_t - b_t||^2.
  Var mse_sum(Var a, Var b, const Vector& row_weights);
  // Sum over rows t of -log softmax(logits.row(t))[labels[t]]; scalar
  // output, stabilized by per-row max subtraction.
  Var softmax_ce_sum(Var logits, const std::vector<int>& labels);
  // Row-weighted variant: sum_t w_t * CE_t.
  Var softmax_ce_sum(Var logits, const std::vector<int>& labels,
                     const Vector& row_weights);

  // Bidirectional LSTM over a T x Din sequence; output T x 2H with the
  // forward block first. Initial states are zero. Fused op: the whole
  // sequence is one node with a hand-written BPTT backward.
  Var bilstm(Var x, const BiLstmVars& p);

  // Seeds d(root)=1 and runs every recorded backward rule in reverse
  // creation order. root must be scalar. May be called once per tape.
  void backward(Var root);

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated by backward() for reachable nodes
    bool requires_grad = false;
    std::vector<int> parents;
    std::function<void(Tape&)> backprop;
  };

  Var make_node(Matrix value, std::vector<int> parents,
                std::function<void(Tape&)> backprop);
  Matrix& grad_ref(int id) { return nodes_[std::size_t(id)].grad; }
  const Matrix& val(int id) const { return nodes_[std::size_t(id)].value; }
  bool needs(int id) const { return nodes_[std::size_t(id)].requires_grad; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Row-wise softmax of a plain matrix (not a tape op); rows sum to one.
Matrix softmax_rows(const Matrix& logits);

}  // namespace pitmix::nn
