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

#include "pitmix/autodiff.hpp"

#include <cmath>

namespace pitmix::nn {

namespace {

using RowVec = Eigen::RowVectorXd;

inline Matrix sigmoid_of(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace

Var Tape::make_node(Matrix value, std::vector<int> parents,
                    std::function<void(Tape&)> backprop) {
  PITMIX_CHECK(value.allFinite(), "op produced a non-finite value");
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents) n.requires_grad |= needs(p);
  // Backward rules are only kept where a gradient can flow; forward-only
  // tapes stay closure-free.
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{int(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  PITMIX_CHECK(value.allFinite(), "leaf value is non-finite");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{int(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  PITMIX_CHECK(v.valid() && v.id < int(nodes_.size()), "invalid tape handle");
  return nodes_[std::size_t(v.id)].value;
}

bool Tape::requires_grad(Var v) const {
  PITMIX_CHECK(v.valid() && v.id < int(nodes_.size()), "invalid tape handle");
  return nodes_[std::size_t(v.id)].requires_grad;
}

bool Tape::has_grad(Var v) const {
  PITMIX_CHECK(v.valid() && v.id < int(nodes_.size()), "invalid tape handle");
  return nodes_[std::size_t(v.id)].grad.size() > 0;
}

const Matrix& Tape::grad(Var v) const {
  PITMIX_CHECK(has_grad(v), "gradient not computed for this node");
  return nodes_[std::size_t(v.id)].grad;
}

Var Tape::affine(Var x, Var w, Var b) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  const Matrix& bv = value(b);
  PITMIX_CHECK(xv.cols() == wv.cols(), "affine: input/weight shape mismatch");
  PITMIX_CHECK(bv.rows() == wv.rows() && bv.cols() == 1,
               "affine: bias must be Dout x 1");
  Matrix y = xv * wv.transpose();
  y.rowwise() += bv.col(0).transpose();
  const int self = int(nodes_.size());
  const int xi = x.id, wi = w.id, bi = b.id;
  return make_node(std::move(y), {xi, wi, bi}, [self, xi, wi, bi](Tape& t) {
    const Matrix& g = t.grad_ref(self);
    if (t.needs(xi)) t.grad_ref(xi) += g * t.val(wi);
    if (t.needs(wi)) t.grad_ref(wi) += g.transpose() * t.val(xi);
    if (t.needs(bi)) t.grad_ref(bi).col(0) += g.colwise().sum().transpose();
  });
}

Var Tape::matmul_nt(Var x, Var w) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  PITMIX_CHECK(xv.cols() == wv.cols(), "matmul_nt: shape mismatch");
  Matrix y = xv * wv.transpose();
  const int self = int(nodes_.size());
  const int xi = x.id, wi = w.id;
  return make_node(std::move(y), {xi, wi}, [self, xi, wi](Tape& t) {
    const Matrix& g = t.grad_ref(self);
    if (t.needs(xi)) t.grad_ref(xi) += g * t.val(wi);
    if (t.needs(wi)) t.grad_ref(wi) += g.transpose() * t.val(xi);
  });
}

Var Tape::add(Var a, Var b) {
  PITMIX_CHECK(value(a).rows() == value(b).rows() &&
                   value(a).cols() == value(b).cols(),
               "add: shape mismatch");
  Matrix y = value(a) + value(b);
  const int self = int(nodes_.size());
  const int ai = a.id, bi = b.id;
  return make_node(std::move(y), {ai, bi}, [self, ai, bi](Tape& t) {
    const Matrix& g = t.grad_ref(self);
    if (t.needs(ai)) t.grad_ref(ai) += g;
    if (t.needs(bi)) t.grad_ref(bi) += g;
  });
}

Var Tape::add_n(const std::vector<Var>& vs) {
  PITMIX_CHECK(!vs.empty(), "add_n: empty operand list");
  Var acc = vs[0];
  for (std::size_t i = 1; i < vs.size(); ++i) acc = add(acc, vs[i]);
  return acc;
}

Var Tape::hadamard(Var a, Var b) {
  PITMIX_CHECK(value(a).rows() == value(b).rows() &&
                   value(a).cols() == value(b).cols(),
               "hadamard: shape mismatch");
  Matrix y = value(a).cwiseProduct(value(b));
  const int self = int(nodes_.size());
  const int ai = a.id, bi = b.id;
  return make_node(std::move(y), {ai, bi}, [self, ai, bi](Tape& t) {
    const Matrix& g = t.grad_ref(self);
    if (t.needs(ai)) t.grad_ref(ai) += g.cwiseProduct(t.val(bi));
    if (t.needs(bi)) t.grad_ref(bi) += g.cwiseProduct(t.val(ai));
  });
}

Var Tape::sigmoid(Var x) {
  Matrix y = sigmoid_of(value(x));
  const int self = int(nodes_.size());
  const int xi = x.id;
  return make_node(std::move(y), {xi}, [self, xi](Tape& t) {
    const Matrix& y = t.val(self);
    t.grad_ref(xi).array() +=
        t.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var Tape::tanh(Var x) {
  Matrix y = value(x).array().tanh().matrix();
  const int self = int(nodes_.size());
  const int xi = x.id;
  return make_node(std::move(y), {xi}, [self, xi](Tape& t) {
    const Matrix& y = t.val(self);
    t.grad_ref(xi).array() +=
        t.grad_ref(self).array() * (1.0 - y.array().square());
  });
}

Var Tape::scale(Var x, double c) {
  Matrix y = c * value(x);
  const int self = int(nodes_.size());
  const int xi = x.id;
  return make_node(std::move(y), {xi}, [self, xi, c](Tape& t) {
    t.grad_ref(xi) += c * t.grad_ref(self);
  });
}

Var Tape::slice_cols(Var x, Index c0, Index n) {
  const Matrix& xv = value(x);
  PITMIX_CHECK(c0 >= 0 && n >= 1 && c0 + n <= xv.cols(),
               "slice_cols: range out of bounds");
  Matrix y = xv.middleCols(c0, n);
  const int self = int(nodes_.size());
  const int xi = x.id;
  return make_node(std::move(y), {xi}, [self, xi, c0, n](Tape& t) {
    t.grad_ref(xi).middleCols(c0, n) += t.grad_ref(self);
  });
}

Var Tape::hconcat(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  PITMIX_CHECK(av.rows() == bv.rows(), "hconcat: row count mismatch");
  Matrix y(av.rows(), av.cols() + bv.cols());
  y << av, bv;
  const int self = int(nodes_.size());
  const int ai = a.id, bi = b.id;
  const Index na = av.cols(), nb = bv.cols();
  return make_node(std::move(y), {ai, bi}, [self, ai, bi, na, nb](Tape& t) {
    const Matrix& g = t.grad_ref(self);
    if (t.needs(ai)) t.grad_ref(ai) += g.leftCols(na);
    if (t.needs(bi)) t.grad_ref(bi) += g.rightCols(nb);
  });
}

Var Tape::mse_sum(Var a, Var b) {
  PITMIX_CHECK(value(a).rows() == value(b).rows() &&
                   value(a).cols() == value(b).cols(),
               "mse_sum: shape mismatch");
  Matrix y(1, 1);
  y(0, 0) = (value(a) - value(b)).squaredNorm();
  const int self = int(nodes_.size());
  const int ai = a.id, bi = b.id;
  return make_node(std::move(y), {ai, bi}, [self, ai, bi](Tape& t) {
    double g = t.grad_ref(self)(0, 0);
    Matrix diff = t.val(ai) - t.val(bi);
    if (t.needs(ai)) t.grad_ref(ai) += 2.0 * g * diff;
    if (t.needs(bi)) t.grad_ref(bi) -= 2.0 * g * diff;
  });
}

Var Tape::mse_sum(Var a, Var b, const Vector& row_weights) {
  PITMIX_CHECK(value(a).rows() == value(b).rows() &&
                   value(a).cols() == value(b).cols(),
               "mse_sum: shape mismatch");
  PITMIX_CHECK(row_weights.size() == value(a).rows(),
               "mse_sum: one weight per row required");
  Matrix diff = value(a) - value(b);
  Matrix y(1, 1);
  y(0, 0) = (diff.array().square().rowwise().sum() * row_weights.array()).sum();
  const int self = int(nodes_.size());
  const int ai = a.id, bi = b.id;
  auto w = std::make_shared<Vector>(row_weights);
  return make_node(std::move(y), {ai, bi}, [self, ai, bi, w](Tape& t) {
    double g = t.grad_ref(self)(0, 0);
    Matrix d = t.val(ai) - t.val(bi);
    d.array().colwise() *= w->array();
    if (t.needs(ai)) t.grad_ref(ai) += 2.0 * g * d;
    if (t.needs(bi)) t.grad_ref(bi) -= 2.0 * g * d;
  });
}

Var Tape::softmax_ce_sum(Var logits, const std::vector<int>& labels) {
  const Matrix& lv = value(logits);
  PITMIX_CHECK(Index(labels.size()) == lv.rows(),
               "softmax_ce_sum: one label per row required");
  for (int l : labels)
    PITMIX_CHECK(l >= 0 && l < lv.cols(), "softmax_ce_sum: label out of range");

  auto probs = std::make_shared<Matrix>(softmax_rows(lv));
  double loss = 0.0;
  for (Index t = 0; t < lv.rows(); ++t)
    loss -= std::log((*probs)(t, labels[std::size_t(t)]));
  Matrix y(1, 1);
  y(0, 0) = loss;

  const int self = int(nodes_.size());
  const int xi = logits.id;
  auto lab = std::make_shared<std::vector<int>>(labels);
  return make_node(std::move(y), {xi}, [self, xi, probs, lab](Tape& t) {
    double g = t.grad_ref(self)(0, 0);
    Matrix d = *probs;
    for (Index r = 0; r < d.rows(); ++r) d(r, (*lab)[std::size_t(r)]) -= 1.0;
    t.grad_ref(xi) += g * d;
  });
}

Var Tape::softmax_ce_sum(Var logits, const std::vector<int>& labels,
                         const Vector& row_weights) {
  const Matrix& lv = value(logits);
  PITMIX_CHECK(Index(labels.size()) == lv.rows(),
               "softmax_ce_sum: one label per row required");
  PITMIX_CHECK(row_weights.size() == lv.rows(),
               "softmax_ce_sum: one weight per row required");
  for (int l : labels)
    PITMIX_CHECK(l >= 0 && l < lv.cols(), "softmax_ce_sum: label out of range");

  auto probs = std::make_shared<Matrix>(softmax_rows(lv));
  double loss = 0.0;
  for (Index t = 0; t < lv.rows(); ++t)
    loss -= row_weights[t] * std::log((*probs)(t, labels[std::size_t(t)]));
  Matrix y(1, 1);
  y(0, 0) = loss;

  const int self = int(nodes_.size());
  const int xi = logits.id;
  auto lab = std::make_shared<std::vector<int>>(labels);
  auto w = std::make_shared<Vector>(row_weights);
  return make_node(std::move(y), {xi}, [self, xi, probs, lab, w](Tape& t) {
    double g = t.grad_ref(self)(0, 0);
    Matrix d = *probs;
    for (Index r = 0; r < d.rows(); ++r) d(r, (*lab)[std::size_t(r)]) -= 1.0;
    d.array().colwise() *= w->array();
    t.grad_ref(xi) += g * d;
  });
}

// ---------------------------------------------------------------------------
// Fused bidirectional LSTM.
// ---------------------------------------------------------------------------

namespace {

// Per-direction activations, one row per time index.
struct DirCache {
  Matrix in, fg, cand, og;  // gate activations i, f, g, o  (T x H)
  Matrix c, tc;             // cell state and tanh(cell)    (T x H)
  Matrix hprev;             // hidden state entering step t (T x H)
  Matrix h;                 // hidden output                (T x H)
};

void run_direction(const Matrix& x, const Matrix& wx, const Matrix& wh,
                   const Matrix& b, bool reversed, DirCache* cache) {
  const Index T = x.rows();
  const Index H = wh.cols();
  Matrix gates_in = x * wx.transpose();  // T x 4H
  gates_in.rowwise() += b.col(0).transpose();

  cache->in.resize(T, H);
  cache->fg.resize(T, H);
  cache->cand.resize(T, H);
  cache->og.resize(T, H);
  cache->c.resize(T, H);
  cache->tc.resize(T, H);
  cache->hprev.resize(T, H);
  cache->h.resize(T, H);

  RowVec h = RowVec::Zero(H);
  RowVec c = RowVec::Zero(H);
  RowVec gt(4 * H);
  for (Index k = 0; k < T; ++k) {
    Index t = reversed ? T - 1 - k : k;
    cache->hprev.row(t) = h;
    gt = gates_in.row(t) + h * wh.transpose();
    cache->in.row(t) = 1.0 / (1.0 + (-gt.segment(0, H).array()).exp());
    cache->fg.row(t) = 1.0 / (1.0 + (-gt.segment(H, H).array()).exp());
    cache->cand.row(t) = gt.segment(2 * H, H).array().tanh();
    cache->og.row(t) = 1.0 / (1.0 + (-gt.segment(3 * H, H).array()).exp());
    c = cache->fg.row(t).cwiseProduct(c) +
        cache->in.row(t).cwiseProduct(cache->cand.row(t));
    cache->c.row(t) = c;
    cache->tc.row(t) = c.array().tanh();
    h = cache->og.row(t).cwiseProduct(cache->tc.row(t));
    cache->h.row(t) = h;
  }
}

// BPTT for one direction given d(h); adds into the output gradients.
void back_direction(const Matrix& x, const Matrix& wx, const Matrix& wh,
                    const DirCache& cache, const Matrix& dh_out, bool reversed,
                    Matrix* dx, Matrix* dwx, Matrix* dwh, Matrix* db) {
  const Index T = x.rows();
  const Index H = wh.cols();
  Matrix dgates(T, 4 * H);
  RowVec dh_carry = RowVec::Zero(H);
  RowVec dc_carry = RowVec::Zero(H);
  RowVec dh(H), dc(H), cprev(H);
  for (Index k = T - 1; k >= 0; --k) {
    Index t = reversed ? T - 1 - k : k;
    if (k == 0)
      cprev.setZero();
    else
      cprev = cache.c.row(reversed ? t + 1 : t - 1);

    dh = dh_out.row(t) + dh_carry;
    auto in = cache.in.row(t).array();
    auto fg = cache.fg.row(t).array();
    auto cand = cache.cand.row(t).array();
    auto og = cache.og.row(t).array();
    auto tc = cache.tc.row(t).array();

    dc = (dh.array() * og * (1.0 - tc.square()) + dc_carry.array()).matrix();
    dgates.row(t).segment(0, H) = dc.array() * cand * in * (1.0 - in);
    dgates.row(t).segment(H, H) = dc.array() * cprev.array() * fg * (1.0 - fg);
    dgates.row(t).segment(2 * H, H) = dc.array() * in * (1.0 - cand.square());
    dgates.row(t).segment(3 * H, H) = dh.array() * tc * og * (1.0 - og);
    dc_carry = (dc.array() * fg).matrix();
    dh_carry = dgates.row(t) * wh;
  }
  if (dwx) *dwx += dgates.transpose() * x;
  if (dwh) *dwh += dgates.transpose() * cache.hprev;
  if (db) db->col(0) += dgates.colwise().sum().transpose();
  if (dx) *dx += dgates * wx;
}

}  // namespace

Var Tape::bilstm(Var x, const BiLstmVars& p) {
  const Matrix& xv = value(x);
  const Matrix& wx_f = value(p.fw.wx);
  const Matrix& wh_f = value(p.fw.wh);
  const Matrix& b_f = value(p.fw.b);
  const Matrix& wx_b = value(p.bw.wx);
  const Matrix& wh_b = value(p.bw.wh);
  const Matrix& b_b = value(p.bw.b);
  const Index H = wh_f.cols();
  PITMIX_CHECK(xv.rows() >= 1, "bilstm: empty sequence");
  PITMIX_CHECK(wx_f.cols() == xv.cols() && wx_b.cols() == xv.cols(),
               "bilstm: input width mismatch");
  PITMIX_CHECK(wx_f.rows() == 4 * H && wh_f.rows() == 4 * H &&
                   b_f.rows() == 4 * H && b_f.cols() == 1 &&
                   wh_b.cols() == H && wx_b.rows() == 4 * H &&
                   wh_b.rows() == 4 * H && b_b.rows() == 4 * H &&
                   b_b.cols() == 1,
               "bilstm: inconsistent parameter shapes");

  auto cache = std::make_shared<std::pair<DirCache, DirCache>>();
  run_direction(xv, wx_f, wh_f, b_f, /*reversed=*/false, &cache->first);
  run_direction(xv, wx_b, wh_b, b_b, /*reversed=*/true, &cache->second);

  Matrix y(xv.rows(), 2 * H);
  y << cache->first.h, cache->second.h;

  const int self = int(nodes_.size());
  const int xi = x.id;
  const int wxf = p.fw.wx.id, whf = p.fw.wh.id, bf = p.fw.b.id;
  const int wxb = p.bw.wx.id, whb = p.bw.wh.id, bb = p.bw.b.id;
  return make_node(
      std::move(y), {xi, wxf, whf, bf, wxb, whb, bb},
      [self, xi, wxf, whf, bf, wxb, whb, bb, cache, H](Tape& t) {
        const Matrix& g = t.grad_ref(self);
        Matrix dh_f = g.leftCols(H);
        Matrix dh_b = g.rightCols(H);
        Matrix* dx = t.needs(xi) ? &t.grad_ref(xi) : nullptr;
        back_direction(t.val(xi), t.val(wxf), t.val(whf), cache->first, dh_f,
                       false, dx, t.needs(wxf) ? &t.grad_ref(wxf) : nullptr,
                       t.needs(whf) ? &t.grad_ref(whf) : nullptr,
                       t.needs(bf) ? &t.grad_ref(bf) : nullptr);
        back_direction(t.val(xi), t.val(wxb), t.val(whb), cache->second, dh_b,
                       true, dx, t.needs(wxb) ? &t.grad_ref(wxb) : nullptr,
                       t.needs(whb) ? &t.grad_ref(whb) : nullptr,
                       t.needs(bb) ? &t.grad_ref(bb) : nullptr);
      });
}

void Tape::backward(Var root) {
  PITMIX_CHECK(!backward_done_, "backward() already ran on this tape");
  PITMIX_CHECK(root.valid() && root.id < int(nodes_.size()),
               "invalid backward root");
  PITMIX_CHECK(value(root).rows() == 1 && value(root).cols() == 1,
               "backward root must be scalar");
  PITMIX_CHECK(nodes_[std::size_t(root.id)].requires_grad,
               "backward root has no differentiable ancestry");
  backward_done_ = true;

  // Mark ancestors of the root; only their rules run.
  std::vector<char> needed(nodes_.size(), 0);
  std::vector<int> stack{root.id};
  needed[std::size_t(root.id)] = 1;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    for (int p : nodes_[std::size_t(id)].parents) {
      if (!needed[std::size_t(p)]) {
        needed[std::size_t(p)] = 1;
        stack.push_back(p);
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (needed[i] && nodes_[i].requires_grad)
      nodes_[i].grad =
          Matrix::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  grad_ref(root.id).setConstant(1.0);
  for (int i = root.id; i >= 0; --i) {
    auto& n = nodes_[std::size_t(i)];
    if (needed[std::size_t(i)] && n.requires_grad && n.backprop)
      n.backprop(*this);
  }
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace pitmix::nn
