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

#include "pitmix/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pitmix/layers.hpp"
#include "pitmix/pit.hpp"

namespace pitmix::nn {

namespace {

double eval_loss(const std::vector<Matrix>& params, const LossBuilder& build) {
  Tape t;
  std::vector<Var> leaves(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    leaves[i] = t.leaf(params[i], true);
  return t.value(build(t, leaves))(0, 0);
}

Matrix rand_mat(Index rows, Index cols, Rng& rng, double range = 1.0) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-range, range);
  return m;
}

std::vector<int> rand_labels(Index t, int l, Rng& rng) {
  std::vector<int> out(std::size_t(t), 0);
  for (auto& v : out) v = rng.uniform_int(0, l - 1);
  return out;
}

Vector rand_weights(Index t, Rng& rng) {
  Vector w(t);
  for (Index i = 0; i < t; ++i)
    w[i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.2, 2.0);
  return w;
}

}  // namespace

GradCheckReport check_gradients(const std::string& name,
                                const std::vector<Matrix>& init,
                                const LossBuilder& build, double fd_step,
                                double tol, double corrupt) {
  GradCheckReport rep;
  rep.name = name;

  Tape tape;
  std::vector<Var> leaves(init.size());
  for (std::size_t i = 0; i < init.size(); ++i)
    leaves[i] = tape.leaf(init[i], true);
  Var loss = build(tape, leaves);
  tape.backward(loss);

  std::vector<Matrix> analytic(init.size());
  for (std::size_t i = 0; i < init.size(); ++i)
    analytic[i] = tape.has_grad(leaves[i])
                      ? tape.grad(leaves[i])
                      : Matrix::Zero(init[i].rows(), init[i].cols());
  if (corrupt != 0.0 && !analytic.empty()) analytic[0](0, 0) += corrupt;

  double max_rel = 0.0;
  std::vector<Matrix> probe = init;
  for (std::size_t i = 0; i < init.size(); ++i) {
    for (Index r = 0; r < init[i].rows(); ++r) {
      for (Index c = 0; c < init[i].cols(); ++c) {
        double orig = init[i](r, c);
        probe[i](r, c) = orig + fd_step;
        double fp = eval_loss(probe, build);
        probe[i](r, c) = orig - fd_step;
        double fm = eval_loss(probe, build);
        probe[i](r, c) = orig;
        double num = (fp - fm) / (2.0 * fd_step);
        double a = analytic[i](r, c);
        double denom = std::max({1e-2, std::abs(a), std::abs(num)});
        max_rel = std::max(max_rel, std::abs(a - num) / denom);
      }
    }
  }
  rep.max_rel_err = max_rel;
  rep.pass = max_rel < tol;
  return rep;
}

std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed,
                                             int configs_per_op,
                                             double corrupt) {
  PITMIX_CHECK(configs_per_op >= 1, "gradcheck: need at least one config");
  std::vector<GradCheckReport> out;

  // Each case builds random shapes from its own child stream, runs the
  // check, and keeps the worst config's error under the op's name.
  auto run = [&](const std::string& name, auto&& make_case) {
    GradCheckReport worst;
    worst.name = name;
    worst.pass = true;
    for (int k = 0; k < configs_per_op; ++k) {
      Rng rng(child_seed(seed, fnv1a64(name), std::uint64_t(k)));
      auto [init, build] = make_case(rng);
      GradCheckReport r =
          check_gradients(name, init, build, 1e-4, 1e-4, corrupt);
      if (r.max_rel_err > worst.max_rel_err) worst.max_rel_err = r.max_rel_err;
      worst.pass = worst.pass && r.pass;
    }
    out.push_back(worst);
  };

  using Case = std::pair<std::vector<Matrix>, LossBuilder>;

  run("linear", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), din = rng.uniform_int(1, 4),
          dout = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, dout, rng);
    return {{rand_mat(t, din, rng), rand_mat(dout, din, rng),
             rand_mat(dout, 1, rng)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.affine(v[0], v[1], v[2]), tp.constant(c));
            }};
  });

  run("matmul_nt", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), din = rng.uniform_int(1, 4),
          dout = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, dout, rng);
    return {{rand_mat(t, din, rng), rand_mat(dout, din, rng)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.matmul_nt(v[0], v[1]), tp.constant(c));
            }};
  });

  run("add", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, d, rng);
    return {{rand_mat(t, d, rng), rand_mat(t, d, rng)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.add(v[0], v[1]), tp.constant(c));
            }};
  });

  run("hadamard", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, d, rng);
    return {{rand_mat(t, d, rng), rand_mat(t, d, rng)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.hadamard(v[0], v[1]), tp.constant(c));
            }};
  });

  run("sigmoid", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, d, rng);
    return {{rand_mat(t, d, rng, 2.0)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.sigmoid(v[0]), tp.constant(c));
            }};
  });

  run("tanh", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, d, rng);
    return {{rand_mat(t, d, rng, 2.0)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.tanh(v[0]), tp.constant(c));
            }};
  });

  run("scale", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    double k = rng.uniform(-2.0, 2.0);
    Matrix c = rand_mat(t, d, rng);
    return {{rand_mat(t, d, rng)},
            [c, k](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.scale(v[0], k), tp.constant(c));
            }};
  });

  run("slice_cols", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(2, 5);
    Index n = rng.uniform_int(1, int(d));
    Index c0 = rng.uniform_int(0, int(d - n));
    Matrix c = rand_mat(t, n, rng);
    return {{rand_mat(t, d, rng)},
            [c, c0, n](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.slice_cols(v[0], c0, n), tp.constant(c));
            }};
  });

  run("hconcat", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), da = rng.uniform_int(1, 4),
          db = rng.uniform_int(1, 4);
    Matrix c = rand_mat(t, da + db, rng);
    return {{rand_mat(t, da, rng), rand_mat(t, db, rng)},
            [c](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(tp.hconcat(v[0], v[1]), tp.constant(c));
            }};
  });

  run("mse", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    return {{rand_mat(t, d, rng), rand_mat(t, d, rng)},
            [](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(v[0], v[1]);
            }};
  });

  run("mse_weighted", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5), d = rng.uniform_int(1, 4);
    Vector w = rand_weights(t, rng);
    return {{rand_mat(t, d, rng), rand_mat(t, d, rng)},
            [w](Tape& tp, const std::vector<Var>& v) {
              return tp.mse_sum(v[0], v[1], w);
            }};
  });

  run("softmax_ce", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5);
    int l = rng.uniform_int(2, 5);
    std::vector<int> lab = rand_labels(t, l, rng);
    return {{rand_mat(t, l, rng, 2.0)},
            [lab](Tape& tp, const std::vector<Var>& v) {
              return softmax_ce(tp, v[0], lab);
            }};
  });

  run("softmax_ce_weighted", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 5);
    int l = rng.uniform_int(2, 5);
    std::vector<int> lab = rand_labels(t, l, rng);
    Vector w = rand_weights(t, rng);
    return {{rand_mat(t, l, rng, 2.0)},
            [lab, w](Tape& tp, const std::vector<Var>& v) {
              return tp.softmax_ce_sum(v[0], lab, w);
            }};
  });

  run("lstm_step", [](Rng& rng) -> Case {
    Index h = rng.uniform_int(1, 3), din = rng.uniform_int(1, 3);
    LstmDirParams p = make_lstm_dir(din, h, rng);
    Matrix c1 = rand_mat(1, h, rng), c2 = rand_mat(1, h, rng),
           c3 = rand_mat(1, h, rng);
    return {{p.wx, p.wh, p.b, rand_mat(1, din, rng), rand_mat(1, din, rng),
             rand_mat(1, din, rng)},
            [c1, c2, c3, h](Tape& tp, const std::vector<Var>& v) {
              LstmDirVars pv{v[0], v[1], v[2]};
              Var hh = tp.constant(Matrix::Zero(1, h));
              Var cc = tp.constant(Matrix::Zero(1, h));
              std::tie(hh, cc) = lstm_step(tp, v[3], hh, cc, pv);
              Var l1 = tp.mse_sum(hh, tp.constant(c1));
              std::tie(hh, cc) = lstm_step(tp, v[4], hh, cc, pv);
              Var l2 = tp.mse_sum(hh, tp.constant(c2));
              std::tie(hh, cc) = lstm_step(tp, v[5], hh, cc, pv);
              Var l3 = tp.mse_sum(hh, tp.constant(c3));
              return tp.add_n({l1, l2, l3});
            }};
  });

  run("bidi_layer", [](Rng& rng) -> Case {
    Index h = rng.uniform_int(1, 3), din = rng.uniform_int(1, 3),
          t = rng.uniform_int(2, 5);
    BiLstmParams p = make_bilstm(din, h, rng);
    Matrix c = rand_mat(t, 2 * h, rng);
    return {{p.fw.wx, p.fw.wh, p.fw.b, p.bw.wx, p.bw.wh, p.bw.b,
             rand_mat(t, din, rng)},
            [c](Tape& tp, const std::vector<Var>& v) {
              BiLstmVars pv{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
              return tp.mse_sum(tp.bilstm(v[6], pv), tp.constant(c));
            }};
  });

  run("fixed_mse", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 4), d = rng.uniform_int(1, 3);
    return {{rand_mat(t, d, rng), rand_mat(t, d, rng), rand_mat(t, d, rng),
             rand_mat(t, d, rng)},
            [](Tape& tp, const std::vector<Var>& v) {
              return pit::fixed_mse(tp, {v[0], v[1]}, {v[2], v[3]});
            }};
  });

  run("pit_mse", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 4), d = rng.uniform_int(1, 3);
    int s = rng.uniform_int(2, 3);
    std::vector<Matrix> init;
    for (int i = 0; i < 2 * s; ++i) init.push_back(rand_mat(t, d, rng));
    return {init, [s](Tape& tp, const std::vector<Var>& v) {
              std::vector<Var> outs(v.begin(), v.begin() + s);
              std::vector<Var> tgts(v.begin() + s, v.end());
              return pit::pit_mse(tp, outs, tgts).loss_var;
            }};
  });

  run("pit_ce", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 4);
    int l = rng.uniform_int(2, 5);
    int s = rng.uniform_int(2, 3);
    std::vector<Matrix> init;
    std::vector<std::vector<int>> labels;
    for (int i = 0; i < s; ++i) init.push_back(rand_mat(t, l, rng, 2.0));
    for (int i = 0; i < s; ++i) labels.push_back(rand_labels(t, l, rng));
    return {init, [labels](Tape& tp, const std::vector<Var>& v) {
              return pit::pit_ce(tp, v, labels).loss_var;
            }};
  });

  run("joint_objectives", [](Rng& rng) -> Case {
    Index t = rng.uniform_int(2, 4), d = rng.uniform_int(1, 3);
    int l = rng.uniform_int(2, 5);
    std::vector<std::vector<int>> labels{rand_labels(t, l, rng),
                                         rand_labels(t, l, rng)};
    return {{rand_mat(t, d, rng), rand_mat(t, d, rng), rand_mat(t, d, rng),
             rand_mat(t, d, rng), rand_mat(t, l, rng, 2.0),
             rand_mat(t, l, rng, 2.0)},
            [labels](Tape& tp, const std::vector<Var>& v) {
              auto joint = pit::joint_objectives(
                  tp, {v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, labels, true);
              return tp.add(joint.j1.loss_var, joint.j2.loss_var);
            }};
  });

  return out;
}

}  // namespace pitmix::nn
