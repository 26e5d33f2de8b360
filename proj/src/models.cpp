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

#include "pitmix/models.hpp"

#include <algorithm>
#include <fstream>

namespace pitmix::models {

namespace {

constexpr char kCheckpointMagic[7] = {'P', 'I', 'T', 'N', 'N', '1', '\0'};

enum class PKind { kLstmWx, kLstmWh, kLstmB, kLinW, kLinB };

struct LayoutEntry {
  std::string name;
  PKind kind;
  Index rows = 0, cols = 0;
  Index hidden = 0;  // forget-block offset for kLstmB
};

bool has_feature_heads(Arch a) {
  return a == Arch::kA1FixedSep || a == Arch::kA2PitSep || a == Arch::kA4Joint;
}

bool has_logit_heads(Arch a) {
  return a == Arch::kA3DirectPitCE || a == Arch::kA4Joint;
}

void push_bilstm(std::vector<LayoutEntry>* out, const std::string& prefix,
                 Index input, Index hidden) {
  for (const char* dir : {"fw", "bw"}) {
    std::string p = prefix + "." + dir;
    out->push_back({p + ".wx", PKind::kLstmWx, 4 * hidden, input, hidden});
    out->push_back({p + ".wh", PKind::kLstmWh, 4 * hidden, hidden, hidden});
    out->push_back({p + ".b", PKind::kLstmB, 4 * hidden, 1, hidden});
  }
}

void push_linear(std::vector<LayoutEntry>* out, const std::string& prefix,
                 Index input, Index output) {
  out->push_back({prefix + ".w", PKind::kLinW, output, input, 0});
  out->push_back({prefix + ".b", PKind::kLinB, output, 1, 0});
}

// The parameter order is the single source of truth: construction, forward
// staging, and checkpoints all walk this list.
std::vector<LayoutEntry> layout(const ArchConfig& cfg) {
  std::vector<LayoutEntry> out;
  const Index h = cfg.hidden, d = cfg.feature_dim, l = cfg.num_labels;
  for (int i = 0; i < cfg.layers; ++i)
    push_bilstm(&out, "enc" + std::to_string(i), i == 0 ? d : 2 * h, h);
  if (has_feature_heads(cfg.arch))
    for (int s = 0; s < cfg.num_streams; ++s)
      push_linear(&out, "sep_head" + std::to_string(s), 2 * h, d);
  if (cfg.arch == Arch::kA4Joint)
    for (int j = 0; j < cfg.back_layers; ++j)
      push_bilstm(&out, "rec" + std::to_string(j), j == 0 ? d : 2 * h, h);
  if (has_logit_heads(cfg.arch))
    for (int s = 0; s < cfg.num_streams; ++s)
      push_linear(&out, "out_head" + std::to_string(s), 2 * h, l);
  return out;
}

// Silence-masked frame weights, one vector per target stream.
pit::FrameWeights silence_weights(const corpus::MixtureSample& sample) {
  pit::FrameWeights w;
  for (const auto& labels : sample.source_labels) {
    Vector v(Index(labels.size()));
    for (Index t = 0; t < v.size(); ++t)
      v[t] = labels[std::size_t(t)] == corpus::kSilenceLabel ? 0.0 : 1.0;
    w.push_back(std::move(v));
  }
  return w;
}

}  // namespace

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::kA1FixedSep:
      return "A1_FixedSep";
    case Arch::kA2PitSep:
      return "A2_PitSep";
    case Arch::kA3DirectPitCE:
      return "A3_DirectPitCE";
    case Arch::kA4Joint:
      return "A4_Joint";
  }
  throw Error("unknown architecture");
}

void validate(const ArchConfig& cfg) {
  PITMIX_CHECK(cfg.layers >= 1, "need at least one recurrent layer");
  PITMIX_CHECK(cfg.hidden >= 1 && cfg.feature_dim >= 1, "widths must be positive");
  PITMIX_CHECK(cfg.num_streams >= 1 && cfg.num_streams <= 6,
               "num_streams must be in [1, 6]");
  if (cfg.arch != Arch::kA3DirectPitCE)
    PITMIX_CHECK(cfg.num_streams >= 2,
                 "only the direct recognition arch supports a single stream");
  if (has_logit_heads(cfg.arch))
    PITMIX_CHECK(cfg.num_labels >= 2, "label count must be at least 2");
  if (cfg.arch == Arch::kA4Joint)
    PITMIX_CHECK(cfg.back_layers >= 1, "back stack needs at least one layer");
}

Model::Model(const ArchConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg);
  Rng rng(seed);
  for (const LayoutEntry& e : layout(cfg)) {
    Matrix m = nn::uniform_init(e.rows, e.cols, rng);
    if (e.kind == PKind::kLstmB)
      m.block(e.hidden, 0, e.hidden, 1).setConstant(1.0);
    params_.push_back({e.name, std::move(m)});
  }
}

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += std::size_t(p.value.size());
  return n;
}

TapeForward Model::forward_on(nn::Tape& t, const Matrix& mixed_features,
                              bool requires_grad,
                              const std::vector<char>* trainable) const {
  PITMIX_CHECK(mixed_features.cols() == cfg_.feature_dim,
               "input feature dim does not match the architecture");
  PITMIX_CHECK(mixed_features.rows() >= 1, "empty input");
  PITMIX_CHECK(!trainable || trainable->size() == params_.size(),
               "trainable mask size does not match the parameter count");

  TapeForward fwd;
  fwd.param_vars.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    bool rg = requires_grad && (!trainable || (*trainable)[i] != 0);
    fwd.param_vars.push_back(t.leaf(params_[i].value, rg));
  }

  std::size_t pi = 0;
  auto next_bilstm = [&]() {
    nn::BiLstmVars v;
    v.fw = {fwd.param_vars[pi], fwd.param_vars[pi + 1], fwd.param_vars[pi + 2]};
    v.bw = {fwd.param_vars[pi + 3], fwd.param_vars[pi + 4],
            fwd.param_vars[pi + 5]};
    pi += 6;
    return v;
  };
  auto next_linear = [&]() {
    std::pair<nn::Var, nn::Var> v{fwd.param_vars[pi], fwd.param_vars[pi + 1]};
    pi += 2;
    return v;
  };

  nn::Var h = t.constant(mixed_features);
  for (int i = 0; i < cfg_.layers; ++i) h = t.bilstm(h, next_bilstm());

  if (has_feature_heads(cfg_.arch)) {
    for (int s = 0; s < cfg_.num_streams; ++s) {
      auto [w, b] = next_linear();
      fwd.separated_features.push_back(t.affine(h, w, b));
    }
  }

  if (cfg_.arch == Arch::kA3DirectPitCE) {
    for (int s = 0; s < cfg_.num_streams; ++s) {
      auto [w, b] = next_linear();
      fwd.stream_logits.push_back(t.affine(h, w, b));
    }
  } else if (cfg_.arch == Arch::kA4Joint) {
    std::vector<nn::BiLstmVars> rec;
    for (int j = 0; j < cfg_.back_layers; ++j) rec.push_back(next_bilstm());
    std::vector<std::pair<nn::Var, nn::Var>> heads;
    for (int s = 0; s < cfg_.num_streams; ++s) heads.push_back(next_linear());
    // One recognition stack, reused for every separated stream.
    for (int s = 0; s < cfg_.num_streams; ++s) {
      nn::Var g = fwd.separated_features[std::size_t(s)];
      for (const auto& r : rec) g = t.bilstm(g, r);
      fwd.stream_logits.push_back(
          t.affine(g, heads[std::size_t(s)].first,
                   heads[std::size_t(s)].second));
    }
  }
  PITMIX_CHECK(pi == params_.size(), "parameter walk out of sync");
  return fwd;
}

ForwardOutput Model::forward(const Matrix& mixed_features) const {
  nn::Tape t;
  TapeForward fwd = forward_on(t, mixed_features, /*requires_grad=*/false);
  ForwardOutput out;
  for (nn::Var v : fwd.separated_features)
    out.separated_features.push_back(t.value(v));
  for (nn::Var v : fwd.stream_logits) out.stream_logits.push_back(t.value(v));
  return out;
}

LossResult Model::loss(nn::Tape& t, const TapeForward& fwd,
                       const corpus::MixtureSample& sample,
                       const LossOptions& options) const {
  PITMIX_CHECK(sample.sources() == cfg_.num_streams,
               "sample stream count does not match the architecture");
  const Index frames = sample.frames();
  if (has_logit_heads(cfg_.arch))
    PITMIX_CHECK(sample.num_labels == cfg_.num_labels,
                 "sample label set does not match the architecture");

  pit::FrameWeights weights;
  const pit::FrameWeights* wptr = nullptr;
  if (options.mask_silence) {
    weights = silence_weights(sample);
    wptr = &weights;
  }

  std::vector<nn::Var> feature_targets;
  if (has_feature_heads(cfg_.arch)) {
    for (const auto& f : sample.source_features) {
      PITMIX_CHECK(f.num_frames() == frames && f.dim() == cfg_.feature_dim,
                   "reference stream shape mismatch");
      feature_targets.push_back(t.constant(f.frames));
    }
  }

  LossResult res;
  switch (cfg_.arch) {
    case Arch::kA1FixedSep: {
      res.loss_var =
          pit::fixed_mse(t, fwd.separated_features, feature_targets, wptr);
      break;
    }
    case Arch::kA2PitSep: {
      pit::PitResult r =
          pit::pit_mse(t, fwd.separated_features, feature_targets, wptr);
      res.loss_var = r.loss_var;
      res.pit.push_back(std::move(r));
      break;
    }
    case Arch::kA3DirectPitCE: {
      pit::PitResult r =
          pit::pit_ce(t, fwd.stream_logits, sample.source_labels, wptr);
      res.loss_var = r.loss_var;
      res.pit.push_back(std::move(r));
      break;
    }
    case Arch::kA4Joint: {
      pit::JointResult joint = pit::joint_objectives(
          t, fwd.separated_features, feature_targets, fwd.stream_logits,
          sample.source_labels, options.joint_consistent, wptr, wptr);
      res.loss_var = options.phase == LossOptions::Phase::kFrontMse
                         ? joint.j1.loss_var
                         : joint.j2.loss_var;
      res.pit.push_back(std::move(joint.j1));
      res.pit.push_back(std::move(joint.j2));
      break;
    }
  }
  res.value = t.value(res.loss_var)(0, 0);
  return res;
}

std::vector<std::vector<int>> decode_frames(const ForwardOutput& out) {
  PITMIX_CHECK(!out.stream_logits.empty(),
               "decode needs logit streams; this output has none");
  std::vector<std::vector<int>> decoded;
  for (const Matrix& logits : out.stream_logits) {
    std::vector<int> labels(std::size_t(logits.rows()), 0);
    for (Index r = 0; r < logits.rows(); ++r) {
      Index best = 0;
      logits.row(r).maxCoeff(&best);
      labels[std::size_t(r)] = int(best);
    }
    decoded.push_back(std::move(labels));
  }
  return decoded;
}

std::vector<int> collapse_labels(const std::vector<int>& frame_labels) {
  std::vector<int> out;
  int prev = -1;
  for (int l : frame_labels) {
    if (l != prev && l != corpus::kSilenceLabel) out.push_back(l);
    prev = l;
  }
  return out;
}

std::vector<std::vector<int>> decode_streams(const ForwardOutput& out) {
  std::vector<std::vector<int>> decoded;
  for (const auto& frames : decode_frames(out))
    decoded.push_back(collapse_labels(frames));
  return decoded;
}

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream os(path, std::ios::binary);
  PITMIX_CHECK(os.good(), "cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const ArchConfig& cfg = model.config();
  int rec_layers =
      cfg.layers + (cfg.arch == Arch::kA4Joint ? cfg.back_layers : 0);
  write_u32(os, std::uint32_t(cfg.arch));
  write_u32(os, std::uint32_t(rec_layers));
  write_u32(os, std::uint32_t(model.params().size()));
  for (const auto& p : model.params()) {
    write_u32(os, std::uint32_t(p.name.size()));
    os.write(p.name.data(), std::streamsize(p.name.size()));
    write_u32(os, 2);
    write_u32(os, std::uint32_t(p.value.rows()));
    write_u32(os, std::uint32_t(p.value.cols()));
    for (Index r = 0; r < p.value.rows(); ++r)
      for (Index c = 0; c < p.value.cols(); ++c) write_f64(os, p.value(r, c));
  }
  PITMIX_CHECK(os.good(), "checkpoint write failed");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  PITMIX_CHECK(is.good(), "cannot open checkpoint: " + path);
  char magic[7];
  is.read(magic, sizeof(magic));
  PITMIX_CHECK(is.good() && std::equal(magic, magic + 7, kCheckpointMagic),
               "bad checkpoint magic");
  std::uint32_t arch_tag = read_u32(is);
  std::uint32_t rec_layers = read_u32(is);
  std::uint32_t count = read_u32(is);
  PITMIX_CHECK(arch_tag <= 3, "unknown architecture tag");

  std::vector<nn::NamedParam> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = read_u32(is);
    PITMIX_CHECK(name_len >= 1 && name_len <= 256, "bad parameter name");
    std::string name(name_len, '\0');
    is.read(name.data(), std::streamsize(name_len));
    std::uint32_t rank = read_u32(is);
    PITMIX_CHECK(rank == 2, "only rank-2 parameters are stored");
    Index rows = Index(read_u32(is));
    Index cols = Index(read_u32(is));
    PITMIX_CHECK(rows >= 1 && cols >= 1, "bad parameter shape");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = read_f64(is);
    loaded.push_back({std::move(name), std::move(m)});
  }
  PITMIX_CHECK(is.good(), "checkpoint read failed");

  // Reconstruct the configuration from the stored layout.
  ArchConfig cfg;
  cfg.arch = Arch(arch_tag);
  auto find = [&](const std::string& n) -> const Matrix* {
    for (const auto& p : loaded)
      if (p.name == n) return &p.value;
    return nullptr;
  };
  auto count_prefix = [&](const std::string& stem) {
    int n = 0;
    while (find(stem + std::to_string(n) + ".fw.wx") ||
           find(stem + std::to_string(n) + ".w"))
      ++n;
    return n;
  };
  const Matrix* wx0 = find("enc0.fw.wx");
  const Matrix* wh0 = find("enc0.fw.wh");
  PITMIX_CHECK(wx0 && wh0, "checkpoint lacks the first encoder layer");
  cfg.hidden = int(wh0->cols());
  cfg.feature_dim = int(wx0->cols());
  cfg.layers = count_prefix("enc");
  if (cfg.arch == Arch::kA4Joint) cfg.back_layers = count_prefix("rec");
  if (has_feature_heads(cfg.arch)) cfg.num_streams = count_prefix("sep_head");
  if (cfg.arch == Arch::kA3DirectPitCE) cfg.num_streams = count_prefix("out_head");
  if (has_logit_heads(cfg.arch)) {
    const Matrix* ow = find("out_head0.w");
    PITMIX_CHECK(ow, "checkpoint lacks output heads");
    cfg.num_labels = int(ow->rows());
  }
  PITMIX_CHECK(int(rec_layers) ==
                   cfg.layers + (cfg.arch == Arch::kA4Joint ? cfg.back_layers
                                                            : 0),
               "layer count header disagrees with the stored layout");

  std::vector<LayoutEntry> expect = layout(cfg);
  PITMIX_CHECK(expect.size() == loaded.size(),
               "checkpoint parameter count does not match its layout");
  for (std::size_t i = 0; i < expect.size(); ++i) {
    PITMIX_CHECK(expect[i].name == loaded[i].name,
                 "unexpected parameter order at " + loaded[i].name);
    PITMIX_CHECK(expect[i].rows == loaded[i].value.rows() &&
                     expect[i].cols == loaded[i].value.cols(),
                 "unexpected parameter shape at " + loaded[i].name);
  }

  Model model;
  model.cfg_ = cfg;
  model.params_ = std::move(loaded);
  validate(model.cfg_);
  return model;
}

}  // namespace pitmix::models
