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

#include "pitmix/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pitmix::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw Error("bad boolean '" + v + "' (use 0/1/true/false)");
}

models::Arch parse_arch(const std::string& v) {
  if (v == "A1" || v == "A1_FixedSep") return models::Arch::kA1FixedSep;
  if (v == "A2" || v == "A2_PitSep") return models::Arch::kA2PitSep;
  if (v == "A3" || v == "A3_DirectPitCE") return models::Arch::kA3DirectPitCE;
  if (v == "A4" || v == "A4_Joint") return models::Arch::kA4Joint;
  throw Error("unknown architecture '" + v + "'");
}

std::string arch_key(models::Arch a) {
  switch (a) {
    case models::Arch::kA1FixedSep:
      return "A1";
    case models::Arch::kA2PitSep:
      return "A2";
    case models::Arch::kA3DirectPitCE:
      return "A3";
    case models::Arch::kA4Joint:
      return "A4";
  }
  throw Error("unknown architecture");
}

std::vector<double> parse_grid(const std::string& v) {
  std::vector<double> out;
  std::string field;
  std::istringstream is(v);
  while (std::getline(is, field, ',')) out.push_back(parse_double(trim(field)));
  PITMIX_CHECK(!out.empty(), "empty SNR grid");
  return out;
}

std::string grid_str(const std::vector<double>& g) {
  std::string out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) out += ",";
    out += format_double(g[i]);
  }
  return out;
}

}  // namespace

ToolkitConfig preset(const std::string& name) {
  ToolkitConfig cfg;
  cfg.preset = name;
  if (name == "desk") {
    cfg.data.num_speakers = 20;
    cfg.data.num_mixtures = 400;
    cfg.data.num_valid_mixtures = 80;
    cfg.data.num_test_mixtures = 100;
    cfg.data.num_sources = 2;
    cfg.data.num_labels = 21;
    cfg.data.min_utt_frames = 100;
    cfg.data.max_utt_frames = 200;
    cfg.data.features.sample_rate = 8000;
    cfg.data.features.n_mels = 16;
    cfg.arch.feature_dim = 16;
    cfg.arch.num_labels = 21;
    cfg.arch.hidden = 32;
    cfg.arch.layers = 2;
    cfg.arch.back_layers = 2;
    cfg.trainer.lr = 1e-2;
    cfg.trainer.clip = 0.1;
    cfg.trainer.clip_mode = nn::ClipMode::kElement;
    cfg.trainer.minibatch_utts = 8;
    cfg.trainer.max_epochs = 30;
    cfg.trainer.schedule = {10, 10, 10, 0.1};
  } else if (name == "paper") {
    // Published clip/minibatch with wider stacks; corpus stays synthetic.
    cfg.data.num_speakers = 20;
    cfg.data.num_mixtures = 400;
    cfg.data.num_valid_mixtures = 80;
    cfg.data.num_test_mixtures = 100;
    cfg.data.num_sources = 2;
    cfg.data.num_labels = 21;
    cfg.data.min_utt_frames = 200;
    cfg.data.max_utt_frames = 400;
    cfg.data.features.sample_rate = 16000;
    cfg.data.features.n_mels = 40;
    cfg.arch.feature_dim = 40;
    cfg.arch.num_labels = 21;
    cfg.arch.hidden = 768;
    cfg.arch.layers = 6;
    cfg.arch.back_layers = 3;
    cfg.trainer.lr = 2e-3;
    cfg.trainer.clip = 0.0003;
    cfg.trainer.clip_mode = nn::ClipMode::kElement;
    cfg.trainer.minibatch_utts = 8;
    cfg.trainer.max_epochs = 50;
    cfg.trainer.schedule = {15, 15, 20, 0.1};
  } else {
    throw Error("unknown preset '" + name + "' (desk or paper)");
  }
  return cfg;
}

void apply_key(ToolkitConfig& cfg, const std::string& key,
               const std::string& value) {
  // Coupled keys write both sides so data and model stay consistent.
  if (key == "seed") {
    std::uint64_t s = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), s);
    PITMIX_CHECK(res.ec == std::errc() && res.ptr == value.data() + value.size(),
                 "bad seed '" + value + "'");
    cfg.data.seed = s;
    cfg.trainer.seed = s;
  } else if (key == "arch") {
    cfg.arch.arch = parse_arch(value);
  } else if (key == "sources") {
    cfg.data.num_sources = int(parse_long(value));
    cfg.arch.num_streams = int(parse_long(value));
  } else if (key == "layers") {
    cfg.arch.layers = int(parse_long(value));
  } else if (key == "back_layers") {
    cfg.arch.back_layers = int(parse_long(value));
  } else if (key == "hidden") {
    cfg.arch.hidden = int(parse_long(value));
  } else if (key == "num_labels") {
    cfg.data.num_labels = int(parse_long(value));
    cfg.arch.num_labels = int(parse_long(value));
  } else if (key == "n_mels") {
    cfg.data.features.n_mels = int(parse_long(value));
    cfg.arch.feature_dim = int(parse_long(value));
  } else if (key == "speakers") {
    cfg.data.num_speakers = int(parse_long(value));
  } else if (key == "mixtures") {
    cfg.data.num_mixtures = int(parse_long(value));
  } else if (key == "valid_mixtures") {
    cfg.data.num_valid_mixtures = int(parse_long(value));
  } else if (key == "test_mixtures") {
    cfg.data.num_test_mixtures = int(parse_long(value));
  } else if (key == "snr_grid") {
    cfg.data.snr_grid_db = parse_grid(value);
  } else if (key == "min_utt_frames") {
    cfg.data.min_utt_frames = int(parse_long(value));
  } else if (key == "max_utt_frames") {
    cfg.data.max_utt_frames = int(parse_long(value));
  } else if (key == "min_unit_frames") {
    cfg.data.min_unit_frames = int(parse_long(value));
  } else if (key == "max_unit_frames") {
    cfg.data.max_unit_frames = int(parse_long(value));
  } else if (key == "frame_len") {
    cfg.data.features.frame_len = parse_double(value);
  } else if (key == "frame_hop") {
    cfg.data.features.frame_hop = parse_double(value);
  } else if (key == "sample_rate") {
    cfg.data.features.sample_rate = int(parse_long(value));
  } else if (key == "fft") {
    cfg.data.features.n_fft = int(parse_long(value));
  } else if (key == "floor") {
    cfg.data.features.floor = parse_double(value);
  } else if (key == "pad_noise") {
    cfg.data.features.pad_noise_amplitude = parse_double(value);
  } else if (key == "lr") {
    cfg.trainer.lr = parse_double(value);
  } else if (key == "clip") {
    cfg.trainer.clip = parse_double(value);
  } else if (key == "clip_mode") {
    if (value == "element") cfg.trainer.clip_mode = nn::ClipMode::kElement;
    else if (value == "norm") cfg.trainer.clip_mode = nn::ClipMode::kNorm;
    else throw Error("clip_mode must be element or norm");
  } else if (key == "minibatch") {
    cfg.trainer.minibatch_utts = int(parse_long(value));
  } else if (key == "epochs") {
    cfg.trainer.max_epochs = int(parse_long(value));
  } else if (key == "patience") {
    cfg.trainer.plateau_patience = int(parse_long(value));
  } else if (key == "lr_floor") {
    cfg.trainer.lr_floor = parse_double(value);
  } else if (key == "mask_silence") {
    cfg.trainer.mask_silence = parse_bool(value);
  } else if (key == "jobs") {
    cfg.trainer.jobs = int(parse_long(value));
  } else if (key == "phase1_epochs") {
    cfg.trainer.schedule.phase1_epochs = int(parse_long(value));
  } else if (key == "phase2_epochs") {
    cfg.trainer.schedule.phase2_epochs = int(parse_long(value));
  } else if (key == "phase3_epochs") {
    cfg.trainer.schedule.phase3_epochs = int(parse_long(value));
  } else if (key == "joint_lr_mult") {
    cfg.trainer.schedule.joint_lr_mult = parse_double(value);
  } else {
    throw Error("unknown config key '" + key + "'");
  }
}

ToolkitConfig load_file(const std::string& path) {
  std::ifstream is(path);
  PITMIX_CHECK(is.good(), "cannot open config: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    PITMIX_CHECK(eq != std::string::npos,
                 path + ":" + std::to_string(lineno) + ": expected key = value");
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }

  std::string base = "desk";
  bool seen_preset = false;
  for (const auto& [k, v] : pairs) {
    if (k != "preset") continue;
    PITMIX_CHECK(!seen_preset, path + ": multiple preset keys");
    seen_preset = true;
    base = v;
  }
  ToolkitConfig cfg = preset(base);
  for (const auto& [k, v] : pairs)
    if (k != "preset") apply_key(cfg, k, v);
  return cfg;
}

ToolkitConfig resolve(const std::string& file_path,
                      const std::vector<std::string>& overrides) {
  ToolkitConfig cfg = file_path.empty() ? preset("desk") : load_file(file_path);
  if (const char* env = std::getenv("PITMIX_SEED"))
    apply_key(cfg, "seed", env);
  for (const std::string& o : overrides) {
    std::size_t eq = o.find('=');
    PITMIX_CHECK(eq != std::string::npos, "override needs key=value: " + o);
    std::string key = trim(o.substr(0, eq));
    if (key == "preset") throw Error("preset can only be set in the file");
    apply_key(cfg, key, trim(o.substr(eq + 1)));
  }
  return cfg;
}

std::string serialize(const ToolkitConfig& cfg) {
  std::ostringstream os;
  os << "preset=" << cfg.preset << "\n"
     << "seed=" << cfg.data.seed << "\n"
     << "arch=" << arch_key(cfg.arch.arch) << "\n"
     << "sources=" << cfg.data.num_sources << "\n"
     << "layers=" << cfg.arch.layers << "\n"
     << "back_layers=" << cfg.arch.back_layers << "\n"
     << "hidden=" << cfg.arch.hidden << "\n"
     << "num_labels=" << cfg.data.num_labels << "\n"
     << "n_mels=" << cfg.data.features.n_mels << "\n"
     << "speakers=" << cfg.data.num_speakers << "\n"
     << "mixtures=" << cfg.data.num_mixtures << "\n"
     << "valid_mixtures=" << cfg.data.num_valid_mixtures << "\n"
     << "test_mixtures=" << cfg.data.num_test_mixtures << "\n"
     << "snr_grid=" << grid_str(cfg.data.snr_grid_db) << "\n"
     << "min_utt_frames=" << cfg.data.min_utt_frames << "\n"
     << "max_utt_frames=" << cfg.data.max_utt_frames << "\n"
     << "min_unit_frames=" << cfg.data.min_unit_frames << "\n"
     << "max_unit_frames=" << cfg.data.max_unit_frames << "\n"
     << "frame_len=" << format_double(cfg.data.features.frame_len) << "\n"
     << "frame_hop=" << format_double(cfg.data.features.frame_hop) << "\n"
     << "sample_rate=" << cfg.data.features.sample_rate << "\n"
     << "fft=" << cfg.data.features.n_fft << "\n"
     << "floor=" << format_double(cfg.data.features.floor) << "\n"
     << "pad_noise=" << format_double(cfg.data.features.pad_noise_amplitude)
     << "\n"
     << "lr=" << format_double(cfg.trainer.lr) << "\n"
     << "clip=" << format_double(cfg.trainer.clip) << "\n"
     << "clip_mode="
     << (cfg.trainer.clip_mode == nn::ClipMode::kElement ? "element" : "norm")
     << "\n"
     << "minibatch=" << cfg.trainer.minibatch_utts << "\n"
     << "epochs=" << cfg.trainer.max_epochs << "\n"
     << "patience=" << cfg.trainer.plateau_patience << "\n"
     << "lr_floor=" << format_double(cfg.trainer.lr_floor) << "\n"
     << "mask_silence=" << (cfg.trainer.mask_silence ? 1 : 0) << "\n"
     << "jobs=" << cfg.trainer.jobs << "\n"
     << "phase1_epochs=" << cfg.trainer.schedule.phase1_epochs << "\n"
     << "phase2_epochs=" << cfg.trainer.schedule.phase2_epochs << "\n"
     << "phase3_epochs=" << cfg.trainer.schedule.phase3_epochs << "\n"
     << "joint_lr_mult=" << format_double(cfg.trainer.schedule.joint_lr_mult)
     << "\n";
  return os.str();
}

std::string fingerprint(const ToolkitConfig& cfg) {
  return hex16(fnv1a64(serialize(cfg)));
}

void validate(const ToolkitConfig& cfg) {
  dsp::validate(cfg.data.features);
  corpus::validate(cfg.data);
  models::validate(cfg.arch);
  train::validate(cfg.trainer);
  PITMIX_CHECK(cfg.arch.feature_dim == cfg.data.features.n_mels,
               "model feature dim must match the front end");
  PITMIX_CHECK(cfg.arch.num_labels == cfg.data.num_labels,
               "model label count must match the corpus");
  PITMIX_CHECK(cfg.arch.num_streams == cfg.data.num_sources,
               "model stream count must match the corpus sources");
  PITMIX_CHECK(cfg.data.seed == cfg.trainer.seed,
               "data and trainer seeds drifted apart");
}

}  // namespace pitmix::config
