// config.hpp - toolkit configuration: desk/paper presets, the key=value
// file format, environment and flag overrides, and the config fingerprint.

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
#include <vector>

#include "pitmix/corpus.hpp"
#include "pitmix/models.hpp"
#include "pitmix/train.hpp"

namespace pitmix::config {

// One bag of settings for the whole pipeline. Coupled fields (feature dim,
// label count, stream count, seed) are set through single keys so the data
// and the model cannot drift apart. Paths stay on the command line.
struct ToolkitConfig {
  std::string preset = "desk";
  corpus::DatasetConfig data;
  models::ArchConfig arch;
  train::TrainConfig trainer;
};

// "desk" fits a laptop-class budget; "paper" keeps the published clip and
// minibatch values with wider stacks, and is not sized for quick runs.
ToolkitConfig preset(const std::string& name);

// Applies one key=value setting. Unknown keys or malformed values throw.
void apply_key(ToolkitConfig& cfg, const std::string& key,
               const std::string& value);

// Lines of key = value; '#' starts a comment. A preset key switches the
// base preset before the remaining keys apply.
ToolkitConfig load_file(const std::string& path);

// Full precedence chain: preset/file, then PITMIX_SEED from the
// environment, then explicit key=value overrides (flags win).
ToolkitConfig resolve(const std::string& file_path,
                      const std::vector<std::string>& overrides);

// Canonical serialization of every key, fixed order; its digest names the
// configuration.
std::string serialize(const ToolkitConfig& cfg);
std::string fingerprint(const ToolkitConfig& cfg);

// Cross-module consistency for a training run (dims, labels, streams).
void validate(const ToolkitConfig& cfg);

}  // namespace pitmix::config
