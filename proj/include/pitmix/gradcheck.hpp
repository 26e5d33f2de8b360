// gradcheck.hpp - central finite-difference verification of tape gradients.

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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pitmix/autodiff.hpp"

namespace pitmix::nn {

// Builds a scalar loss on the tape from one staged leaf per init matrix.
// Called once per evaluation with a fresh tape; must be deterministic.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Compares tape gradients of build() at init against central differences
// (step fd_step) element by element. The relative error denominator is
// floored at 1e-2, which turns the bound into an absolute one for near-zero
// gradients where finite differences carry roundoff of order step^2.
// corrupt, when nonzero, is added to one analytic gradient entry first; a
// working harness must then report failure.
GradCheckReport check_gradients(const std::string& name,
                                const std::vector<Matrix>& init,
                                const LossBuilder& build,
                                double fd_step = 1e-4, double tol = 1e-4,
                                double corrupt = 0.0);

// Every differentiable op plus the PIT objectives, configs_per_op seeded
// shapes each. Deterministic for a given seed.
std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed,
                                             int configs_per_op = 5,
                                             double corrupt = 0.0);

}  // namespace pitmix::nn
