// Copyright 2026 The RKT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "rkt/tape.hpp"

namespace rkt::num {

// Builds a scalar loss on `tape` from `params`. Must be deterministic: the
// oracle evaluates it many times with perturbed parameters.
using LossBuilder = std::function<Var(Tape& tape, const ParameterSet& params)>;

struct GradcheckOptions {
  double step = 1e-5;
  std::size_t coordinates = 200;  // all coordinates when the model is smaller
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool passed(double tolerance) const { return max_relative_error <= tolerance; }
};

// Compares reverse-mode gradients against central differences on a random
// subset of coordinates. Error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradcheckResult gradcheck(const LossBuilder& loss, const ParameterSet& params,
                          const GradcheckOptions& options = {});

}  // namespace rkt::num
