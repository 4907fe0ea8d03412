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

#include "rkt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "rkt/error.hpp"
#include "rkt/rng.hpp"

namespace rkt::num {
namespace {

double evaluate(const LossBuilder& loss, const ParameterSet& params) {
  Tape tape;
  const double v = loss(tape, params).value().item();
  if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite loss value");
  return v;
}

}  // namespace

GradcheckResult gradcheck(const LossBuilder& loss, const ParameterSet& params,
                          const GradcheckOptions& options) {
  Gradients analytic = params.zero_gradients();
  {
    Tape tape;
    Var out = loss(tape, params);
    if (!out.value().all_finite()) throw NumericError("gradcheck: non-finite loss value");
    tape.backward(out, analytic);
  }
  for (const auto& g : analytic) {
    if (!g.all_finite()) throw NumericError("gradcheck: non-finite analytic gradient");
  }

  // Flat (slot, index) list, then a seeded partial shuffle picks the subset.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t s = 0; s < params.size(); ++s)
    for (std::size_t i = 0; i < params[s].value.size(); ++i) coords.emplace_back(s, i);
  const std::size_t n = std::min(options.coordinates, coords.size());
  Rng rng(options.seed);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k + rng.below(coords.size() - k);
    std::swap(coords[k], coords[j]);
  }
  coords.resize(n);
  std::sort(coords.begin(), coords.end());

  GradcheckResult result;
  result.coordinates_checked = n;
  ParameterSet probe = params;
  for (const auto& [slot, idx] : coords) {
    double& w = probe[slot].value[idx];
    const double original = w;
    w = original + options.step;
    const double plus = evaluate(loss, probe);
    w = original - options.step;
    const double minus = evaluate(loss, probe);
    w = original;

    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[slot][idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double err = std::abs(a - numeric) / denom;
    if (err > result.max_relative_error || result.worst_parameter.empty()) {
      result.max_relative_error = std::max(err, result.max_relative_error);
      result.worst_parameter = params[slot].name;
      result.worst_index = idx;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace rkt::num
