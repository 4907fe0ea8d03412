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

#include "rkt/optim.hpp"

#include <cmath>
#include <string>

#include "rkt/error.hpp"

namespace rkt::num {

AdamState::AdamState(const ParameterSet& params, AdamOptions opts)
    : options(opts),
      first_moment(params.zero_gradients()),
      second_moment(params.zero_gradients()) {}

void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw NumericError("adam_step: " + std::to_string(grads.size()) +
                       " gradients / " + std::to_string(state.first_moment.size()) +
                       " moment buffers for " + std::to_string(params.size()) +
                       " parameters");
  }
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (grads[s].shape() != params[s].value.shape() ||
        state.first_moment[s].shape() != params[s].value.shape()) {
      throw NumericError("adam_step: shape mismatch for parameter '" +
                         params[s].name + "'");
    }
    if (!grads[s].all_finite()) {
      throw NumericError("adam_step: non-finite gradient for parameter '" +
                         params[s].name + "'");
    }
  }

  const AdamOptions& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t s = 0; s < params.size(); ++s) {
    Tensor& w = params[s].value;
    Tensor& m = state.first_moment[s];
    Tensor& v = state.second_moment[s];
    const Tensor& g = grads[s];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      const double decay = o.learning_rate * o.weight_decay * w[i];
      w[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon) + decay;
    }
  }
}

double clip_gradient_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g.values()) v *= f;
  }
  return norm;
}

}  // namespace rkt::num
