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

#include "rkt/tape.hpp"

namespace rkt::num {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;  // decoupled: lr * decay * w is subtracted
};

struct AdamState {
  AdamOptions options;
  Gradients first_moment;
  Gradients second_moment;
  std::size_t step = 0;

  AdamState() = default;
  AdamState(const ParameterSet& params, AdamOptions opts);
};

// Bias-corrected Adam with decoupled weight decay. Throws NumericError on a
// non-finite gradient, leaving the parameters untouched.
void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state);

// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_gradient_norm(Gradients& grads, double max_norm);

}  // namespace rkt::num
