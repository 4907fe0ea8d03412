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

#include "rkt/tape.hpp"

#include <algorithm>

#include "rkt/error.hpp"

namespace rkt::num {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw NumericError("duplicate parameter '" + name + "'");
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParameterSet::slot(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw NumericError("unknown parameter '" + std::string(name) + "'");
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Gradients ParameterSet::zero_gradients() const {
  Gradients grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.emplace_back(p.value.shape(), 0.0);
  return grads;
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, {}, std::nullopt, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const ParameterSet& params, std::size_t slot) {
  nodes_.push_back({params[slot].value, {}, {}, {}, slot, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) {
    return nodes_[i].needs_grad;
  });
  nodes_.push_back({std::move(value), {}, std::move(inputs),
                    needs ? std::move(backward) : BackwardFn{}, std::nullopt,
                    needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var output, Gradients& grads, double seed) {
  if (&output.tape() != this) throw NumericError("backward: foreign variable");
  const Tensor& out = value(output.id());
  if (out.size() != 1) {
    throw NumericError("backward: output must be scalar, got shape " +
                       shape_string(out.shape()));
  }
  for (std::size_t i = 0; i <= output.id(); ++i) {
    Node& n = nodes_[i];
    if (n.needs_grad) n.grad = Tensor(n.value.shape(), 0.0);
  }
  if (!nodes_[output.id()].needs_grad) return;
  nodes_[output.id()].grad[0] = seed;

  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.slot) {
      Tensor& g = grads.at(*n.slot);
      if (g.shape() != n.grad.shape()) {
        throw NumericError("backward: gradient buffer shape mismatch for slot " +
                           std::to_string(*n.slot));
      }
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

}  // namespace rkt::num
