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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rkt/tensor.hpp"

namespace rkt::num {

struct Parameter {
  std::string name;
  Tensor value;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

// One gradient tensor per parameter slot, same order as the ParameterSet.
using Gradients = std::vector<Tensor>;

// Named trainable tensors. Slot indices are stable once added.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t slot(std::string_view name) const;
  bool contains(std::string_view name) const;

  Parameter& operator[](std::size_t slot) { return params_[slot]; }
  const Parameter& operator[](std::size_t slot) const { return params_[slot]; }
  Tensor& value(std::string_view name) { return params_[slot(name)].value; }
  const Tensor& value(std::string_view name) const {
    return params_[slot(name)].value;
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  Gradients zero_gradients() const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<Parameter> params_;
};

class Tape;

// Handle to a node of a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode computation record. Nodes are appended in evaluation order, so
// the node list is already a topological order and backward walks it in
// reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t node)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(const ParameterSet& params, std::size_t slot);
  Var parameter(const ParameterSet& params, std::string_view name) {
    return parameter(params, params.slot(name));
  }

  // Appends a node computed from `inputs`. `backward` reads grad(node) and
  // accumulates into the grads of inputs that need them.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  Tensor& grad(std::size_t id) { return nodes_[id].grad; }

  // Propagates d(output)/d(node) scaled by `seed` and adds the parameter
  // gradients into `grads` (accumulates, never overwrites).
  void backward(Var output, Gradients& grads, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    std::optional<std::size_t> slot;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace rkt::num
