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
#include <span>
#include <vector>

#include "rkt/tape.hpp"

namespace rkt::num {

// Closed primitive set. Every op records its exact reverse-mode rule on the
// tape of its first argument. Shape errors throw NumericError naming the op.

// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
// [m,n] -> [n,m]
Var transpose(Var a);

// Element-wise. `b` may match `a`, be a single value, or be a row vector of
// length a.cols() broadcast over the rows of `a`.
Var add(Var a, Var b);
Var mul(Var a, Var b);

// Concatenates along the last axis: [m,p] ++ [m,q] -> [m,p+q].
Var concat(Var a, Var b);

// Softmax over the last axis restricted to positions where mask != 0.
// Masked positions are exactly 0; a fully masked row is all zeros.
Var masked_softmax(Var x, std::vector<std::uint8_t> mask);

Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var scale(Var x, double c);

// Layer normalization over the last axis with learned gain/bias of length
// x.cols(). Uses the population variance.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

// Inverted dropout. Identity when !train or rate == 0. The keep decision of
// element i is a pure function of (seed, i).
Var dropout(Var x, double rate, std::uint64_t seed, bool train);

// Gathers rows of a [V,n] table: ids -> [ids.size(), n].
Var embedding(Var table, std::span<const std::size_t> ids);

Var sum(Var x);
Var mean(Var x);

// sum_i w_i * -(r_i log sigmoid(z_i) + (1 - r_i) log(1 - sigmoid(z_i))),
// evaluated in the stable softplus form. Returns a scalar.
Var binary_cross_entropy_with_logits(Var logits, std::vector<double> labels,
                                     std::vector<double> weights);

}  // namespace rkt::num
