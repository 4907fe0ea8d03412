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

#include <span>

namespace rkt::train {

// Probability that a random positive outranks a random negative, ties
// counting one half. Computed from midranks in O(n log n). Throws DataError
// ("AUC undefined") unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Fraction of samples with (score > threshold) == label. Throws DataError on
// empty input.
double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold = 0.5);

}  // namespace rkt::train
