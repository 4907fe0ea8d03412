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

#include <cstdint>
#include <filesystem>

#include "rkt/tape.hpp"

namespace rkt::num {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "RKTM" | version u32 | count u32 | per parameter: name length u32, UTF-8
// name, rank u32, dims u32 each, row-major f64 values. All little-endian.
void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace rkt::num
