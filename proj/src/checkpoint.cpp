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

#include "rkt/checkpoint.hpp"

#include <fstream>

#include "rkt/binary_io.hpp"
#include "rkt/error.hpp"

namespace rkt::num {

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  io::write_magic(out, "RKTM");
  io::write_u32(out, kCheckpointVersion);
  io::write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    io::write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    io::write_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) io::write_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.value.values()) io::write_f64(out, v);
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  io::expect_magic(in, "RKTM");
  const std::uint32_t version = io::read_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = io::read_u32(in, "parameter count");
  ParameterSet params;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t len = io::read_u32(in, "name length");
    std::string name(len, '\0');
    io::read_exact(in, reinterpret_cast<unsigned char*>(name.data()), len, "name");
    const std::uint32_t rank = io::read_u32(in, "rank");
    if (rank == 0) throw DataError("parameter '" + name + "' has rank 0");
    Shape shape(rank);
    for (auto& d : shape) d = io::read_u32(in, "dimension");
    Tensor t(shape);
    for (double& v : t.values()) v = io::read_f64(in, "values");
    params.add(std::move(name), std::move(t));
  }
  return params;
}

}  // namespace rkt::num
