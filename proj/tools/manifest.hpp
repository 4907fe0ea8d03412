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
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rkt::cli {

// "fnv1a64:" followed by 16 hex digits of the file's bytes.
std::string file_checksum(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // everything after the program name
  nlohmann::json config;          // fully resolved
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // role -> path
  std::map<std::string, std::string> outputs;  // role -> path
  std::map<std::string, std::string> checksums;  // path -> checksum
  double duration_seconds = 0.0;

  // Records checksums of every input and output that exists.
  void checksum_files();
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// Writes to a sibling temporary file and renames it into place.
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

// Same write-then-rename discipline for any text artifact.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace rkt::cli
