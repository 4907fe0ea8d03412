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
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace rkt::data {

inline constexpr std::size_t kDefaultWindowLength = 50;
inline constexpr std::size_t kDefaultBatchSize = 128;

struct Interaction {
  std::size_t exercise_id = 0;
  int correct = 0;
  double timestamp = 0.0;  // seconds

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct StudentSequence {
  std::int64_t student_id = 0;
  std::vector<Interaction> interactions;

  friend bool operator==(const StudentSequence&, const StudentSequence&) = default;
};

// Ordered by student id.
using Sequences = std::vector<StudentSequence>;

// JSONL {"student_id", "exercise_id", "correct", "timestamp"}. Sequences come
// back time-sorted (stable for ties) and students with fewer than two
// interactions are dropped. Malformed lines raise DataError with the line
// number.
Sequences parse_logs(const std::filesystem::path& path);
Sequences parse_logs(std::istream& in, const std::string& source_name);

void write_logs(const Sequences& sequences, const std::filesystem::path& path);

// One past the largest exercise id seen.
std::size_t count_exercises(const Sequences& sequences);
std::size_t count_interactions(const Sequences& sequences);

// Fixed-length slice of a student sequence. Valid positions form a suffix;
// padded positions hold `padding_id`, correctness 0, and the first valid
// timestamp.
struct Window {
  std::int64_t student_id = 0;
  std::size_t sequence_length = 0;  // interactions of the whole student history
  std::vector<std::size_t> exercise_ids;
  std::vector<int> correct;
  std::vector<double> timestamps;
  std::vector<std::uint8_t> valid;

  std::size_t length() const { return exercise_ids.size(); }
  std::size_t first_valid() const;
  std::size_t valid_count() const { return length() - first_valid(); }

  friend bool operator==(const Window&, const Window&) = default;
};

using Batch = std::vector<Window>;

// Splits into ceil(|X| / l) chunks of length l from the start of the sequence
// and left-pads the last one. Requires l >= 2.
std::vector<Window> window(const StudentSequence& sequence, std::size_t length,
                           std::size_t padding_id);
std::vector<Window> make_windows(const Sequences& sequences, std::size_t length,
                                 std::size_t padding_id);

std::vector<Batch> make_batches(std::span<const Window> windows, std::size_t batch_size);

struct StudentSplit {
  Sequences train;
  Sequences test;
};

// Student-level partition; round(fraction * n) students (clamped to
// [1, n - 1]) go to train. Deterministic under seed.
StudentSplit split_students(const Sequences& sequences, double fraction,
                            std::uint64_t seed);

}  // namespace rkt::data
