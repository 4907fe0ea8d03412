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

#include "rkt/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "rkt/error.hpp"
#include "rkt/rng.hpp"

namespace rkt::data {

Sequences parse_logs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction log " + path.string());
  return parse_logs(in, path.string());
}

Sequences parse_logs(std::istream& in, const std::string& source_name) {
  std::map<std::int64_t, std::vector<Interaction>> by_student;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source_name + ":" + std::to_string(lineno) + ": ";
    std::int64_t student = 0;
    Interaction x;
    try {
      const auto j = nlohmann::json::parse(line);
      student = j.at("student_id").get<std::int64_t>();
      const auto ex = j.at("exercise_id").get<long long>();
      if (ex < 0) throw DataError("negative exercise_id");
      x.exercise_id = static_cast<std::size_t>(ex);
      x.correct = j.at("correct").get<int>();
      x.timestamp = j.at("timestamp").get<double>();
    } catch (const std::exception& e) {
      throw DataError(where + "malformed interaction: " + e.what());
    }
    if (x.correct != 0 && x.correct != 1) {
      throw DataError(where + "correct must be 0 or 1");
    }
    if (!std::isfinite(x.timestamp) || x.timestamp < 0.0) {
      throw DataError(where + "negative or non-finite timestamp");
    }
    by_student[student].push_back(x);
  }

  Sequences out;
  for (auto& [student, xs] : by_student) {
    if (xs.size() < 2) continue;
    std::stable_sort(xs.begin(), xs.end(), [](const Interaction& a, const Interaction& b) {
      return a.timestamp < b.timestamp;
    });
    out.push_back({student, std::move(xs)});
  }
  return out;
}

void write_logs(const Sequences& sequences, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write interaction log " + path.string());
  for (const auto& s : sequences) {
    for (const auto& x : s.interactions) {
      nlohmann::json j = {{"student_id", s.student_id},
                          {"exercise_id", x.exercise_id},
                          {"correct", x.correct},
                          {"timestamp", x.timestamp}};
      out << j.dump() << '\n';
    }
  }
}

std::size_t count_exercises(const Sequences& sequences) {
  std::size_t n = 0;
  for (const auto& s : sequences)
    for (const auto& x : s.interactions) n = std::max(n, x.exercise_id + 1);
  return n;
}

std::size_t count_interactions(const Sequences& sequences) {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.interactions.size();
  return n;
}

std::size_t Window::first_valid() const {
  const auto it = std::find(valid.begin(), valid.end(), std::uint8_t{1});
  return static_cast<std::size_t>(it - valid.begin());
}

std::vector<Window> window(const StudentSequence& sequence, std::size_t length,
                           std::size_t padding_id) {
  if (length < 2) throw UsageError("window length must be at least 2");
  const auto& xs = sequence.interactions;
  std::vector<Window> out;
  for (std::size_t start = 0; start < xs.size(); start += length) {
    const std::size_t n = std::min(length, xs.size() - start);
    const std::size_t pad = length - n;
    Window w;
    w.student_id = sequence.student_id;
    w.sequence_length = xs.size();
    w.exercise_ids.assign(length, padding_id);
    w.correct.assign(length, 0);
    w.timestamps.assign(length, xs[start].timestamp);
    w.valid.assign(length, 0);
    for (std::size_t k = 0; k < n; ++k) {
      const Interaction& x = xs[start + k];
      w.exercise_ids[pad + k] = x.exercise_id;
      w.correct[pad + k] = x.correct;
      w.timestamps[pad + k] = x.timestamp;
      w.valid[pad + k] = 1;
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Window> make_windows(const Sequences& sequences, std::size_t length,
                                 std::size_t padding_id) {
  std::vector<Window> out;
  for (const auto& s : sequences) {
    auto ws = window(s, length, padding_id);
    out.insert(out.end(), std::make_move_iterator(ws.begin()),
               std::make_move_iterator(ws.end()));
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const Window> windows, std::size_t batch_size) {
  if (batch_size == 0) throw UsageError("batch size must be positive");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < windows.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, windows.size() - i);
    out.emplace_back(windows.begin() + static_cast<std::ptrdiff_t>(i),
                     windows.begin() + static_cast<std::ptrdiff_t>(i + n));
  }
  return out;
}

StudentSplit split_students(const Sequences& sequences, double fraction,
                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw UsageError("split fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = sequences.size();
  if (n < 2) throw DataError("need at least 2 students to split");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  StudentSplit split;
  for (auto i : train_idx) split.train.push_back(sequences[i]);
  for (auto i : test_idx) split.test.push_back(sequences[i]);
  return split;
}

}  // namespace rkt::data
