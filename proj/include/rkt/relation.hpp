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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rkt/corpus.hpp"
#include "rkt/dataio.hpp"

namespace rkt::relation {

inline constexpr double kDefaultTheta = 0.8;
inline constexpr std::size_t kDefaultMinSupport = 5;

// 2x2 table for an ordered pair (target i, earlier j). The first index is the
// correctness of j, the second the correctness of i.
struct ContingencyTable {
  std::uint64_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;

  std::uint64_t row0() const { return n00 + n01; }  // j incorrect
  std::uint64_t row1() const { return n10 + n11; }  // j correct
  std::uint64_t col0() const { return n00 + n10; }  // i incorrect
  std::uint64_t col1() const { return n01 + n11; }  // i correct
  std::uint64_t total() const { return n00 + n01 + n10 + n11; }

  void add(int correct_j, int correct_i);
  ContingencyTable& operator+=(const ContingencyTable& o);
  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

// Pairs each occurrence of i with the latest earlier occurrence of j in the
// same student sequence. Throws DataError when i or j >= num_exercises.
ContingencyTable build_contingency(const data::Sequences& logs, std::size_t i,
                                   std::size_t j, std::size_t num_exercises);

// Tables for every ordered pair (i, j), i != j, that co-occurs. Keyed by
// i * num_exercises + j.
class PairTables {
 public:
  explicit PairTables(std::size_t num_exercises) : num_exercises_(num_exercises) {}

  void accumulate(const data::StudentSequence& sequence);
  PairTables& operator+=(const PairTables& other);

  std::size_t num_exercises() const { return num_exercises_; }
  const ContingencyTable* find(std::size_t i, std::size_t j) const;
  const std::unordered_map<std::uint64_t, ContingencyTable>& tables() const {
    return tables_;
  }

 private:
  std::size_t num_exercises_;
  std::unordered_map<std::uint64_t, ContingencyTable> tables_;
};

PairTables accumulate_contingency(const data::Sequences& logs, std::size_t num_exercises);

// (n11 n00 - n01 n10) / sqrt(n1* n0* n*1 n*0); 0 when any margin is 0.
double phi(const ContingencyTable& table);

// u.v / (|u| |v|). Throws DataError("undefined similarity") for a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

enum class Method : int {
  kSameConcept = 1,
  kText = 2,
  kPerformance = 3,
  kTextAndPerformance = 4,
};

Method method_from_int(int m);

struct RelationEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;
  friend bool operator==(const RelationEntry&, const RelationEntry&) = default;
};

// Directed sparse E x E matrix in compressed-row form. Row i holds the
// influence of earlier exercises j on target i.
class RelationMatrix {
 public:
  RelationMatrix() = default;
  RelationMatrix(std::size_t num_exercises, double theta, Method method,
                 std::vector<RelationEntry> entries);

  std::size_t num_exercises() const { return num_exercises_; }
  double theta() const { return theta_; }
  Method method() const { return method_; }
  std::size_t nnz() const { return cols_.size(); }
  double density() const;

  // 0 for absent entries and for ids outside the universe (padding).
  double at(std::size_t i, std::size_t j) const;
  std::vector<RelationEntry> entries() const;

  friend bool operator==(const RelationMatrix&, const RelationMatrix&) = default;

 private:
  std::size_t num_exercises_ = 0;
  double theta_ = kDefaultTheta;
  Method method_ = Method::kTextAndPerformance;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

struct RelationInputs {
  std::size_t num_exercises = 0;
  const data::Sequences* logs = nullptr;
  const corpus::ExerciseEmbeddings* embeddings = nullptr;
  const std::vector<std::optional<std::string>>* kc_labels = nullptr;
};

struct RelationOptions {
  Method method = Method::kTextAndPerformance;
  double theta = kDefaultTheta;
  std::size_t min_support = kDefaultMinSupport;
};

// Method 1: 1 for same knowledge concept. Method 2: cosine > theta.
// Method 3: phi > theta. Method 4: phi + cosine when the sum exceeds theta.
// Pairs with fewer than min_support observations have phi = 0; exercises
// without text have similarity 0. Throws UsageError naming the method when a
// required input is missing.
RelationMatrix build_relation_matrix(const RelationInputs& inputs,
                                     const RelationOptions& options);

// CSV "i,j,value" plus a JSON sidecar {"num_exercises", "theta", "method"}
// written next to it as <path>.json.
void save_relation_matrix(const RelationMatrix& a, const std::filesystem::path& csv_path);
RelationMatrix load_relation_matrix(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace rkt::relation
