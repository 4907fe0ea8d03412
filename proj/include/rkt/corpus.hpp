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
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rkt/tensor.hpp"

namespace rkt::corpus {

inline constexpr std::size_t kMaxTokens = 200;
inline constexpr std::size_t kWordDim = 50;
inline constexpr double kDefaultSifWeight = 1e-3;

// Lowercased word and TeX tokens. Inside $...$ spans, backslash commands
// become their name, letter and digit runs split apart, and brackets vanish.
// Operators (+ - * / = < > ^ _ |) are tokens everywhere; other punctuation is
// dropped. At most kMaxTokens tokens are kept.
std::vector<std::string> tokenize(std::string_view text);

// One line of the exercise-text JSONL file.
struct ExerciseRecord {
  std::size_t exercise_id = 0;
  std::string text;
  std::optional<std::string> kc;
};

struct ExerciseText {
  std::size_t exercise_id = 0;
  std::vector<std::string> tokens;
};

std::vector<ExerciseRecord> read_exercise_records(const std::filesystem::path& path);
void write_exercise_records(std::span<const ExerciseRecord> records,
                            const std::filesystem::path& path);
std::vector<ExerciseText> tokenize_all(std::span<const ExerciseRecord> records);

class Vocabulary {
 public:
  // Ids follow first occurrence order. Throws DataError("empty corpus") when
  // no exercise has any token.
  static Vocabulary build(std::span<const ExerciseText> texts);

  std::size_t size() const { return words_.size(); }
  std::optional<std::size_t> find(std::string_view word) const;
  const std::string& word(std::size_t id) const { return words_.at(id); }
  double probability(std::size_t id) const { return probs_.at(id); }
  std::size_t count(std::size_t id) const { return counts_.at(id); }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::string> words_;
  std::vector<std::size_t> counts_;
  std::vector<double> probs_;
};

enum class VectorSource { kLoaded, kDeterministicRandom };

class WordVectors {
 public:
  // Unit-variance Gaussian rows, each a pure function of (word, seed).
  static WordVectors deterministic(const Vocabulary& vocab, std::uint64_t seed,
                                   std::size_t dim = kWordDim);

  // Text format: word followed by `dim` decimals per line. Vocabulary words
  // missing from the file fall back to their deterministic vector.
  static WordVectors load(const std::filesystem::path& path, const Vocabulary& vocab,
                          std::uint64_t seed, std::size_t dim = kWordDim);

  static std::vector<double> deterministic_vector(std::string_view word,
                                                  std::uint64_t seed, std::size_t dim);

  std::size_t dim() const { return matrix_.cols(); }
  std::size_t rows() const { return matrix_.rows(); }
  std::span<const double> row(std::size_t id) const {
    return matrix_.values().subspan(id * dim(), dim());
  }
  VectorSource source() const { return source_; }
  const num::Tensor& matrix() const { return matrix_; }
  void scale(double c);

 private:
  num::Tensor matrix_;
  VectorSource source_ = VectorSource::kDeterministicRandom;
};

// (1/|s|) * sum_{w in s} a / (a + p(w)) * f(w), counting repeated words each
// time. Throws DataError on empty input or an out-of-vocabulary token.
std::vector<double> sif_embed(std::span<const std::string> tokens, const Vocabulary& vocab,
                              const WordVectors& vectors, double a = kDefaultSifWeight);

struct ExerciseEmbeddings {
  num::Tensor matrix;  // num_exercises x d_w
  double sif_weight = kDefaultSifWeight;

  std::size_t num_exercises() const { return matrix.rows(); }
  std::size_t dim() const { return matrix.cols(); }
  std::span<const double> row(std::size_t e) const {
    return matrix.values().subspan(e * dim(), dim());
  }
  bool has_text(std::size_t e) const;
};

// Embeds every exercise with text. Unknown words map to the zero UNK vector
// and do not count towards |s|. Exercises without text (or with only unknown
// words) get a zero row.
ExerciseEmbeddings embed_exercises(std::span<const ExerciseText> texts,
                                   std::size_t num_exercises, const Vocabulary& vocab,
                                   const WordVectors& vectors,
                                   double a = kDefaultSifWeight);

// "RKTE" | version u32 | rows u32 | cols u32 | row-major f64, little-endian.
void save_embeddings(const ExerciseEmbeddings& emb, const std::filesystem::path& path);
ExerciseEmbeddings load_embeddings(const std::filesystem::path& path);

}  // namespace rkt::corpus
