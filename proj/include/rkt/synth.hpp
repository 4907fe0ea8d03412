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
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rkt/corpus.hpp"
#include "rkt/dataio.hpp"
#include "rkt/relation.hpp"

namespace rkt::synth {

struct SkillRelation {
  std::size_t a = 0, b = 0;  // symmetric
  double strength = 0.0;     // in (0, 1]
};

struct SynthConfig {
  std::size_t num_skills = 10;
  std::size_t exercises_per_skill = 8;
  // Default: skills (0,1), (2,3), ... are related with strength 0.5.
  std::vector<SkillRelation> relations = default_relations(10, 0.5);

  std::size_t num_students = 500;
  std::size_t interactions_per_student = 60;

  // Per-student memory strength S (seconds), log-normal around the median.
  // Mastery gains decay by exp(-dt / S). Infinity disables forgetting.
  double memory_median_seconds = 86400.0;
  double memory_log_sd = 0.5;

  // Gaps are exponential with the short mean, or the break mean with
  // probability break_probability.
  double mean_gap_seconds = 1800.0;
  double break_probability = 0.15;
  double mean_break_seconds = 172800.0;

  // Logistic mastery m per (student, skill) around the threshold 0:
  // P(mastered) = sigmoid(sharpness * m).
  double mastery_sharpness = 4.0;
  double initial_mastery_mean = -0.5;
  double initial_mastery_sd = 1.5;
  double practice_gain = 0.3;
  // Probability of practicing the same skill again instead of a uniform draw.
  double skill_stickiness = 0.3;

  double guess = 0.15;
  double slip = 0.1;

  std::size_t word_pool_size = 10;
  std::size_t words_per_text = 10;
  std::size_t shared_words = 3;  // pool words a related skill borrows
  std::size_t common_words_per_text = 3;

  std::uint64_t seed = 7;

  static std::vector<SkillRelation> default_relations(std::size_t num_skills, double strength);
  std::size_t num_exercises() const { return num_skills * exercises_per_skill; }
  void validate() const;  // throws UsageError
};

nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct GroundTruth {
  std::vector<std::size_t> exercise_skill;
  // num_skills x num_skills, symmetric, unit diagonal.
  std::vector<std::vector<double>> skill_relation;
  std::vector<double> student_memory;  // seconds, indexed by student id

  std::size_t num_exercises() const { return exercise_skill.size(); }
  // 0 on the diagonal, otherwise the relation of the two skills.
  double exercise_relation(std::size_t i, std::size_t j) const;
};

nlohmann::json truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const nlohmann::json& j);

struct SynthData {
  data::Sequences logs;
  std::vector<corpus::ExerciseRecord> exercises;
  GroundTruth truth;
};

// Bit-reproducible under config.seed. Timestamps are whole seconds and
// strictly increasing per student.
SynthData generate(const SynthConfig& config);

struct SynthPaths {
  std::filesystem::path logs, exercises, truth;
};
SynthPaths synth_paths(const std::filesystem::path& dir);
// Writes logs.jsonl, exercises.jsonl and truth.json into dir.
SynthPaths write_synth(const SynthData& data, const std::filesystem::path& dir);

// Spearman correlation between estimated A(i, j) and the true exercise
// relation over all ordered pairs i != j (absent entries count as 0). 0 when
// either side is constant. Throws DataError on a universe mismatch.
double relation_recovery_score(const relation::RelationMatrix& estimated,
                               const GroundTruth& truth);

// Pearson correlation of midranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace rkt::synth
