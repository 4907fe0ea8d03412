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

#include "rkt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "rkt/error.hpp"
#include "rkt/rng.hpp"

namespace rkt::synth {

namespace {

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze",
                                      "po", "da", "fe", "gu", "hi", "jo", "be", "co", "wu",
                                      "xi", "yo", "ma", "ni", "re", "su", "ta"};
constexpr const char* kCommonWords[] = {"find", "the", "value", "of", "given", "that",
                                        "compute", "show", "what", "is", "if", "then",
                                        "solve", "for", "each", "a", "an", "and"};
constexpr const char* kTexCommands[] = {"frac", "sqrt", "sin", "cos", "log", "int",
                                        "sum", "lim", "binom", "vec", "tan", "exp"};
constexpr const char* kVariables[] = {"x", "y", "n", "k", "t"};

// Stream tags keep the per-student draws for gaps, exercise choice and
// responses independent of one another.
enum Stream : std::uint64_t { kText = 1, kStudent, kGap, kChoice, kResponse };

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

std::string pseudo_word(Rng& rng) {
  std::string w;
  const std::size_t n = 2 + rng.below(2);
  for (std::size_t i = 0; i < n; ++i) w += kSyllables[rng.below(std::size(kSyllables))];
  return w;
}

std::vector<std::vector<std::string>> word_pools(const SynthConfig& c, Rng& rng) {
  std::set<std::string> used(std::begin(kCommonWords), std::end(kCommonWords));
  std::vector<std::vector<std::string>> pools(c.num_skills);
  for (auto& pool : pools) {
    while (pool.size() < c.word_pool_size) {
      std::string w = pseudo_word(rng);
      if (used.insert(w).second) pool.push_back(std::move(w));
    }
  }
  // Related skills swap part of their pools so their texts overlap.
  for (const auto& r : c.relations) {
    const std::size_t k = std::min(c.shared_words, c.word_pool_size);
    for (std::size_t i = 0; i < k; ++i) pools[r.b][c.word_pool_size - 1 - i] = pools[r.a][i];
  }
  return pools;
}

std::string exercise_text(const SynthConfig& c, const std::vector<std::string>& pool,
                          std::size_t skill, Rng& rng) {
  std::string text;
  for (std::size_t i = 0; i < c.common_words_per_text; ++i) {
    text += kCommonWords[rng.below(std::size(kCommonWords))];
    text += ' ';
  }
  for (std::size_t i = 0; i < c.words_per_text; ++i) {
    text += pool[rng.below(pool.size())];
    text += ' ';
  }
  const char* cmd = kTexCommands[skill % std::size(kTexCommands)];
  const char* var = kVariables[rng.below(std::size(kVariables))];
  text += "$\\" + std::string(cmd) + "{" + var + "} + " + std::to_string(1 + rng.below(9)) +
          "$";
  return text;
}

struct SkillState {
  double base = 0.0;
  double mastery = 0.0;
  double updated = 0.0;
};

double current(const SkillState& s, double now, double memory) {
  if (!std::isfinite(memory)) return s.mastery;
  return s.base + (s.mastery - s.base) * std::exp(-(now - s.updated) / memory);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError("synthetic config: " + what);
}

std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t k = i;
    while (k < order.size() && v[order[k]] == v[order[i]]) ++k;
    const double mid = 0.5 * static_cast<double>(i + 1 + k);
    for (std::size_t m = i; m < k; ++m) r[order[m]] = mid;
    i = k;
  }
  return r;
}

}  // namespace

std::vector<SkillRelation> SynthConfig::default_relations(std::size_t num_skills,
                                                          double strength) {
  std::vector<SkillRelation> out;
  for (std::size_t k = 0; k + 1 < num_skills; k += 2) out.push_back({k, k + 1, strength});
  return out;
}

void SynthConfig::validate() const {
  require(num_skills > 0 && exercises_per_skill > 0, "skill and exercise counts must be positive");
  require(num_students > 0 && interactions_per_student > 0,
          "student and interaction counts must be positive");
  require(word_pool_size > 0 && words_per_text > 0, "word counts must be positive");
  require(shared_words <= word_pool_size, "shared_words exceeds word_pool_size");
  require(memory_median_seconds > 0.0, "memory strength must be positive");
  require(mastery_sharpness > 0.0, "mastery_sharpness must be positive");
  require(memory_log_sd >= 0.0, "memory_log_sd must be non-negative");
  require(mean_gap_seconds > 0.0 && mean_break_seconds > 0.0, "gap means must be positive");
  for (double p : {guess, slip, break_probability, skill_stickiness}) {
    require(p >= 0.0 && p <= 1.0, "probabilities must lie in [0, 1]");
  }
  for (const auto& r : relations) {
    require(r.a < num_skills && r.b < num_skills && r.a != r.b, "relation names a bad skill");
    require(r.strength > 0.0 && r.strength <= 1.0, "relation strength must lie in (0, 1]");
  }
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  nlohmann::json rel = nlohmann::json::array();
  for (const auto& r : c.relations) rel.push_back({r.a, r.b, r.strength});
  return {{"num_skills", c.num_skills},
          {"exercises_per_skill", c.exercises_per_skill},
          {"relations", rel},
          {"num_students", c.num_students},
          {"interactions_per_student", c.interactions_per_student},
          {"memory_median_seconds",
           std::isfinite(c.memory_median_seconds) ? nlohmann::json(c.memory_median_seconds)
                                                  : nlohmann::json("inf")},
          {"memory_log_sd", c.memory_log_sd},
          {"mean_gap_seconds", c.mean_gap_seconds},
          {"break_probability", c.break_probability},
          {"mean_break_seconds", c.mean_break_seconds},
          {"mastery_sharpness", c.mastery_sharpness},
          {"initial_mastery_mean", c.initial_mastery_mean},
          {"initial_mastery_sd", c.initial_mastery_sd},
          {"practice_gain", c.practice_gain},
          {"skill_stickiness", c.skill_stickiness},
          {"guess", c.guess},
          {"slip", c.slip},
          {"word_pool_size", c.word_pool_size},
          {"words_per_text", c.words_per_text},
          {"shared_words", c.shared_words},
          {"common_words_per_text", c.common_words_per_text},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("num_skills", c.num_skills);
    get("exercises_per_skill", c.exercises_per_skill);
    get("num_students", c.num_students);
    get("interactions_per_student", c.interactions_per_student);
    if (j.contains("memory_median_seconds")) {
      const auto& m = j.at("memory_median_seconds");
      c.memory_median_seconds = m.is_string() && m.get<std::string>() == "inf"
                                    ? std::numeric_limits<double>::infinity()
                                    : m.get<double>();
    }
    get("memory_log_sd", c.memory_log_sd);
    get("mean_gap_seconds", c.mean_gap_seconds);
    get("break_probability", c.break_probability);
    get("mean_break_seconds", c.mean_break_seconds);
    get("mastery_sharpness", c.mastery_sharpness);
    get("initial_mastery_mean", c.initial_mastery_mean);
    get("initial_mastery_sd", c.initial_mastery_sd);
    get("practice_gain", c.practice_gain);
    get("skill_stickiness", c.skill_stickiness);
    get("guess", c.guess);
    get("slip", c.slip);
    get("word_pool_size", c.word_pool_size);
    get("words_per_text", c.words_per_text);
    get("shared_words", c.shared_words);
    get("common_words_per_text", c.common_words_per_text);
    get("seed", c.seed);
    if (j.contains("relations")) {
      c.relations.clear();
      for (const auto& r : j.at("relations")) {
        c.relations.push_back(
            {r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>(), r.at(2).get<double>()});
      }
    } else {
      c.relations = SynthConfig::default_relations(c.num_skills, 0.5);
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

double GroundTruth::exercise_relation(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return skill_relation.at(exercise_skill.at(i)).at(exercise_skill.at(j));
}

nlohmann::json truth_to_json(const GroundTruth& t) {
  return {{"exercise_skill", t.exercise_skill},
          {"skill_relation", t.skill_relation},
          {"student_memory", t.student_memory}};
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  GroundTruth t;
  try {
    t.exercise_skill = j.at("exercise_skill").get<std::vector<std::size_t>>();
    t.skill_relation = j.at("skill_relation").get<std::vector<std::vector<double>>>();
    // Infinite strengths serialize as null.
    for (const auto& v : j.at("student_memory")) {
      t.student_memory.push_back(v.is_null() ? std::numeric_limits<double>::infinity()
                                             : v.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("ground truth: ") + e.what());
  }
  return t;
}

SynthData generate(const SynthConfig& c) {
  c.validate();
  SynthData out;
  const std::size_t n_ex = c.num_exercises();

  GroundTruth& truth = out.truth;
  truth.exercise_skill.resize(n_ex);
  for (std::size_t e = 0; e < n_ex; ++e) truth.exercise_skill[e] = e / c.exercises_per_skill;
  truth.skill_relation.assign(c.num_skills, std::vector<double>(c.num_skills, 0.0));
  for (std::size_t k = 0; k < c.num_skills; ++k) truth.skill_relation[k][k] = 1.0;
  for (const auto& r : c.relations) {
    truth.skill_relation[r.a][r.b] = r.strength;
    truth.skill_relation[r.b][r.a] = r.strength;
  }

  Rng text_rng(hash_combine(c.seed, kText));
  const auto pools = word_pools(c, text_rng);
  for (std::size_t e = 0; e < n_ex; ++e) {
    const std::size_t s = truth.exercise_skill[e];
    out.exercises.push_back(
        {e, exercise_text(c, pools[s], s, text_rng), "skill_" + std::to_string(s)});
  }

  out.logs.reserve(c.num_students);
  for (std::size_t u = 0; u < c.num_students; ++u) {
    const std::uint64_t useed = hash_combine(c.seed, 1000 + u);
    Rng student(hash_combine(useed, kStudent));
    Rng gaps(hash_combine(useed, kGap));
    Rng choice(hash_combine(useed, kChoice));
    Rng response(hash_combine(useed, kResponse));

    const double memory = std::isfinite(c.memory_median_seconds)
                              ? c.memory_median_seconds * std::exp(c.memory_log_sd * student.normal())
                              : c.memory_median_seconds;
    truth.student_memory.push_back(memory);

    std::vector<SkillState> skills(c.num_skills);
    for (auto& s : skills) {
      s.base = student.normal(c.initial_mastery_mean, c.initial_mastery_sd);
      s.mastery = s.base;
    }

    data::StudentSequence seq;
    seq.student_id = static_cast<std::int64_t>(u);
    double now = std::floor(gaps.uniform(0.0, 86400.0));
    std::size_t skill = choice.below(c.num_skills);
    for (std::size_t n = 0; n < c.interactions_per_student; ++n) {
      if (n > 0) {
        const double mean =
            gaps.bernoulli(c.break_probability) ? c.mean_break_seconds : c.mean_gap_seconds;
        now += std::max(1.0, std::round(gaps.exponential(mean)));
        if (!choice.bernoulli(c.skill_stickiness)) skill = choice.below(c.num_skills);
      }
      const std::size_t e = skill * c.exercises_per_skill + choice.below(c.exercises_per_skill);

      const double m = current(skills[skill], now, memory);
      const bool mastered = response.bernoulli(sigmoid(c.mastery_sharpness * m));
      const bool correct = mastered ? response.bernoulli(1.0 - c.slip) : response.bernoulli(c.guess);
      seq.interactions.push_back({e, correct ? 1 : 0, now});

      // Practice raises this skill and, scaled by strength, its relatives.
      for (std::size_t k = 0; k < c.num_skills; ++k) {
        const double w = truth.skill_relation[skill][k];
        if (w == 0.0) continue;
        SkillState& s = skills[k];
        s.mastery = current(s, now, memory) + c.practice_gain * w;
        s.updated = now;
      }
    }
    out.logs.push_back(std::move(seq));
  }
  return out;
}

SynthPaths synth_paths(const std::filesystem::path& dir) {
  return {dir / "logs.jsonl", dir / "exercises.jsonl", dir / "truth.json"};
}

SynthPaths write_synth(const SynthData& d, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  const SynthPaths p = synth_paths(dir);
  data::write_logs(d.logs, p.logs);
  corpus::write_exercise_records(d.exercises, p.exercises);
  std::ofstream out(p.truth, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.truth.string());
  out << truth_to_json(d.truth).dump(2) << '\n';
  return p;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const auto rx = midranks(x), ry = midranks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rx[i] - mean, b = ry[i] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double relation_recovery_score(const relation::RelationMatrix& estimated,
                               const GroundTruth& truth) {
  const std::size_t n = truth.num_exercises();
  if (estimated.num_exercises() != n) {
    throw DataError("relation recovery: matrix covers " +
                    std::to_string(estimated.num_exercises()) + " exercises, truth has " +
                    std::to_string(n));
  }
  std::vector<double> est, ref;
  est.reserve(n * n);
  ref.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      est.push_back(estimated.at(i, j));
      ref.push_back(truth.exercise_relation(i, j));
    }
  }
  return spearman(est, ref);
}

}  // namespace rkt::synth
