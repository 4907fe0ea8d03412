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
#include <optional>
#include <string>
#include <vector>

#include "rkt/corpus.hpp"
#include "rkt/dataio.hpp"
#include "rkt/relation.hpp"
#include "rkt/train.hpp"

namespace rkt::pipeline {

struct CorpusOptions {
  std::uint64_t word_seed = 0;
  std::optional<std::filesystem::path> word_vectors;  // text format; random if absent
  double sif_weight = corpus::kDefaultSifWeight;
};

corpus::ExerciseEmbeddings embed_corpus(const std::vector<corpus::ExerciseRecord>& records,
                                        std::size_t num_exercises,
                                        const CorpusOptions& options = {});

std::vector<std::optional<std::string>> kc_labels(
    const std::vector<corpus::ExerciseRecord>& records, std::size_t num_exercises);

// Exercise universe covering both the logs and the texts.
std::size_t universe(const data::Sequences& logs,
                     const std::vector<corpus::ExerciseRecord>& records);

struct PrepareOptions {
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  std::size_t window_length = data::kDefaultWindowLength;
  relation::RelationOptions relation;
  CorpusOptions corpus;
};

struct Prepared {
  data::StudentSplit split;
  corpus::ExerciseEmbeddings embeddings;
  train::ExperimentData experiment;
};

// Split by student, embed the texts, mine relations from the training logs
// only (unless `relations` is given) and window both sides.
Prepared prepare(const data::Sequences& logs, const std::vector<corpus::ExerciseRecord>& records,
                 const PrepareOptions& options,
                 const relation::RelationMatrix* relations = nullptr);

relation::RelationMatrix mine_relations(const data::Sequences& logs,
                                        const std::vector<corpus::ExerciseRecord>& records,
                                        const corpus::ExerciseEmbeddings& embeddings,
                                        std::size_t num_exercises,
                                        const relation::RelationOptions& options);

}  // namespace rkt::pipeline
