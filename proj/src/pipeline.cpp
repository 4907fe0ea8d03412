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

#include "rkt/pipeline.hpp"

#include <algorithm>

#include "rkt/error.hpp"

namespace rkt::pipeline {

corpus::ExerciseEmbeddings embed_corpus(const std::vector<corpus::ExerciseRecord>& records,
                                        std::size_t num_exercises,
                                        const CorpusOptions& options) {
  const auto texts = corpus::tokenize_all(records);
  const auto vocab = corpus::Vocabulary::build(texts);
  const auto vectors =
      options.word_vectors
          ? corpus::WordVectors::load(*options.word_vectors, vocab, options.word_seed)
          : corpus::WordVectors::deterministic(vocab, options.word_seed);
  return corpus::embed_exercises(texts, num_exercises, vocab, vectors, options.sif_weight);
}

std::vector<std::optional<std::string>> kc_labels(
    const std::vector<corpus::ExerciseRecord>& records, std::size_t num_exercises) {
  std::vector<std::optional<std::string>> out(num_exercises);
  for (const auto& r : records) {
    if (r.exercise_id < num_exercises) out[r.exercise_id] = r.kc;
  }
  return out;
}

std::size_t universe(const data::Sequences& logs,
                     const std::vector<corpus::ExerciseRecord>& records) {
  std::size_t n = data::count_exercises(logs);
  for (const auto& r : records) n = std::max(n, r.exercise_id + 1);
  return n;
}

relation::RelationMatrix mine_relations(const data::Sequences& logs,
                                        const std::vector<corpus::ExerciseRecord>& records,
                                        const corpus::ExerciseEmbeddings& embeddings,
                                        std::size_t num_exercises,
                                        const relation::RelationOptions& options) {
  const auto kcs = kc_labels(records, num_exercises);
  const bool any_kc = std::any_of(kcs.begin(), kcs.end(), [](const auto& k) { return k.has_value(); });
  relation::RelationInputs in;
  in.num_exercises = num_exercises;
  in.logs = &logs;
  in.embeddings = &embeddings;
  in.kc_labels = any_kc ? &kcs : nullptr;
  return relation::build_relation_matrix(in, options);
}

Prepared prepare(const data::Sequences& logs, const std::vector<corpus::ExerciseRecord>& records,
                 const PrepareOptions& options, const relation::RelationMatrix* relations) {
  Prepared p;
  const std::size_t n = universe(logs, records);
  p.split = data::split_students(logs, options.train_fraction, options.split_seed);
  p.embeddings = embed_corpus(records, n, options.corpus);
  relation::RelationMatrix a =
      relations ? *relations
                : mine_relations(p.split.train, records, p.embeddings, n, options.relation);
  if (a.num_exercises() != n) {
    throw DataError("relation matrix covers " + std::to_string(a.num_exercises()) +
                    " exercises, data has " + std::to_string(n));
  }
  p.experiment.context =
      model::make_context(p.embeddings, std::move(a), model::StudentIndex::from_sequences(p.split.train));
  p.experiment.train = data::make_windows(p.split.train, options.window_length, n);
  p.experiment.test = data::make_windows(p.split.test, options.window_length, n);
  return p;
}

}  // namespace rkt::pipeline
