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
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rkt/dataio.hpp"
#include "rkt/gradcheck.hpp"
#include "rkt/model.hpp"
#include "rkt/optim.hpp"
#include "rkt/tape.hpp"

namespace rkt::train {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = data::kDefaultBatchSize;
  std::uint64_t seed = 0;
  num::AdamOptions adam;
  std::optional<double> clip_norm;  // off unless set (5.0 is the usual value)
  bool early_stopping = false;      // needs validation windows
  std::size_t patience = 5;
  // Gradient accumulation shards per batch. Results depend on this, never on
  // the thread count.
  std::size_t shards = 8;
  std::size_t threads = 1;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean cross-entropy per predicted position
  std::optional<double> validation_auc;
  std::optional<double> validation_accuracy;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  std::string checkpoint;
  double wall_clock_seconds = 0.0;  // not serialized: reports stay reproducible
};

nlohmann::json train_report_to_json(const TrainReport& r);

struct GroupMetrics {
  std::size_t max_interactions = 0;  // students with fewer interactions than this
  std::size_t count = 0;
  std::optional<double> auc;  // absent when a group has a single class
  std::optional<double> accuracy;
};

struct EvalReport {
  double auc = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
  std::vector<GroupMetrics> groups;
  std::vector<double> scores;  // per prediction, window order
  std::vector<int> labels;
};

nlohmann::json eval_report_to_json(const EvalReport& r);

struct EvalOptions {
  bool online_update = false;
  double online_learning_rate = 1e-3;
  bool groups = false;
};

// Minimizes the mean cross-entropy over predicted positions with Adam.
// Deterministic under options.seed. Throws NumericError on a non-finite loss,
// naming the epoch and batch.
TrainReport train(const model::RktConfig& config, num::ParameterSet& params,
                  std::span<const data::Window> windows, const model::ModelContext& ctx,
                  const TrainOptions& options,
                  std::span<const data::Window> validation = {});

// Static evaluation, or online evaluation with one gradient step after each
// revealed response. Throws DataError on an empty test set.
EvalReport evaluate(const num::ParameterSet& params, std::span<const data::Window> windows,
                    const model::ModelContext& ctx, const model::RktConfig& config,
                    const EvalOptions& options = {});

inline constexpr std::size_t kGroupBounds[] = {10, 100, 1000, 10000};

// ---------------------------------------------------------------------------
// Ablations.

struct AblationVariant {
  std::string name;
  bool no_position = false;
  bool no_forget = false;
  bool no_relation = false;

  model::RktConfig apply(model::RktConfig base) const;
};

// full, PE, TE, RE, PE+TE, PE+RE, RE+TE, PE+RE+TE
std::vector<AblationVariant> ablation_variants();
AblationVariant ablation_variant(const std::string& name);

struct ExperimentData {
  std::vector<data::Window> train;
  std::vector<data::Window> test;
  model::ModelContext context;
};

struct AblationRow {
  AblationVariant variant;
  TrainReport train;
  EvalReport eval;
};

// Trains and evaluates one variant from a fresh initialization.
AblationRow run_variant(const model::RktConfig& base, const AblationVariant& variant,
                        const ExperimentData& data, const TrainOptions& train_options,
                        const EvalOptions& eval_options, std::uint64_t init_seed);

// One train + evaluate per variant with a shared seed and split.
std::vector<AblationRow> ablation_grid(const model::RktConfig& base, const ExperimentData& data,
                                       const TrainOptions& train_options,
                                       const EvalOptions& eval_options,
                                       std::uint64_t init_seed);

std::string format_ablation_table(std::span<const AblationRow> rows);

// ---------------------------------------------------------------------------
// Attention export.

struct AttentionRow {
  std::size_t t = 0, j = 0;
  double alpha = 0.0, rel = 0.0, forget = 0.0, beta = 0.0;
};

std::vector<AttentionRow> attention_rows(const num::ParameterSet& params,
                                         const data::Window& window,
                                         const model::ModelContext& ctx,
                                         const model::RktConfig& config);

// CSV with columns exactly t,j,alpha,rE,rT,beta.
void export_attention(const num::ParameterSet& params, const data::Window& window,
                      const model::ModelContext& ctx, const model::RktConfig& config,
                      const std::filesystem::path& path);

// l x l matrix of beta averaged over the windows in which each target row is
// predicted, so every populated row sums to one.
num::Tensor aggregate_attention(const num::ParameterSet& params,
                                std::span<const data::Window> windows,
                                const model::ModelContext& ctx,
                                const model::RktConfig& config);

// CSV t,j,beta of the aggregate matrix (populated rows only).
void export_attention_aggregate(const num::Tensor& matrix, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Full-model gradient check on a small random problem.

struct ModelGradcheckOptions {
  std::size_t model_dim = 8;
  std::size_t window_length = 5;
  std::size_t num_exercises = 6;
  std::size_t word_dim = 6;
  std::size_t windows = 3;
  // Larger than the training default so every gradient is well above the
  // finite-difference noise floor.
  double init_std = 0.3;
  std::uint64_t seed = 0;
  num::GradcheckOptions check;
};

// Dropout off, all components on, summed window losses.
num::GradcheckResult model_gradcheck(const ModelGradcheckOptions& options);

}  // namespace rkt::train
