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
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rkt/corpus.hpp"
#include "rkt/dataio.hpp"
#include "rkt/relation.hpp"
#include "rkt/tape.hpp"

namespace rkt::model {

struct RktConfig {
  std::size_t model_dim = 64;
  std::size_t window_length = 50;
  double lambda = 0.5;
  double dropout = 0.1;
  bool use_position = true;
  bool use_forget = true;
  bool use_exercise_relation = true;
  // Query from the interaction embedding (position included, response half
  // zeroed) instead of the exercise embedding alone. Off by default.
  bool query_uses_interaction = false;
  bool evaluation_mode = true;
  double init_std = 0.01;
  // S_u = exp(s) starts at this many seconds for every student.
  double initial_memory_seconds = 3600.0;

  void validate() const;
  // Both relation sources off leaves nothing to fuse: lambda becomes 1.
  double effective_lambda() const;
  bool uses_relation_coefficients() const { return use_forget || use_exercise_relation; }
};

nlohmann::json config_to_json(const RktConfig& c);
RktConfig config_from_json(const nlohmann::json& j);

// Maps student ids seen in training to rows of the per-student memory
// offsets. Unknown students fall back to the global memory strength.
class StudentIndex {
 public:
  StudentIndex() = default;
  explicit StudentIndex(std::vector<std::int64_t> ids);
  static StudentIndex from_sequences(const data::Sequences& sequences);

  std::size_t size() const { return ids_.size(); }
  std::optional<std::size_t> find(std::int64_t id) const;
  const std::vector<std::int64_t>& ids() const { return ids_; }

 private:
  std::vector<std::int64_t> ids_;
  std::map<std::int64_t, std::size_t> rows_;
};

// Everything the network reads that is not trained.
struct ModelContext {
  num::Tensor exercise_table;  // (E + 1) x d_w, last row is the zero padding row
  relation::RelationMatrix relations;
  StudentIndex students;

  std::size_t num_exercises() const { return exercise_table.rows() - 1; }
  std::size_t padding_id() const { return num_exercises(); }
  std::size_t word_dim() const { return exercise_table.cols(); }
};

ModelContext make_context(const corpus::ExerciseEmbeddings& embeddings,
                          relation::RelationMatrix relations, StudentIndex students);

// Parameter names.
namespace param {
inline constexpr const char* kExerciseProjection = "exercise_projection";
inline constexpr const char* kPosition = "position";
inline constexpr const char* kQuery = "query";
inline constexpr const char* kKey = "key";
inline constexpr const char* kValue = "value";
inline constexpr const char* kFfnW1 = "ffn_w1";
inline constexpr const char* kFfnB1 = "ffn_b1";
inline constexpr const char* kFfnW2 = "ffn_w2";
inline constexpr const char* kFfnB2 = "ffn_b2";
inline constexpr const char* kAttnNormGain = "attn_norm_gain";
inline constexpr const char* kAttnNormBias = "attn_norm_bias";
inline constexpr const char* kFfnNormGain = "ffn_norm_gain";
inline constexpr const char* kFfnNormBias = "ffn_norm_bias";
inline constexpr const char* kOutputWeight = "output_weight";
inline constexpr const char* kOutputBias = "output_bias";
inline constexpr const char* kMemoryLogStrength = "memory_log_strength";
inline constexpr const char* kStudentMemoryOffset = "student_memory_offset";
}  // namespace param

// Normal(0, init_std) weights, unit layer-norm gains, zero layer-norm biases,
// log-memory at log(initial_memory_seconds), zero per-student offsets.
num::ParameterSet init_params(const RktConfig& config, std::size_t word_dim,
                              std::size_t num_students, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Single-target reference operations. `forward` computes all targets of a
// window at once; these give the t-th slice directly.

inline constexpr double kMaskedLogit = -std::numeric_limits<double>::infinity();

// R^E_j = A(target, past_j); masked positions get kMaskedLogit.
std::vector<double> exercise_rel_coeffs(const relation::RelationMatrix& a,
                                        std::size_t target,
                                        std::span<const std::size_t> past,
                                        std::span<const std::uint8_t> mask);

// R^T_j = exp(-(t_target - t_j) / S). Throws DataError on negative elapsed
// time or non-positive S.
std::vector<double> forget_coeffs(std::span<const double> past_times, double target_time,
                                  double memory_strength);

// Masked softmax of R^E + R^T with either term optionally dropped. Throws
// DataError when every position is masked.
std::vector<double> fuse_coeffs(std::span<const double> rel, std::span<const double> forget,
                                std::span<const std::uint8_t> mask, bool use_relation = true,
                                bool use_forget = true);

// alpha = masked softmax((q W^Q)(x_j W^K)^T / sqrt(d)). Rows of `keys` are the
// interaction embeddings; positions with mask 0 get weight 0.
std::vector<double> attention_weights(std::span<const double> query, const num::Tensor& keys,
                                      std::span<const std::uint8_t> mask,
                                      const num::Tensor& w_query, const num::Tensor& w_key);

// beta = lambda * alpha + (1 - lambda) * R.
std::vector<double> fuse_attention(std::span<const double> alpha, std::span<const double> rel,
                                   double lambda);

// o = sum_j beta_j (x_j W^V).
std::vector<double> context(std::span<const double> beta, const num::Tensor& values,
                            const num::Tensor& w_value);

struct FfnWeights {
  num::Tensor w1, b1, w2, b2, norm_gain, norm_bias;
};

// Pre-normalization value F + o where F = ReLU(o W1 + b1) W2 + b2.
std::vector<double> ffn_residual(std::span<const double> o, const FfnWeights& w);
// layer_norm(F + o).
std::vector<double> ffn_block(std::span<const double> o, const FfnWeights& w);

// ---------------------------------------------------------------------------
// Batched forward over one window.

struct WindowGraph {
  num::Var logits;                     // [l, 1]
  num::Var probabilities;              // [l, 1]
  std::vector<std::uint8_t> predicted;  // positions with at least one valid past
  // Diagnostics, [l, l], filled only when requested.
  num::Tensor alpha, rel, forget, beta;
};

struct GraphOptions {
  std::uint64_t dropout_seed = 0;
  bool diagnostics = false;
};

// Records the relation-aware network for every position of `window`.
WindowGraph build_window(num::Tape& tape, const num::ParameterSet& params,
                         const data::Window& window, const ModelContext& ctx,
                         const RktConfig& config, const GraphOptions& options = {});

// The same network with relation coefficients removed entirely
// (beta = alpha). Used to check that the ablation switches neutralize R.
WindowGraph build_window_plain(num::Tape& tape, const num::ParameterSet& params,
                               const data::Window& window, const ModelContext& ctx,
                               const RktConfig& config, const GraphOptions& options = {});

// Sum of cross-entropy over predicted positions.
num::Var window_loss(const WindowGraph& graph, const data::Window& window);

struct WindowPrediction {
  std::vector<double> probability;  // length l; meaningful where predicted
  std::vector<std::uint8_t> predicted;
};

// Evaluation-mode forward (no dropout) of every window in the batch.
std::vector<WindowPrediction> forward(const data::Batch& batch, const ModelContext& ctx,
                                      const RktConfig& config,
                                      const num::ParameterSet& params);

}  // namespace rkt::model
