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

#include "rkt/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "rkt/error.hpp"
#include "rkt/ops.hpp"
#include "rkt/rng.hpp"

namespace rkt::model {

using num::Tape;
using num::Tensor;
using num::Var;

void RktConfig::validate() const {
  if (model_dim < 2) throw UsageError("model dimension must be at least 2");
  if (window_length < 2) throw UsageError("window length must be at least 2");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("lambda must lie in [0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (!(init_std > 0.0)) throw UsageError("init std must be positive");
  if (!(initial_memory_seconds > 0.0)) {
    throw UsageError("initial memory strength must be positive");
  }
}

double RktConfig::effective_lambda() const {
  return uses_relation_coefficients() ? lambda : 1.0;
}

nlohmann::json config_to_json(const RktConfig& c) {
  return {{"d", c.model_dim},
          {"l", c.window_length},
          {"lambda", c.lambda},
          {"dropout", c.dropout},
          {"use_position", c.use_position},
          {"use_forget", c.use_forget},
          {"use_exercise_relation", c.use_exercise_relation},
          {"query_uses_interaction", c.query_uses_interaction},
          {"init_std", c.init_std},
          {"initial_memory_seconds", c.initial_memory_seconds}};
}

RktConfig config_from_json(const nlohmann::json& j) {
  RktConfig c;
  c.model_dim = j.value("d", c.model_dim);
  c.window_length = j.value("l", c.window_length);
  c.lambda = j.value("lambda", c.lambda);
  c.dropout = j.value("dropout", c.dropout);
  c.use_position = j.value("use_position", c.use_position);
  c.use_forget = j.value("use_forget", c.use_forget);
  c.use_exercise_relation = j.value("use_exercise_relation", c.use_exercise_relation);
  c.query_uses_interaction = j.value("query_uses_interaction", c.query_uses_interaction);
  c.init_std = j.value("init_std", c.init_std);
  c.initial_memory_seconds = j.value("initial_memory_seconds", c.initial_memory_seconds);
  c.validate();
  return c;
}

StudentIndex::StudentIndex(std::vector<std::int64_t> ids) : ids_(std::move(ids)) {
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!rows_.emplace(ids_[r], r).second) {
      throw DataError("duplicate student id " + std::to_string(ids_[r]));
    }
  }
}

StudentIndex StudentIndex::from_sequences(const data::Sequences& sequences) {
  std::vector<std::int64_t> ids;
  ids.reserve(sequences.size());
  for (const auto& s : sequences) ids.push_back(s.student_id);
  return StudentIndex(std::move(ids));
}

std::optional<std::size_t> StudentIndex::find(std::int64_t id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

ModelContext make_context(const corpus::ExerciseEmbeddings& embeddings,
                          relation::RelationMatrix relations, StudentIndex students) {
  const std::size_t E = embeddings.num_exercises(), dw = embeddings.dim();
  if (relations.num_exercises() != 0 && relations.num_exercises() != E) {
    throw DataError("relation matrix covers " + std::to_string(relations.num_exercises()) +
                    " exercises but embeddings cover " + std::to_string(E));
  }
  ModelContext ctx;
  ctx.exercise_table = Tensor({E + 1, dw}, 0.0);
  std::copy(embeddings.matrix.values().begin(), embeddings.matrix.values().end(),
            ctx.exercise_table.data());
  ctx.relations = std::move(relations);
  ctx.students = std::move(students);
  return ctx;
}

num::ParameterSet init_params(const RktConfig& config, std::size_t word_dim,
                              std::size_t num_students, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.model_dim, l = config.window_length;
  Rng rng(seed);
  auto normal = [&](num::Shape shape) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.normal(0.0, config.init_std);
    return t;
  };
  num::ParameterSet p;
  p.add(param::kExerciseProjection, normal({word_dim, d}));
  p.add(param::kPosition, normal({l, 2 * d}));
  p.add(param::kQuery, normal({config.query_uses_interaction ? 2 * d : d, d}));
  p.add(param::kKey, normal({2 * d, d}));
  p.add(param::kValue, normal({2 * d, d}));
  p.add(param::kFfnW1, normal({d, d}));
  p.add(param::kFfnB1, normal({d}));
  p.add(param::kFfnW2, normal({d, d}));
  p.add(param::kFfnB2, normal({d}));
  p.add(param::kAttnNormGain, Tensor({d}, 1.0));
  p.add(param::kAttnNormBias, Tensor({d}, 0.0));
  p.add(param::kFfnNormGain, Tensor({d}, 1.0));
  p.add(param::kFfnNormBias, Tensor({d}, 0.0));
  p.add(param::kOutputWeight, normal({d, 1}));
  p.add(param::kOutputBias, normal({1}));
  p.add(param::kMemoryLogStrength, Tensor::scalar(std::log(config.initial_memory_seconds)));
  p.add(param::kStudentMemoryOffset, Tensor({num_students, 1}, 0.0));
  return p;
}

// ---------------------------------------------------------------------------
// Single-target reference operations.

namespace {

std::vector<double> masked_softmax_1d(std::span<const double> x,
                                      std::span<const std::uint8_t> mask) {
  std::vector<double> y(x.size(), 0.0);
  double mx = -INFINITY;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (mask[j]) mx = std::max(mx, x[j]);
  if (mx == -INFINITY) throw DataError("no valid history position");
  double z = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!mask[j]) continue;
    y[j] = std::exp(x[j] - mx);
    z += y[j];
  }
  for (std::size_t j = 0; j < x.size(); ++j)
    if (mask[j]) y[j] /= z;
  return y;
}

// Row vector times matrix.
std::vector<double> vecmat(std::span<const double> v, const Tensor& m) {
  if (m.rank() != 2 || m.dim(0) != v.size()) {
    throw NumericError("vecmat: vector of length " + std::to_string(v.size()) +
                       " against matrix " + num::shape_string(m.shape()));
  }
  const std::size_t n = m.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < v.size(); ++k)
    for (std::size_t j = 0; j < n; ++j) out[j] += v[k] * m[k * n + j];
  return out;
}

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  const auto v = t.values().subspan(r * t.cols(), t.cols());
  return {v.begin(), v.end()};
}

}  // namespace

std::vector<double> exercise_rel_coeffs(const relation::RelationMatrix& a,
                                        std::size_t target,
                                        std::span<const std::size_t> past,
                                        std::span<const std::uint8_t> mask) {
  std::vector<double> out(past.size());
  for (std::size_t j = 0; j < past.size(); ++j)
    out[j] = mask[j] ? a.at(target, past[j]) : kMaskedLogit;
  return out;
}

std::vector<double> forget_coeffs(std::span<const double> past_times, double target_time,
                                  double memory_strength) {
  if (!(memory_strength > 0.0)) throw DataError("memory strength must be positive");
  std::vector<double> out(past_times.size());
  for (std::size_t j = 0; j < past_times.size(); ++j) {
    const double delta = target_time - past_times[j];
    if (delta < 0.0) throw DataError("clock violation: past interaction after target");
    out[j] = std::exp(-delta / memory_strength);
  }
  return out;
}

std::vector<double> fuse_coeffs(std::span<const double> rel, std::span<const double> forget,
                                std::span<const std::uint8_t> mask, bool use_relation,
                                bool use_forget) {
  if (rel.size() != forget.size() || rel.size() != mask.size()) {
    throw DataError("fuse_coeffs: length mismatch");
  }
  std::vector<double> z(rel.size(), 0.0);
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (!mask[j]) continue;
    if (use_relation) z[j] += rel[j];
    if (use_forget) z[j] += forget[j];
  }
  return masked_softmax_1d(z, mask);
}

std::vector<double> attention_weights(std::span<const double> query, const Tensor& keys,
                                      std::span<const std::uint8_t> mask,
                                      const Tensor& w_query, const Tensor& w_key) {
  const auto q = vecmat(query, w_query);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.size()));
  std::vector<double> scores(keys.rows(), 0.0);
  for (std::size_t j = 0; j < keys.rows(); ++j) {
    if (!mask[j]) continue;
    const auto k = vecmat(row_of(keys, j), w_key);
    double s = 0.0;
    for (std::size_t c = 0; c < q.size(); ++c) s += q[c] * k[c];
    scores[j] = s * inv_sqrt_d;
  }
  return masked_softmax_1d(scores, mask);
}

std::vector<double> fuse_attention(std::span<const double> alpha, std::span<const double> rel,
                                   double lambda) {
  if (alpha.size() != rel.size()) throw DataError("fuse_attention: length mismatch");
  std::vector<double> beta(alpha.size());
  for (std::size_t j = 0; j < beta.size(); ++j)
    beta[j] = lambda * alpha[j] + (1.0 - lambda) * rel[j];
  return beta;
}

std::vector<double> context(std::span<const double> beta, const Tensor& values,
                            const Tensor& w_value) {
  std::vector<double> o(w_value.cols(), 0.0);
  for (std::size_t j = 0; j < beta.size(); ++j) {
    if (beta[j] == 0.0) continue;
    const auto v = vecmat(row_of(values, j), w_value);
    for (std::size_t c = 0; c < o.size(); ++c) o[c] += beta[j] * v[c];
  }
  return o;
}

std::vector<double> ffn_residual(std::span<const double> o, const FfnWeights& w) {
  auto h = vecmat(o, w.w1);
  for (std::size_t c = 0; c < h.size(); ++c) h[c] = std::max(0.0, h[c] + w.b1[c]);
  auto f = vecmat(h, w.w2);
  for (std::size_t c = 0; c < f.size(); ++c) f[c] += w.b2[c] + o[c];
  return f;
}

std::vector<double> ffn_block(std::span<const double> o, const FfnWeights& w) {
  auto x = ffn_residual(o, w);
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  for (std::size_t c = 0; c < x.size(); ++c)
    x[c] = (x[c] - mu) * inv * w.norm_gain[c] + w.norm_bias[c];
  return x;
}

// ---------------------------------------------------------------------------
// Batched forward.

namespace {

enum DropoutSite : std::uint64_t { kInputDropout = 1, kBetaDropout = 2, kFfnDropout = 3 };

struct Encoded {
  Var projected;  // [l, d] exercise embeddings in model space
  Var interaction;  // [l, 2d]
  Var query;  // [l, d] or [l, 2d]
  std::vector<std::uint8_t> causal;  // [l, l]: valid[t] && valid[j] && j < t
  std::vector<std::uint8_t> predicted;
};

void check_window(const data::Window& w, const ModelContext& ctx, const RktConfig& config) {
  const std::size_t l = w.length();
  if (l != config.window_length) {
    throw DataError("window length " + std::to_string(l) + " differs from configured " +
                    std::to_string(config.window_length));
  }
  if (w.correct.size() != l || w.timestamps.size() != l || w.valid.size() != l) {
    throw DataError("window arrays have inconsistent lengths");
  }
  for (std::size_t t = 0; t < l; ++t) {
    if (w.valid[t] && w.exercise_ids[t] >= ctx.num_exercises()) {
      throw DataError("exercise id " + std::to_string(w.exercise_ids[t]) +
                      " out of range for " + std::to_string(ctx.num_exercises()) +
                      " exercises");
    }
  }
}

Encoded encode(Tape& tape, const num::ParameterSet& params, const data::Window& w,
               const ModelContext& ctx, const RktConfig& config, const GraphOptions& opt) {
  check_window(w, ctx, config);
  const std::size_t l = w.length(), d = config.model_dim;
  const bool train = !config.evaluation_mode;

  std::vector<std::size_t> rows(l);
  for (std::size_t t = 0; t < l; ++t) rows[t] = w.valid[t] ? w.exercise_ids[t] : ctx.padding_id();

  Encoded enc;
  Var table = tape.constant(ctx.exercise_table);
  Var text = num::embedding(table, rows);
  enc.projected = num::matmul(text, tape.parameter(params, param::kExerciseProjection));

  Tensor response({l, d}, 0.0);
  Tensor keep({l, 2 * d}, 0.0);
  for (std::size_t t = 0; t < l; ++t) {
    if (!w.valid[t]) continue;
    for (std::size_t c = 0; c < d; ++c) response[t * d + c] = w.correct[t] ? 1.0 : 0.0;
    for (std::size_t c = 0; c < 2 * d; ++c) keep[t * 2 * d + c] = 1.0;
  }
  Var x = num::concat(enc.projected, tape.constant(std::move(response)));
  if (config.use_position) x = num::add(x, tape.parameter(params, param::kPosition));
  Var keep_mask = tape.constant(std::move(keep));
  x = num::mul(x, keep_mask);
  enc.interaction =
      num::dropout(x, config.dropout, hash_combine(opt.dropout_seed, kInputDropout), train);

  enc.query = enc.projected;
  if (config.query_uses_interaction) {
    // The response half stays zero: r_t is the label being predicted.
    Var q = num::concat(enc.projected, tape.constant(Tensor({l, d}, 0.0)));
    if (config.use_position) q = num::add(q, tape.parameter(params, param::kPosition));
    enc.query = num::mul(q, keep_mask);
  }

  enc.causal.assign(l * l, 0);
  enc.predicted.assign(l, 0);
  for (std::size_t t = 0; t < l; ++t) {
    if (!w.valid[t]) continue;
    for (std::size_t j = 0; j < t; ++j) {
      if (w.valid[j]) {
        enc.causal[t * l + j] = 1;
        enc.predicted[t] = 1;
      }
    }
  }
  return enc;
}

Var attention_logits(Tape& tape, const num::ParameterSet& params, const Encoded& enc,
                     const RktConfig& config) {
  Var q = num::matmul(enc.query, tape.parameter(params, param::kQuery));
  Var k = num::matmul(enc.interaction, tape.parameter(params, param::kKey));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config.model_dim));
  return num::scale(num::matmul(q, num::transpose(k)), inv_sqrt_d);
}

// Attention output through the residual/norm, FFN, and prediction head.
WindowGraph head(Tape& tape, const num::ParameterSet& params, const Encoded& enc,
                 Var beta, const RktConfig& config, const GraphOptions& opt) {
  const bool train = !config.evaluation_mode;
  Var v = num::matmul(enc.interaction, tape.parameter(params, param::kValue));
  Var o = num::matmul(beta, v);
  Var h1 = num::layer_norm(num::add(o, enc.projected),
                           tape.parameter(params, param::kAttnNormGain),
                           tape.parameter(params, param::kAttnNormBias));
  Var f = num::add(num::matmul(h1, tape.parameter(params, param::kFfnW1)),
                   tape.parameter(params, param::kFfnB1));
  f = num::add(num::matmul(num::relu(f), tape.parameter(params, param::kFfnW2)),
               tape.parameter(params, param::kFfnB2));
  f = num::dropout(f, config.dropout, hash_combine(opt.dropout_seed, kFfnDropout), train);
  Var h2 = num::layer_norm(num::add(f, h1), tape.parameter(params, param::kFfnNormGain),
                           tape.parameter(params, param::kFfnNormBias));
  WindowGraph g;
  g.logits = num::add(num::matmul(h2, tape.parameter(params, param::kOutputWeight)),
                      tape.parameter(params, param::kOutputBias));
  g.probabilities = num::sigmoid(g.logits);
  g.predicted = enc.predicted;
  return g;
}

// log S_u as a [1, 1] node: global strength plus the student's offset.
Var memory_log_strength(Tape& tape, const num::ParameterSet& params, const data::Window& w,
                        const ModelContext& ctx) {
  Var s0 = tape.parameter(params, param::kMemoryLogStrength);
  if (auto row = ctx.students.find(w.student_id)) {
    const std::size_t rows[] = {*row};
    Var offset = num::embedding(tape.parameter(params, param::kStudentMemoryOffset), rows);
    return num::add(offset, s0);
  }
  return s0;
}

}  // namespace

WindowGraph build_window(Tape& tape, const num::ParameterSet& params, const data::Window& w,
                         const ModelContext& ctx, const RktConfig& config,
                         const GraphOptions& opt) {
  const std::size_t l = w.length();
  Encoded enc = encode(tape, params, w, ctx, config, opt);
  Var alpha = num::masked_softmax(attention_logits(tape, params, enc, config), enc.causal);

  Tensor rel({l, l}, 0.0);
  Tensor elapsed({l, l}, 0.0);
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t j = 0; j < t; ++j) {
      if (!enc.causal[t * l + j]) continue;
      rel[t * l + j] = ctx.relations.at(w.exercise_ids[t], w.exercise_ids[j]);
      const double delta = w.timestamps[t] - w.timestamps[j];
      if (delta < 0.0) throw DataError("clock violation: timestamps decrease within window");
      elapsed[t * l + j] = delta;
    }
  }

  // R^T = exp(-delta * exp(-s_u)); computed for diagnostics even when unused.
  Var forget;
  if (config.use_forget || opt.diagnostics) {
    Var inv_strength = num::exp(num::scale(memory_log_strength(tape, params, w, ctx), -1.0));
    forget = num::exp(num::scale(num::mul(tape.constant(elapsed), inv_strength), -1.0));
  }

  Var beta = alpha;
  const double lambda = config.effective_lambda();
  if (config.uses_relation_coefficients()) {
    Var z;
    if (config.use_exercise_relation && config.use_forget) {
      z = num::add(tape.constant(rel), forget);
    } else if (config.use_exercise_relation) {
      z = tape.constant(rel);
    } else {
      z = forget;
    }
    Var r = num::masked_softmax(z, enc.causal);
    beta = num::add(num::scale(alpha, lambda), num::scale(r, 1.0 - lambda));
  }
  Var beta_dropped = num::dropout(beta, config.dropout,
                                  hash_combine(opt.dropout_seed, kBetaDropout),
                                  !config.evaluation_mode);

  WindowGraph g = head(tape, params, enc, beta_dropped, config, opt);
  if (opt.diagnostics) {
    g.alpha = alpha.value();
    g.beta = beta.value();
    g.rel = std::move(rel);
    g.forget = forget.value();
    for (std::size_t i = 0; i < l * l; ++i)
      if (!enc.causal[i]) g.forget[i] = 0.0;
  }
  return g;
}

WindowGraph build_window_plain(Tape& tape, const num::ParameterSet& params,
                               const data::Window& w, const ModelContext& ctx,
                               const RktConfig& config, const GraphOptions& opt) {
  Encoded enc = encode(tape, params, w, ctx, config, opt);
  Var alpha = num::masked_softmax(attention_logits(tape, params, enc, config), enc.causal);
  Var beta = num::dropout(alpha, config.dropout, hash_combine(opt.dropout_seed, kBetaDropout),
                          !config.evaluation_mode);
  WindowGraph g = head(tape, params, enc, beta, config, opt);
  if (opt.diagnostics) {
    g.alpha = alpha.value();
    g.beta = alpha.value();
  }
  return g;
}

Var window_loss(const WindowGraph& graph, const data::Window& w) {
  const std::size_t l = w.length();
  std::vector<double> labels(l), weights(l);
  for (std::size_t t = 0; t < l; ++t) {
    labels[t] = w.correct[t] ? 1.0 : 0.0;
    weights[t] = graph.predicted[t] ? 1.0 : 0.0;
  }
  return num::binary_cross_entropy_with_logits(graph.logits, std::move(labels),
                                               std::move(weights));
}

std::vector<WindowPrediction> forward(const data::Batch& batch, const ModelContext& ctx,
                                      const RktConfig& config,
                                      const num::ParameterSet& params) {
  RktConfig eval = config;
  eval.evaluation_mode = true;
  std::vector<WindowPrediction> out;
  out.reserve(batch.size());
  for (const auto& w : batch) {
    Tape tape;
    WindowGraph g = build_window(tape, params, w, ctx, eval);
    const auto p = g.probabilities.value().values();
    out.push_back({{p.begin(), p.end()}, g.predicted});
  }
  return out;
}

}  // namespace rkt::model
