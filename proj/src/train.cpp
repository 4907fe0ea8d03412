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

#include "rkt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "rkt/error.hpp"
#include "rkt/metrics.hpp"
#include "rkt/ops.hpp"
#include "rkt/rng.hpp"

namespace rkt::train {

using model::RktConfig;
using num::Gradients;
using num::ParameterSet;
using num::Tape;

namespace {

struct ShardResult {
  Gradients grads;
  double loss = 0.0;
};

std::size_t count_predicted(const data::Window& w) {
  return w.valid_count() > 0 ? w.valid_count() - 1 : 0;
}

void add_into(Gradients& dst, const Gradients& src) {
  for (std::size_t s = 0; s < dst.size(); ++s)
    for (std::size_t i = 0; i < dst[s].size(); ++i) dst[s][i] += src[s][i];
}

// Runs forward/backward for the windows of one shard. `scale` turns the
// summed loss into the batch mean.
void run_shard(const ParameterSet& params, std::span<const data::Window* const> windows,
               std::span<const std::uint64_t> seeds, const model::ModelContext& ctx,
               const RktConfig& config, double scale, ShardResult& out) {
  out.grads = params.zero_gradients();
  out.loss = 0.0;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    Tape tape;
    model::GraphOptions opt;
    opt.dropout_seed = seeds[k];
    auto g = model::build_window(tape, params, *windows[k], ctx, config, opt);
    num::Var loss = model::window_loss(g, *windows[k]);
    out.loss += loss.value().item();
    tape.backward(loss, out.grads, scale);
  }
}

std::string fmt(double v, int prec = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

TrainReport train(const RktConfig& config, ParameterSet& params,
                  std::span<const data::Window> windows, const model::ModelContext& ctx,
                  const TrainOptions& options, std::span<const data::Window> validation) {
  config.validate();
  if (windows.empty()) throw DataError("train: empty training set");
  if (options.epochs == 0) throw UsageError("train: epochs must be at least 1");
  if (options.early_stopping && validation.empty()) {
    throw UsageError("train: early stopping needs validation windows");
  }
  const auto started = std::chrono::steady_clock::now();

  RktConfig train_config = config;
  train_config.evaluation_mode = false;
  num::AdamState adam(params, options.adam);
  const std::size_t shards = std::max<std::size_t>(1, options.shards);
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, shards));

  TrainReport report;
  ParameterSet best = params;
  double best_auc = -1.0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(windows.size());
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(hash_combine(options.seed, epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.below(i + 1)]);
    }

    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    const std::size_t n_batches = (order.size() + options.batch_size - 1) / options.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * options.batch_size;
      const std::size_t hi = std::min(order.size(), lo + options.batch_size);

      std::size_t predicted = 0;
      for (std::size_t i = lo; i < hi; ++i) predicted += count_predicted(windows[order[i]]);
      if (predicted == 0) continue;
      const double scale = 1.0 / static_cast<double>(predicted);

      // Window k of the batch goes to shard k % shards.
      std::vector<std::vector<const data::Window*>> shard_windows(shards);
      std::vector<std::vector<std::uint64_t>> shard_seeds(shards);
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t k = i - lo;
        shard_windows[k % shards].push_back(&windows[order[i]]);
        shard_seeds[k % shards].push_back(
            hash_combine(hash_combine(options.seed, epoch), hash_combine(b, k)));
      }
      std::vector<ShardResult> results(shards);
      auto work = [&](std::size_t first) {
        for (std::size_t s = first; s < shards; s += threads) {
          run_shard(params, shard_windows[s], shard_seeds[s], ctx, train_config, scale,
                    results[s]);
        }
      };
      if (threads == 1) {
        work(0);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
      }

      Gradients grads = std::move(results[0].grads);
      double batch_loss = results[0].loss;
      for (std::size_t s = 1; s < shards; ++s) {
        add_into(grads, results[s].grads);
        batch_loss += results[s].loss;
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      if (options.clip_norm) num::clip_gradient_norm(grads, *options.clip_norm);
      num::adam_step(params, grads, adam);
      epoch_loss += batch_loss;
      epoch_count += predicted;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_count ? epoch_loss / static_cast<double>(epoch_count) : 0.0;
    if (!validation.empty()) {
      const EvalReport ev = evaluate(params, validation, ctx, config);
      stats.validation_auc = ev.auc;
      stats.validation_accuracy = ev.accuracy;
    }
    report.epochs.push_back(stats);

    if (options.early_stopping) {
      if (*stats.validation_auc > best_auc) {
        best_auc = *stats.validation_auc;
        best = params;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= options.patience) {
        break;
      }
    } else {
      report.best_epoch = epoch;
    }
  }
  if (options.early_stopping) params = std::move(best);

  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

nlohmann::json train_report_to_json(const TrainReport& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    nlohmann::json j = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    if (e.validation_auc) j["validation_auc"] = *e.validation_auc;
    if (e.validation_accuracy) j["validation_accuracy"] = *e.validation_accuracy;
    epochs.push_back(std::move(j));
  }
  return {{"epochs", std::move(epochs)},
          {"best_epoch", r.best_epoch},
          {"checkpoint", r.checkpoint}};
}

EvalReport evaluate(const ParameterSet& params, std::span<const data::Window> windows,
                    const model::ModelContext& ctx, const RktConfig& config,
                    const EvalOptions& options) {
  if (windows.empty()) throw DataError("evaluate: empty test set");
  RktConfig eval = config;
  eval.evaluation_mode = true;

  EvalReport report;
  std::vector<std::size_t> lengths;
  if (!options.online_update) {
    for (const auto& w : windows) {
      Tape tape;
      auto g = model::build_window(tape, params, w, ctx, eval);
      const auto& p = g.probabilities.value();
      for (std::size_t t = 0; t < w.length(); ++t) {
        if (!g.predicted[t]) continue;
        report.scores.push_back(p[t]);
        report.labels.push_back(w.correct[t]);
        lengths.push_back(w.sequence_length);
      }
    }
  } else {
    ParameterSet live = params;
    num::AdamOptions adam_options;
    adam_options.learning_rate = options.online_learning_rate;
    num::AdamState adam(live, adam_options);
    for (const auto& w : windows) {
      for (std::size_t t = 0; t < w.length(); ++t) {
        Tape tape;
        auto g = model::build_window(tape, live, w, ctx, eval);
        if (!g.predicted[t]) continue;
        report.scores.push_back(g.probabilities.value()[t]);
        report.labels.push_back(w.correct[t]);
        lengths.push_back(w.sequence_length);

        // Reveal response t and take one step on its loss alone.
        std::vector<double> labels(w.length(), 0.0), weights(w.length(), 0.0);
        labels[t] = w.correct[t] ? 1.0 : 0.0;
        weights[t] = 1.0;
        auto loss = num::binary_cross_entropy_with_logits(g.logits, std::move(labels),
                                                          std::move(weights));
        Gradients grads = live.zero_gradients();
        tape.backward(loss, grads);
        num::adam_step(live, grads, adam);
      }
    }
  }
  if (report.scores.empty()) throw DataError("evaluate: no predictable positions");

  report.count = report.scores.size();
  report.auc = auc(report.scores, report.labels);
  report.accuracy = accuracy(report.scores, report.labels);

  if (options.groups) {
    for (std::size_t bound : kGroupBounds) {
      GroupMetrics gm;
      gm.max_interactions = bound;
      std::vector<double> s;
      std::vector<int> y;
      for (std::size_t i = 0; i < report.count; ++i) {
        if (lengths[i] < bound) {
          s.push_back(report.scores[i]);
          y.push_back(report.labels[i]);
        }
      }
      gm.count = s.size();
      if (!s.empty()) {
        gm.accuracy = accuracy(s, y);
        const bool both = std::any_of(y.begin(), y.end(), [](int v) { return v == 1; }) &&
                          std::any_of(y.begin(), y.end(), [](int v) { return v == 0; });
        if (both) gm.auc = auc(s, y);
      }
      report.groups.push_back(gm);
    }
  }
  return report;
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json j = {{"auc", r.auc}, {"accuracy", r.accuracy}, {"count", r.count}};
  if (!r.groups.empty()) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : r.groups) {
      nlohmann::json gj = {{"max_interactions", g.max_interactions}, {"count", g.count}};
      gj["auc"] = g.auc ? nlohmann::json(*g.auc) : nlohmann::json(nullptr);
      gj["accuracy"] = g.accuracy ? nlohmann::json(*g.accuracy) : nlohmann::json(nullptr);
      groups.push_back(std::move(gj));
    }
    j["groups"] = std::move(groups);
  }
  return j;
}

RktConfig AblationVariant::apply(RktConfig base) const {
  if (no_position) base.use_position = false;
  if (no_forget) base.use_forget = false;
  if (no_relation) base.use_exercise_relation = false;
  return base;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"full", false, false, false}, {"PE", true, false, false},
          {"TE", false, true, false},    {"RE", false, false, true},
          {"PE+TE", true, true, false},  {"PE+RE", true, false, true},
          {"RE+TE", false, true, true},  {"PE+RE+TE", true, true, true}};
}

AblationVariant ablation_variant(const std::string& name) {
  for (auto& v : ablation_variants())
    if (v.name == name) return v;
  throw UsageError("unknown ablation variant '" + name + "'");
}

AblationRow run_variant(const RktConfig& base, const AblationVariant& variant,
                        const ExperimentData& data, const TrainOptions& train_options,
                        const EvalOptions& eval_options, std::uint64_t init_seed) {
  const RktConfig config = variant.apply(base);
  ParameterSet params = model::init_params(config, data.context.word_dim(),
                                           data.context.students.size(), init_seed);
  AblationRow row;
  row.variant = variant;
  row.train = train(config, params, data.train, data.context, train_options);
  row.eval = evaluate(params, data.test, data.context, config, eval_options);
  return row;
}

std::vector<AblationRow> ablation_grid(const RktConfig& base, const ExperimentData& data,
                                       const TrainOptions& train_options,
                                       const EvalOptions& eval_options,
                                       std::uint64_t init_seed) {
  std::vector<AblationRow> rows;
  for (const auto& v : ablation_variants()) {
    rows.push_back(run_variant(base, v, data, train_options, eval_options, init_seed));
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %10s\n", "variant", "AUC", "ACC",
                "count", "loss");
  out << line;
  for (const auto& r : rows) {
    const double loss = r.train.epochs.empty() ? 0.0 : r.train.epochs.back().train_loss;
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8zu %10s\n", r.variant.name.c_str(),
                  fmt(r.eval.auc).c_str(), fmt(r.eval.accuracy).c_str(), r.eval.count,
                  fmt(loss).c_str());
    out << line;
  }
  return out.str();
}

std::vector<AttentionRow> attention_rows(const ParameterSet& params, const data::Window& w,
                                         const model::ModelContext& ctx,
                                         const RktConfig& config) {
  RktConfig eval = config;
  eval.evaluation_mode = true;
  Tape tape;
  model::GraphOptions opt;
  opt.diagnostics = true;
  auto g = model::build_window(tape, params, w, ctx, eval, opt);
  const std::size_t l = w.length();
  std::vector<AttentionRow> rows;
  for (std::size_t t = 0; t < l; ++t) {
    if (!g.predicted[t]) continue;
    for (std::size_t j = 0; j < t; ++j) {
      if (!w.valid[j]) continue;
      const std::size_t k = t * l + j;
      rows.push_back({t, j, g.alpha[k], g.rel[k], g.forget[k], g.beta[k]});
    }
  }
  return rows;
}

void export_attention(const ParameterSet& params, const data::Window& window,
                      const model::ModelContext& ctx, const RktConfig& config,
                      const std::filesystem::path& path) {
  const auto rows = attention_rows(params, window, ctx, config);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write attention export " + path.string());
  out << "t,j,alpha,rE,rT,beta\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", r.t, r.j, r.alpha,
                  r.rel, r.forget, r.beta);
    out << buf;
  }
  if (!out) throw DataError("failed writing " + path.string());
}

num::Tensor aggregate_attention(const ParameterSet& params,
                                std::span<const data::Window> windows,
                                const model::ModelContext& ctx, const RktConfig& config) {
  const std::size_t l = config.window_length;
  num::Tensor sum({l, l}, 0.0);
  std::vector<std::size_t> row_count(l, 0);
  for (const auto& w : windows) {
    for (const auto& r : attention_rows(params, w, ctx, config)) sum[r.t * l + r.j] += r.beta;
    for (std::size_t t = 0; t < l; ++t) {
      if (w.valid[t] && t > w.first_valid()) ++row_count[t];
    }
  }
  for (std::size_t t = 0; t < l; ++t) {
    if (row_count[t] == 0) continue;
    for (std::size_t j = 0; j < l; ++j) sum[t * l + j] /= static_cast<double>(row_count[t]);
  }
  return sum;
}

void export_attention_aggregate(const num::Tensor& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write attention export " + path.string());
  out << "t,j,beta\n";
  const std::size_t l = matrix.rows();
  char buf[96];
  for (std::size_t t = 0; t < l; ++t) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < l; ++j) row_sum += matrix[t * l + j];
    if (row_sum == 0.0) continue;
    for (std::size_t j = 0; j < t; ++j) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", t, j, matrix[t * l + j]);
      out << buf;
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

num::GradcheckResult model_gradcheck(const ModelGradcheckOptions& o) {
  Rng rng(hash_combine(o.seed, 0x6763));
  const std::size_t E = o.num_exercises, l = o.window_length;

  corpus::ExerciseEmbeddings emb;
  emb.matrix = num::Tensor({E, o.word_dim});
  for (double& v : emb.matrix.values()) v = rng.normal();

  std::vector<relation::RelationEntry> entries;
  for (std::size_t i = 0; i < E; ++i)
    for (std::size_t j = 0; j < E; ++j)
      if (i != j && rng.bernoulli(0.4)) entries.push_back({i, j, rng.uniform(0.8, 2.0)});
  relation::RelationMatrix a(E, relation::kDefaultTheta,
                             relation::Method::kTextAndPerformance, std::move(entries));

  std::vector<data::Window> windows;
  std::vector<std::int64_t> ids;
  for (std::size_t w = 0; w < o.windows; ++w) {
    data::StudentSequence seq;
    seq.student_id = static_cast<std::int64_t>(w);
    ids.push_back(seq.student_id);
    // The first window is full, later ones are progressively padded.
    const std::size_t n = std::max<std::size_t>(2, l - std::min(l - 2, w));
    double t = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      t += std::round(rng.exponential(3600.0));
      seq.interactions.push_back({rng.below(E), rng.bernoulli(0.5) ? 1 : 0, t});
    }
    for (auto& win : data::window(seq, l, E)) windows.push_back(std::move(win));
  }
  const auto ctx = model::make_context(emb, std::move(a), model::StudentIndex(ids));

  RktConfig config;
  config.model_dim = o.model_dim;
  config.window_length = l;
  config.dropout = 0.0;
  config.evaluation_mode = true;
  config.init_std = o.init_std;
  auto params = model::init_params(config, o.word_dim, ids.size(), hash_combine(o.seed, 1));
  // Spread s_u so the memory parameters see distinct elapsed-time scales.
  auto& offsets = params.value(model::param::kStudentMemoryOffset);
  for (double& v : offsets.values()) v = rng.normal(0.0, 0.5);

  auto loss = [&](Tape& tape, const ParameterSet& p) {
    num::Var total;
    for (const auto& w : windows) {
      auto g = model::build_window(tape, p, w, ctx, config);
      auto wl = model::window_loss(g, w);
      total = total.valid() ? num::add(total, wl) : wl;
    }
    return total;
  };
  num::GradcheckOptions check = o.check;
  check.seed = hash_combine(o.seed, check.seed);
  return num::gradcheck(loss, params, check);
}

}  // namespace rkt::train
