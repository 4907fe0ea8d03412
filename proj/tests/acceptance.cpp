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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Long-running (the synthetic ablation trains three models).

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rkt/metrics.hpp"
#include "rkt/model.hpp"
#include "rkt/pipeline.hpp"
#include "rkt/relation.hpp"
#include "rkt/rng.hpp"
#include "rkt/synth.hpp"
#include "rkt/train.hpp"
#include "test_util.hpp"

namespace {

using namespace rkt;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Random model states for criteria 3-5.

struct State {
  model::RktConfig config;
  model::ModelContext ctx;
  num::ParameterSet params;
  data::Window window;
  std::size_t E = 0;
};

relation::RelationMatrix random_relations(Rng& rng, std::size_t E) {
  std::vector<relation::RelationEntry> es;
  const double p = rng.uniform();
  for (std::size_t i = 0; i < E; ++i)
    for (std::size_t j = 0; j < E; ++j)
      if (i != j && rng.bernoulli(p)) es.push_back({i, j, rng.uniform(-1.0, 2.0)});
  return {E, 0.8, relation::Method::kTextAndPerformance, es};
}

State random_state(std::uint64_t seed) {
  Rng rng(hash_combine(seed, 0xACCE));
  State s;
  s.E = 2 + rng.below(10);
  const std::size_t dw = 1 + rng.below(6);
  auto& c = s.config;
  c.model_dim = 2 + rng.below(8);
  c.window_length = 2 + rng.below(11);
  c.lambda = rng.bernoulli(0.2) ? static_cast<double>(rng.below(2)) : rng.uniform();
  c.dropout = 0.0;
  c.use_position = rng.bernoulli(0.7);
  c.use_forget = rng.bernoulli(0.7);
  c.use_exercise_relation = rng.bernoulli(0.7);
  c.query_uses_interaction = rng.bernoulli(0.3);
  c.init_std = rng.uniform(0.05, 1.5);
  c.initial_memory_seconds = std::exp(rng.uniform(0.0, 12.0));

  corpus::ExerciseEmbeddings emb;
  emb.matrix = rkt::testing::random_tensor({s.E, dw}, rng, rng.uniform(0.1, 3.0));
  const std::size_t students = 1 + rng.below(3);
  std::vector<std::int64_t> ids;
  for (std::size_t u = 0; u < students; ++u) ids.push_back(static_cast<std::int64_t>(u));
  s.ctx = model::make_context(emb, random_relations(rng, s.E), model::StudentIndex(ids));
  s.params = model::init_params(c, dw, students, rng.bits());
  for (auto name : {model::param::kAttnNormGain, model::param::kAttnNormBias,
                    model::param::kFfnNormGain, model::param::kFfnNormBias,
                    model::param::kStudentMemoryOffset}) {
    for (double& v : s.params.value(name).values()) v += rng.normal(0.0, 0.5);
  }

  const std::size_t l = c.window_length;
  const std::size_t pad = rng.below(l);  // at least one valid position
  auto& w = s.window;
  w.student_id = static_cast<std::int64_t>(rng.below(students + 1));  // may be unknown
  double t = rng.uniform(0.0, 1e6);
  for (std::size_t k = 0; k < l; ++k) {
    const bool valid = k >= pad;
    if (valid && k > pad) t += rng.bernoulli(0.1) ? 0.0 : rng.exponential(3600.0);
    w.exercise_ids.push_back(valid ? rng.below(s.E) : s.E);
    w.correct.push_back(valid ? static_cast<int>(rng.below(2)) : 0);
    w.timestamps.push_back(t);
    w.valid.push_back(valid ? 1 : 0);
  }
  w.sequence_length = l - pad;
  return s;
}

std::vector<double> predict(const State& s, const data::Window& w,
                            const relation::RelationMatrix* relations = nullptr,
                            bool plain = false) {
  num::Tape tape;
  model::ModelContext ctx = s.ctx;
  if (relations) ctx.relations = *relations;
  const auto g = plain ? model::build_window_plain(tape, s.params, w, ctx, s.config)
                       : model::build_window(tape, s.params, w, ctx, s.config);
  const auto v = g.probabilities.value().values();
  return {v.begin(), v.end()};
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  train::ModelGradcheckOptions o;  // d = 8, l = 5, dropout off
  const auto r = train::model_gradcheck(o);
  const double secs = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf, "max rel err %.3e over %zu coords (worst %s[%zu]), %.2f s",
                r.max_relative_error, r.coordinates_checked, r.worst_parameter.c_str(),
                r.worst_index, secs);
  return {r.max_relative_error <= 1e-4 && secs < 60.0, buf};
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t a = 0; a < s.size(); ++a) {
    if (!y[a]) continue;
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (y[b]) continue;
      pairs += 1;
      wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

Outcome metric_oracles() {
  Rng rng(2024);
  std::size_t phi_mismatch = 0;
  for (int k = 0; k < 1000; ++k) {
    relation::ContingencyTable t;
    // some tables with an empty margin
    const std::uint64_t hi = k % 10 == 0 ? 3 : 1000;
    t.n00 = rng.below(hi);
    t.n01 = rng.below(hi);
    t.n10 = rng.below(hi);
    t.n11 = rng.below(hi);
    const double a = static_cast<double>(t.n11), b = static_cast<double>(t.n10);
    const double c = static_cast<double>(t.n01), d = static_cast<double>(t.n00);
    const double den = (a + b) * (c + d) * (a + c) * (b + d);
    const double direct = den == 0.0 ? 0.0 : (a * d - b * c) / std::sqrt(den);
    if (relation::phi(t) != direct) ++phi_mismatch;
  }
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.below(8)) : rng.normal();
      y[i] = rng.bernoulli(rng.uniform(0.05, 0.95)) ? 1 : 0;
    }
    const std::size_t pos = rng.below(n);
    y[pos] = 1;
    y[(pos + 1 + rng.below(n - 1)) % n] = 0;
    worst = std::max(worst, std::abs(train::auc(s, y) - brute_auc(s, y)));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "phi mismatches %zu/1000, auc max |diff| %.2e over 1000 inputs",
                phi_mismatch, worst);
  return {phi_mismatch == 0 && worst <= 1e-12, buf};
}

Outcome distribution_invariants() {
  std::size_t bad_sign = 0, bad_mask = 0, rows = 0;
  double worst_sum = 0.0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const State s = random_state(k);
    num::Tape tape;
    const auto g = model::build_window(tape, s.params, s.window, s.ctx, s.config, {0, true});
    const std::size_t l = s.config.window_length;
    for (std::size_t t = 0; t < l; ++t) {
      double sum = 0.0;
      for (std::size_t j = 0; j < l; ++j) {
        const double b = g.beta.at(t, j);
        const bool allowed = g.predicted[t] && j < t && s.window.valid[j];
        if (!allowed && b != 0.0) ++bad_mask;
        if (!(b >= 0.0)) ++bad_sign;
        sum += b;
      }
      if (g.predicted[t]) {
        ++rows;
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      }
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "1000 states, %zu rows: max |sum-1| %.2e, negative %zu, nonzero masked %zu",
                rows, worst_sum, bad_sign, bad_mask);
  return {bad_sign == 0 && bad_mask == 0 && worst_sum <= 1e-9 && rows > 0, buf};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b,
                    std::size_t from, std::size_t to) {
  double m = 0.0;
  for (std::size_t k = from; k < to; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

Outcome causality_probes() {
  double future = 0.0, padding = 0.0;
  std::size_t probes = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const State s = random_state(k + 5000);
    Rng rng(k);
    const auto& w = s.window;
    const std::size_t l = w.length();
    const auto base = predict(s, w);

    // change the response at t and every interaction after it
    const std::size_t t = w.first_valid() + rng.below(l - w.first_valid());
    auto probe = w;
    probe.correct[t] = 1 - probe.correct[t];
    double shift = 0.0;
    for (std::size_t j = t + 1; j < l; ++j) {
      shift += rng.exponential(1e5);
      probe.timestamps[j] += shift;
      probe.exercise_ids[j] = rng.below(s.E);
      probe.correct[j] = static_cast<int>(rng.below(2));
    }
    future = std::max(future, max_abs_diff(base, predict(s, probe), 0, t + 1));
    ++probes;

    if (w.first_valid() > 0) {
      auto pad = w;
      for (std::size_t j = 0; j < w.first_valid(); ++j) {
        pad.exercise_ids[j] = rng.below(s.E + 1);
        pad.correct[j] = static_cast<int>(rng.below(2));
        pad.timestamps[j] = rng.uniform(0.0, 2e6);
      }
      padding = std::max(padding, max_abs_diff(base, predict(s, pad), w.first_valid(), l));
      ++probes;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu probes: future max diff %.3g, padding max diff %.3g",
                probes, future, padding);
  return {future == 0.0 && padding == 0.0, buf};
}

Outcome ablation_endpoint() {
  std::size_t forward_diffs = 0, grad_diffs = 0, rel_diffs = 0, time_diffs = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    State s = random_state(k + 9000);
    s.config.use_forget = false;
    s.config.use_exercise_relation = false;
    s.config.lambda = 1.0;
    Rng rng(k);
    const auto& w = s.window;

    auto grads_of = [&](bool plain) {
      num::Tape tape;
      const auto g = plain ? model::build_window_plain(tape, s.params, w, s.ctx, s.config)
                           : model::build_window(tape, s.params, w, s.ctx, s.config);
      auto grads = s.params.zero_gradients();
      if (std::find(g.predicted.begin(), g.predicted.end(), 1) != g.predicted.end())
        tape.backward(model::window_loss(g, w), grads);
      return grads;
    };
    const auto plain = predict(s, w, nullptr, true);
    if (predict(s, w) != plain) ++forward_diffs;
    if (grads_of(false) != grads_of(true)) ++grad_diffs;

    const auto other = random_relations(rng, s.E);
    if (predict(s, w, &other) != plain) ++rel_diffs;
    auto moved = w;
    const double scale = rng.uniform(0.0, 100.0), offset = rng.uniform(0.0, 1e7);
    for (double& t : moved.timestamps) t = offset + scale * t;
    if (predict(s, moved) != plain) ++time_diffs;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "1000 states: forward diffs %zu, gradient diffs %zu, A-dependent %zu, "
                "time-dependent %zu",
                forward_diffs, grad_diffs, rel_diffs, time_diffs);
  return {forward_diffs + grad_diffs + rel_diffs + time_diffs == 0, buf};
}

// Golden synthetic data shared by criteria 6-8.
struct Golden {
  synth::SynthData data = synth::generate(synth::SynthConfig{});  // seed 7, 500 students
  pipeline::Prepared prepared = [this] {
    pipeline::PrepareOptions po;
    po.split_seed = 7;
    return pipeline::prepare(data.logs, data.exercises, po);
  }();
};

Outcome synthetic_ablation(const Golden& g) {
  const auto t0 = Clock::now();
  const model::RktConfig base;  // d 64, l 50, dropout 0.1, lambda 0.5
  train::TrainOptions to;
  to.epochs = 30;
  to.seed = 7;
  to.threads = std::max(1u, std::thread::hardware_concurrency());
  std::map<std::string, double> auc;
  for (const char* name : {"full", "RE", "PE+RE+TE"}) {
    const auto row = train::run_variant(base, train::ablation_variant(name),
                                        g.prepared.experiment, to, {}, 7);
    auc[name] = row.eval.auc;
  }
  const double secs = seconds_since(t0);
  const double gap_re = auc["full"] - auc["RE"];
  const double gap_all = auc["full"] - auc["PE+RE+TE"];
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "AUC full %.4f, RE %.4f (gap %.4f >= 0.01), PE+RE+TE %.4f (gap %.4f >= 0.02), "
                "%.0f s",
                auc["full"], auc["RE"], gap_re, auc["PE+RE+TE"], gap_all, secs);
  return {gap_re >= 0.01 && gap_all >= 0.02 && secs < 1800.0, buf};
}

Outcome relation_recovery(const Golden& g) {
  const std::size_t E = g.data.truth.num_exercises();
  const auto emb = pipeline::embed_corpus(g.data.exercises, E);
  double score[5] = {};
  for (int m : {2, 3, 4}) {
    relation::RelationOptions ro;
    ro.method = relation::method_from_int(m);
    const auto a = pipeline::mine_relations(g.data.logs, g.data.exercises, emb, E, ro);
    score[m] = synth::relation_recovery_score(a, g.data.truth);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "recovery method4 %.4f (>= 0.5), method2 %.4f, method3 %.4f",
                score[4], score[2], score[3]);
  return {score[4] >= 0.5 && score[4] >= score[2] && score[4] >= score[3], buf};
}

// Memorization check: regularization off so the network can fit the noise.
// The post-norm block trains in bursts at larger steps, hence the clip.
Outcome overfit(const Golden& g) {
  train::ExperimentData ex = g.prepared.experiment;
  ex.train.resize(10);
  model::RktConfig c;
  c.dropout = 0.0;
  c.init_std = 0.1;
  train::TrainOptions to;
  to.epochs = 200;
  to.seed = 7;
  to.adam.learning_rate = 3e-3;
  to.adam.weight_decay = 0.0;
  to.clip_norm = 1.0;
  auto params = model::init_params(c, ex.context.word_dim(), ex.context.students.size(), 7);
  const auto r = train::train(c, params, ex.train, ex.context, to);
  char buf[160];
  std::snprintf(buf, sizeof buf, "10 windows, 200 epochs: loss %.4f -> %.4f (< 0.1)",
                r.epochs.front().train_loss, r.epochs.back().train_loss);
  return {r.epochs.back().train_loss < 0.1, buf};
}

int shell(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(RKT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  if (output) *output = out;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const auto dir = rkt::testing::scratch_dir("acceptance_cli");
  const std::string d = dir.string();
  const std::string logs = d + "/synth/logs.jsonl", texts = d + "/synth/exercises.jsonl";
  const std::string data = " --logs " + logs + " --texts " + texts;
  struct Cmd {
    std::string args, manifest;
  };
  const std::vector<Cmd> cmds = {
      {"gen-synth --out-dir " + d + "/synth --students 60 --interactions 30 --seed 7",
       d + "/synth/manifest.json"},
      {"build-relations" + data + " --out " + d + "/rel.csv", d + "/rel.csv.manifest.json"},
      {"train" + data + " --d 8 --l 10 --epochs 2 --batch-size 16 --out-dir " + d + "/model",
       d + "/model/manifest.json"},
      {"eval --model-dir " + d + "/model --logs " + logs + " --online --groups",
       d + "/model/eval.json.manifest.json"},
      {"ablate" + data + " --d 8 --l 10 --epochs 1 --batch-size 16 --out-dir " + d + "/ablate",
       d + "/ablate/manifest.json"},
      {"export-attention --model-dir " + d + "/model --logs " + logs + " --aggregate --out " + d +
           "/attn.csv",
       d + "/attn.csv.manifest.json"},
      {"gradcheck --d 4 --l 4 --coordinates 40 --out " + d + "/grad.json",
       d + "/grad.json.manifest.json"},
  };
  std::size_t artifacts = 0, differing = 0;
  std::vector<std::string> failures;
  for (const auto& c : cmds) {
    std::string out;
    if (shell(c.args, &out) != 0) {
      failures.push_back(c.args.substr(0, c.args.find(' ')) + " failed: " + out);
      continue;
    }
    std::ifstream in(c.manifest);
    const auto m = nlohmann::json::parse(in);
    std::map<std::string, std::string> before;
    for (const auto& [role, p] : m.at("outputs").items()) before[p.get<std::string>()] = slurp(p.get<std::string>());
    if (shell("rerun " + c.manifest, &out) != 0) {
      failures.push_back("rerun " + c.args.substr(0, c.args.find(' ')) + ": " + out);
    }
    for (const auto& [p, bytes] : before) {
      ++artifacts;
      if (slurp(p) != bytes) ++differing;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu commands re-run from manifests, %zu artifacts, %zu differ",
                cmds.size(), artifacts, differing);
  std::string detail = buf;
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty() && differing == 0 && artifacts > 0, detail};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  std::optional<Golden> golden;
  auto need_golden = [&]() -> const Golden& {
    if (!golden) golden.emplace();
    return *golden;
  };
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"metric oracles", metric_oracles},
      {"distribution invariants", distribution_invariants},
      {"causality and padding probes", causality_probes},
      {"ablation endpoint equivalence", ablation_endpoint},
      {"synthetic ablation ordering", [&] { return synthetic_ablation(need_golden()); }},
      {"relation recovery", [&] { return relation_recovery(need_golden()); }},
      {"overfit sanity", [&] { return overfit(need_golden()); }},
      {"manifest reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed in %.0f s\n", criteria.size() - failed, criteria.size(),
              seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
