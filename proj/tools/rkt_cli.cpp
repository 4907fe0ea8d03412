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

// rkt: command-line front end. Every command writes a run manifest that
// `rkt rerun` can replay and verify.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "rkt/checkpoint.hpp"
#include "rkt/error.hpp"
#include "rkt/pipeline.hpp"
#include "rkt/rng.hpp"
#include "rkt/synth.hpp"
#include "rkt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rkt::cli {
namespace {

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kModelFile = "model.json";
constexpr const char* kEmbeddingsFile = "embeddings.bin";
constexpr const char* kRelationsFile = "relations.csv";

using Clock = std::chrono::steady_clock;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void require_file(const fs::path& path, const std::string& flag) {
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file " + path.string());
}

// ---------------------------------------------------------------------------
// Shared training flags. Empty optionals fall through to the config file and
// then to the built-in defaults.

struct TrainFlags {
  std::string logs, texts, relations, config, word_vectors;
  std::optional<std::size_t> d, l, batch_size, epochs, patience, shards, min_support;
  std::optional<double> lr, dropout, weight_decay, lambda, train_fraction, clip_norm, init_std,
      initial_memory, theta;
  std::optional<std::uint64_t> seed, split_seed, word_seed;
  std::optional<int> method;
  bool no_position = false, no_forget = false, no_relation = false;
  bool query_uses_interaction = false, early_stopping = false;
  std::size_t threads = 1;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--logs", f.logs, "Interaction log JSONL")->required();
  app->add_option("--texts", f.texts, "Exercise text JSONL")->required();
  app->add_option("--relations", f.relations,
                  "Relation matrix CSV; mined from the training split when absent");
  app->add_option("--config", f.config, "JSON config (CLI flags take precedence)");
  app->add_option("--word-vectors", f.word_vectors, "Pretrained word vectors (text format)");
  app->add_option("--d", f.d, "Model dimension [64]");
  app->add_option("--l", f.l, "Window length [50]");
  app->add_option("--batch-size", f.batch_size, "Windows per batch [128]");
  app->add_option("--epochs", f.epochs, "Training epochs [10]");
  app->add_option("--lr", f.lr, "Adam learning rate [0.001]");
  app->add_option("--dropout", f.dropout, "Dropout rate [0.1]");
  app->add_option("--weight-decay", f.weight_decay, "Decoupled weight decay [1e-5]");
  app->add_option("--lambda", f.lambda, "Attention / relation mix [0.5]");
  app->add_option("--seed", f.seed, "Master seed [0]");
  app->add_option("--split-seed", f.split_seed, "Student split seed [--seed]");
  app->add_option("--word-seed", f.word_seed, "Random word vector seed [--seed]");
  app->add_option("--train-fraction", f.train_fraction, "Students used for training [0.8]");
  app->add_option("--clip-norm", f.clip_norm, "Gradient norm clip [off]");
  app->add_option("--patience", f.patience, "Early stopping patience [5]");
  app->add_option("--shards", f.shards, "Gradient accumulation shards per batch [8]");
  app->add_option("--init-std", f.init_std, "Weight init standard deviation [0.01]");
  app->add_option("--initial-memory", f.initial_memory,
                  "Initial memory strength in seconds [3600]");
  app->add_option("--method", f.method, "Relation mining method 1-4 [4]");
  app->add_option("--theta", f.theta, "Relation threshold [0.8]");
  app->add_option("--min-support", f.min_support, "Minimum pair observations for phi [5]");
  app->add_flag("--no-position", f.no_position, "Remove position encoding");
  app->add_flag("--no-forget", f.no_forget, "Remove the forgetting kernel");
  app->add_flag("--no-relation", f.no_relation, "Remove exercise relations");
  app->add_flag("--query-uses-interaction", f.query_uses_interaction,
                "Build queries from interaction embeddings (response zeroed)");
  app->add_flag("--early-stopping", f.early_stopping,
                "Stop on validation AUC (10% of training students held out)");
  app->add_option("--threads", f.threads, "Worker threads; never changes results [1]");
}

struct Resolved {
  model::RktConfig model;
  train::TrainOptions train;
  pipeline::PrepareOptions prep;
  std::uint64_t seed = 0;

  json to_json() const {
    json t = {{"epochs", train.epochs},
              {"batch_size", train.batch_size},
              {"lr", train.adam.learning_rate},
              {"weight_decay", train.adam.weight_decay},
              {"beta1", train.adam.beta1},
              {"beta2", train.adam.beta2},
              {"epsilon", train.adam.epsilon},
              {"seed", seed},
              {"early_stopping", train.early_stopping},
              {"patience", train.patience},
              {"shards", train.shards}};
    t["clip_norm"] = train.clip_norm ? json(*train.clip_norm) : json(nullptr);
    json d = {{"train_fraction", prep.train_fraction},
              {"split_seed", prep.split_seed},
              {"word_seed", prep.corpus.word_seed},
              {"method", static_cast<int>(prep.relation.method)},
              {"theta", prep.relation.theta},
              {"min_support", prep.relation.min_support}};
    return {{"model", model::config_to_json(model)}, {"train", t}, {"data", d}};
  }
};

template <typename T>
void take(std::optional<T>& dst, const json& section, const char* key) {
  if (section.contains(key) && !section[key].is_null()) dst = section[key].get<T>();
}

Resolved resolve(const TrainFlags& f) {
  Resolved r;
  json file = json::object();
  if (!f.config.empty()) file = read_json(f.config);

  try {
    // Config file first, then CLI flags on top.
    const json m = file.value("model", json::object());
    const json t = file.value("train", json::object());
    const json d = file.value("data", json::object());
    r.model = model::config_from_json(m);

    std::optional<std::size_t> epochs, batch_size, patience, shards, min_support;
    std::optional<double> lr, weight_decay, clip_norm, train_fraction, theta;
    std::optional<std::uint64_t> seed, split_seed, word_seed;
    std::optional<int> method;
    std::optional<bool> early;
    take(epochs, t, "epochs");
    take(batch_size, t, "batch_size");
    take(patience, t, "patience");
    take(shards, t, "shards");
    take(lr, t, "lr");
    take(weight_decay, t, "weight_decay");
    take(clip_norm, t, "clip_norm");
    take(seed, t, "seed");
    take(early, t, "early_stopping");
    take(train_fraction, d, "train_fraction");
    take(split_seed, d, "split_seed");
    take(word_seed, d, "word_seed");
    take(method, d, "method");
    take(theta, d, "theta");
    take(min_support, d, "min_support");

    auto over = [](auto& dst, const auto& flag) {
      if (flag) dst = flag;
    };
    over(epochs, f.epochs);
    over(batch_size, f.batch_size);
    over(patience, f.patience);
    over(shards, f.shards);
    over(lr, f.lr);
    over(weight_decay, f.weight_decay);
    over(clip_norm, f.clip_norm);
    over(seed, f.seed);
    over(train_fraction, f.train_fraction);
    over(split_seed, f.split_seed);
    over(word_seed, f.word_seed);
    over(method, f.method);
    over(theta, f.theta);
    over(min_support, f.min_support);
    if (f.early_stopping) early = true;

    if (f.d) r.model.model_dim = *f.d;
    if (f.l) r.model.window_length = *f.l;
    if (f.dropout) r.model.dropout = *f.dropout;
    if (f.lambda) r.model.lambda = *f.lambda;
    if (f.init_std) r.model.init_std = *f.init_std;
    if (f.initial_memory) r.model.initial_memory_seconds = *f.initial_memory;
    if (f.no_position) r.model.use_position = false;
    if (f.no_forget) r.model.use_forget = false;
    if (f.no_relation) r.model.use_exercise_relation = false;
    if (f.query_uses_interaction) r.model.query_uses_interaction = true;
    r.model.validate();

    r.seed = seed.value_or(0);
    r.train.seed = r.seed;
    r.train.epochs = epochs.value_or(r.train.epochs);
    r.train.batch_size = batch_size.value_or(r.train.batch_size);
    r.train.patience = patience.value_or(r.train.patience);
    r.train.shards = shards.value_or(r.train.shards);
    r.train.adam.learning_rate = lr.value_or(r.train.adam.learning_rate);
    r.train.adam.weight_decay = weight_decay.value_or(r.train.adam.weight_decay);
    r.train.clip_norm = clip_norm;
    r.train.early_stopping = early.value_or(false);
    r.train.threads = f.threads;

    r.prep.window_length = r.model.window_length;
    r.prep.train_fraction = train_fraction.value_or(r.prep.train_fraction);
    r.prep.split_seed = split_seed.value_or(r.seed);
    r.prep.corpus.word_seed = word_seed.value_or(r.seed);
    if (!f.word_vectors.empty()) r.prep.corpus.word_vectors = f.word_vectors;
    if (method) r.prep.relation.method = relation::method_from_int(*method);
    r.prep.relation.theta = theta.value_or(r.prep.relation.theta);
    r.prep.relation.min_support = min_support.value_or(r.prep.relation.min_support);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }

  if (f.lambda && !r.model.uses_relation_coefficients() && *f.lambda != 1.0) {
    throw UsageError("--lambda conflicts with --no-forget --no-relation (lambda is fixed at 1)");
  }
  if (!f.relations.empty() && (f.method || f.theta || f.min_support)) {
    throw UsageError("--relations conflicts with --method/--theta/--min-support");
  }
  if (r.train.batch_size == 0) throw UsageError("--batch-size must be positive");
  if (r.train.epochs == 0) throw UsageError("--epochs must be positive");
  if (r.train.shards == 0) throw UsageError("--shards must be positive");
  if (r.train.clip_norm && !(*r.train.clip_norm > 0.0)) {
    throw UsageError("--clip-norm must be positive");
  }
  if (r.train.early_stopping && r.train.patience == 0) {
    throw UsageError("--patience must be positive with --early-stopping");
  }
  if (!(r.train.adam.learning_rate > 0.0)) throw UsageError("--lr must be positive");
  if (!(r.prep.train_fraction > 0.0 && r.prep.train_fraction < 1.0)) {
    throw UsageError("--train-fraction must lie in (0, 1)");
  }
  return r;
}

struct Loaded {
  data::Sequences logs;
  std::vector<corpus::ExerciseRecord> records;
  std::optional<relation::RelationMatrix> relations;
};

Loaded load_inputs(const TrainFlags& f) {
  require_file(f.logs, "--logs");
  require_file(f.texts, "--texts");
  Loaded in;
  in.logs = data::parse_logs(f.logs);
  in.records = corpus::read_exercise_records(f.texts);
  if (!f.relations.empty()) {
    require_file(f.relations, "--relations");
    in.relations = relation::load_relation_matrix(f.relations);
  }
  return in;
}

pipeline::Prepared prepare(const Loaded& in, const Resolved& r) {
  return pipeline::prepare(in.logs, in.records, r.prep,
                           in.relations ? &*in.relations : nullptr);
}

void record_inputs(RunManifest& m, const TrainFlags& f) {
  m.inputs["logs"] = f.logs;
  m.inputs["texts"] = f.texts;
  if (!f.relations.empty()) m.inputs["relations"] = f.relations;
  if (!f.config.empty()) m.inputs["config"] = f.config;
  if (!f.word_vectors.empty()) m.inputs["word_vectors"] = f.word_vectors;
}

// Splits off a validation slice of the training students for early stopping.
std::vector<data::Window> carve_validation(pipeline::Prepared& p, const Resolved& r) {
  if (!r.train.early_stopping) return {};
  auto inner = data::split_students(p.split.train, 0.9, hash_combine(r.prep.split_seed, 0x7661));
  const std::size_t padding = p.experiment.context.padding_id();
  p.experiment.train = data::make_windows(inner.train, r.model.window_length, padding);
  return data::make_windows(inner.test, r.model.window_length, padding);
}

void finish(RunManifest& m, const fs::path& path, Clock::time_point started) {
  m.checksum_files();
  m.duration_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  write_manifest(m, path);
  std::cout << "manifest: " << path.string() << "\n";
}

std::string manifest_path(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback.string() : flag;
}

// ---------------------------------------------------------------------------

int cmd_gen_synth(const std::vector<std::string>& argv, const std::string& out_dir,
                  const std::string& config, std::optional<std::uint64_t> seed,
                  std::optional<std::size_t> students, std::optional<std::size_t> interactions,
                  const std::string& manifest) {
  const auto started = Clock::now();
  synth::SynthConfig c;
  if (!config.empty()) c = synth::synth_config_from_json(read_json(config));
  if (seed) c.seed = *seed;
  if (students) c.num_students = *students;
  if (interactions) c.interactions_per_student = *interactions;
  c.validate();

  const auto data = synth::generate(c);
  const auto paths = synth::write_synth(data, out_dir);

  RunManifest m;
  m.command = "gen-synth";
  m.argv = argv;
  m.config = synth::synth_config_to_json(c);
  m.seed = c.seed;
  if (!config.empty()) m.inputs["config"] = config;
  m.outputs["logs"] = paths.logs.string();
  m.outputs["texts"] = paths.exercises.string();
  m.outputs["truth"] = paths.truth.string();
  std::cout << "students " << data.logs.size() << ", interactions "
            << data::count_interactions(data.logs) << ", exercises " << data.exercises.size()
            << "\n";
  for (const auto& [role, p] : m.outputs) std::cout << role << ": " << file_checksum(p) << "\n";
  finish(m, manifest_path(manifest, fs::path(out_dir) / "manifest.json"), started);
  return 0;
}

struct RelationFlags {
  std::string logs, texts, out, word_vectors, manifest;
  int method = 4;
  double theta = relation::kDefaultTheta;
  std::size_t min_support = relation::kDefaultMinSupport;
  std::uint64_t word_seed = 0;
  std::optional<std::size_t> num_exercises;
};

int cmd_build_relations(const std::vector<std::string>& argv, const RelationFlags& f) {
  const auto started = Clock::now();
  require_file(f.logs, "--logs");
  relation::RelationOptions opt;
  opt.method = relation::method_from_int(f.method);
  opt.theta = f.theta;
  opt.min_support = f.min_support;

  const auto logs = data::parse_logs(f.logs);
  std::vector<corpus::ExerciseRecord> records;
  if (!f.texts.empty()) {
    require_file(f.texts, "--texts");
    records = corpus::read_exercise_records(f.texts);
  }
  std::size_t n = pipeline::universe(logs, records);
  if (f.num_exercises) {
    if (*f.num_exercises < n) {
      throw UsageError("--num-exercises " + std::to_string(*f.num_exercises) +
                       " is smaller than the data universe " + std::to_string(n));
    }
    n = *f.num_exercises;
  }

  relation::RelationMatrix a;
  if (records.empty()) {
    relation::RelationInputs in;
    in.num_exercises = n;
    in.logs = &logs;
    a = relation::build_relation_matrix(in, opt);
  } else {
    pipeline::CorpusOptions co;
    co.word_seed = f.word_seed;
    if (!f.word_vectors.empty()) co.word_vectors = f.word_vectors;
    const auto emb = pipeline::embed_corpus(records, n, co);
    a = pipeline::mine_relations(logs, records, emb, n, opt);
  }
  relation::save_relation_matrix(a, f.out);

  RunManifest m;
  m.command = "build-relations";
  m.argv = argv;
  m.config = {{"method", f.method},
              {"theta", f.theta},
              {"min_support", f.min_support},
              {"word_seed", f.word_seed},
              {"num_exercises", n}};
  m.seed = f.word_seed;
  m.inputs["logs"] = f.logs;
  if (!f.texts.empty()) m.inputs["texts"] = f.texts;
  if (!f.word_vectors.empty()) m.inputs["word_vectors"] = f.word_vectors;
  m.outputs["relations"] = f.out;
  m.outputs["sidecar"] = relation::sidecar_path(f.out).string();
  std::printf("exercises %zu, entries %zu, density %.6f\n", n, a.nnz(), a.density());
  finish(m, manifest_path(f.manifest, f.out + ".manifest.json"), started);
  return 0;
}

int cmd_train(const std::vector<std::string>& argv, const TrainFlags& f,
              const std::string& out_dir, const std::string& manifest) {
  const auto started = Clock::now();
  const Resolved r = resolve(f);
  const Loaded in = load_inputs(f);
  auto p = prepare(in, r);
  const auto validation = carve_validation(p, r);

  auto params = model::init_params(r.model, p.experiment.context.word_dim(),
                                   p.experiment.context.students.size(), r.seed);
  auto report = train::train(r.model, params, p.experiment.train, p.experiment.context, r.train,
                             validation);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  num::save_checkpoint(params, dir / kCheckpointFile);
  corpus::save_embeddings(p.embeddings, dir / kEmbeddingsFile);
  relation::save_relation_matrix(p.experiment.context.relations, dir / kRelationsFile);
  report.checkpoint = (dir / kCheckpointFile).string();

  json model_json = r.to_json();
  model_json["students"] = p.experiment.context.students.ids();
  model_json["num_exercises"] = p.experiment.context.num_exercises();
  write_text_atomic(dir / kModelFile, model_json.dump(2) + "\n");
  write_text_atomic(dir / "report.json", train::train_report_to_json(report).dump(2) + "\n");

  for (const auto& e : report.epochs) {
    std::printf("epoch %3zu  loss %.6f", e.epoch, e.train_loss);
    if (e.validation_auc) std::printf("  val_auc %.4f", *e.validation_auc);
    std::printf("\n");
  }

  RunManifest m;
  m.command = "train";
  m.argv = argv;
  m.config = r.to_json();
  m.config["threads"] = r.train.threads;
  m.seed = r.seed;
  record_inputs(m, f);
  m.outputs["checkpoint"] = (dir / kCheckpointFile).string();
  m.outputs["model"] = (dir / kModelFile).string();
  m.outputs["embeddings"] = (dir / kEmbeddingsFile).string();
  m.outputs["relations"] = (dir / kRelationsFile).string();
  m.outputs["report"] = (dir / "report.json").string();
  finish(m, manifest_path(manifest, dir / "manifest.json"), started);
  return 0;
}

// A trained model directory plus the logs it was trained on.
struct ModelBundle {
  json meta;
  model::RktConfig config;
  num::ParameterSet params;
  model::ModelContext context;
  data::StudentSplit split;
};

ModelBundle load_bundle(const std::string& model_dir, const std::string& logs_path) {
  const fs::path dir(model_dir);
  for (const char* f : {kCheckpointFile, kModelFile, kEmbeddingsFile, kRelationsFile}) {
    require_file(dir / f, "--model-dir");
  }
  require_file(logs_path, "--logs");
  ModelBundle b;
  b.meta = read_json(dir / kModelFile);
  try {
    b.config = model::config_from_json(b.meta.at("model"));
    const auto& d = b.meta.at("data");
    const auto logs = data::parse_logs(logs_path);
    b.split = data::split_students(logs, d.at("train_fraction").get<double>(),
                                   d.at("split_seed").get<std::uint64_t>());
    b.context = model::make_context(
        corpus::load_embeddings(dir / kEmbeddingsFile),
        relation::load_relation_matrix(dir / kRelationsFile),
        model::StudentIndex(b.meta.at("students").get<std::vector<std::int64_t>>()));
  } catch (const json::exception& e) {
    throw DataError((dir / kModelFile).string() + ": " + e.what());
  }
  b.params = num::load_checkpoint(dir / kCheckpointFile);
  return b;
}

void record_bundle(RunManifest& m, const std::string& model_dir, const std::string& logs) {
  const fs::path dir(model_dir);
  m.inputs["checkpoint"] = (dir / kCheckpointFile).string();
  m.inputs["model"] = (dir / kModelFile).string();
  m.inputs["embeddings"] = (dir / kEmbeddingsFile).string();
  m.inputs["relations"] = (dir / kRelationsFile).string();
  m.inputs["logs"] = logs;
}

int cmd_eval(const std::vector<std::string>& argv, const std::string& model_dir,
             const std::string& logs, bool online, bool groups, std::string out,
             const std::string& manifest) {
  const auto started = Clock::now();
  const auto b = load_bundle(model_dir, logs);
  const auto windows =
      data::make_windows(b.split.test, b.config.window_length, b.context.padding_id());
  train::EvalOptions opt;
  opt.online_update = online;
  opt.groups = groups;
  const auto report = train::evaluate(b.params, windows, b.context, b.config, opt);
  if (out.empty()) out = (fs::path(model_dir) / "eval.json").string();
  write_text_atomic(out, train::eval_report_to_json(report).dump(2) + "\n");

  std::printf("%-8s %8s %8s\n", "mode", "AUC", "ACC");
  std::printf("%-8s %8.4f %8.4f   (%zu predictions)\n", online ? "online" : "static", report.auc,
              report.accuracy, report.count);
  for (const auto& g : report.groups) {
    std::printf("  < %-6zu n=%-8zu auc %s\n", g.max_interactions, g.count,
                g.auc ? std::to_string(*g.auc).c_str() : "undefined");
  }

  RunManifest m;
  m.command = "eval";
  m.argv = argv;
  m.config = {{"model", model::config_to_json(b.config)},
              {"online_update", online},
              {"online_learning_rate", opt.online_learning_rate},
              {"groups", groups}};
  m.seed = b.meta.at("train").value("seed", std::uint64_t{0});
  record_bundle(m, model_dir, logs);
  m.outputs["report"] = out;
  finish(m, manifest_path(manifest, out + ".manifest.json"), started);
  return 0;
}

int cmd_ablate(const std::vector<std::string>& argv, const TrainFlags& f,
               const std::string& out_dir, const std::vector<std::string>& variants,
               const std::string& manifest) {
  const auto started = Clock::now();
  if (f.no_position || f.no_forget || f.no_relation) {
    throw UsageError("ablate runs every variant; drop --no-position/--no-forget/--no-relation");
  }
  if (f.early_stopping) throw UsageError("ablate does not support --early-stopping");
  const Resolved r = resolve(f);
  const Loaded in = load_inputs(f);
  const auto p = prepare(in, r);

  std::vector<train::AblationVariant> chosen;
  if (variants.empty()) {
    chosen = train::ablation_variants();
  } else {
    for (const auto& v : variants) chosen.push_back(train::ablation_variant(v));
  }
  std::vector<train::AblationRow> rows;
  for (const auto& v : chosen) {
    rows.push_back(train::run_variant(r.model, v, p.experiment, r.train, {}, r.seed));
    std::fprintf(stderr, "%s done: auc %.4f\n", v.name.c_str(), rows.back().eval.auc);
  }
  const std::string table = train::format_ablation_table(rows);
  std::cout << table;

  json j = json::array();
  for (const auto& row : rows) {
    j.push_back({{"variant", row.variant.name},
                 {"config", model::config_to_json(row.variant.apply(r.model))},
                 {"train", train::train_report_to_json(row.train)},
                 {"eval", train::eval_report_to_json(row.eval)}});
  }
  const fs::path dir(out_dir);
  write_text_atomic(dir / "ablation.json", j.dump(2) + "\n");
  write_text_atomic(dir / "ablation.txt", table);

  RunManifest m;
  m.command = "ablate";
  m.argv = argv;
  m.config = r.to_json();
  m.config["threads"] = r.train.threads;
  m.seed = r.seed;
  record_inputs(m, f);
  m.outputs["table"] = (dir / "ablation.txt").string();
  m.outputs["report"] = (dir / "ablation.json").string();
  finish(m, manifest_path(manifest, dir / "manifest.json"), started);
  return 0;
}

int cmd_export_attention(const std::vector<std::string>& argv, const std::string& model_dir,
                         const std::string& logs, const std::string& out,
                         std::optional<std::int64_t> student, std::size_t window_index,
                         bool aggregate, const std::string& manifest) {
  const auto started = Clock::now();
  const auto b = load_bundle(model_dir, logs);
  const std::size_t l = b.config.window_length, pad = b.context.padding_id();

  if (aggregate) {
    const auto windows = data::make_windows(b.split.test, l, pad);
    const auto matrix = train::aggregate_attention(b.params, windows, b.context, b.config);
    train::export_attention_aggregate(matrix, out);
  } else {
    const data::StudentSequence* seq = nullptr;
    if (!student) {
      if (b.split.test.empty()) throw DataError("no test students to export");
      seq = &b.split.test.front();
    } else {
      for (const auto* side : {&b.split.test, &b.split.train})
        for (const auto& s : *side)
          if (s.student_id == *student) seq = &s;
      if (!seq) throw UsageError("--student " + std::to_string(*student) + " not in the logs");
    }
    const auto windows = data::window(*seq, l, pad);
    if (window_index >= windows.size()) {
      throw UsageError("--window " + std::to_string(window_index) + " out of range (student has " +
                       std::to_string(windows.size()) + ")");
    }
    train::export_attention(b.params, windows[window_index], b.context, b.config, out);
    std::printf("student %lld window %zu\n", static_cast<long long>(seq->student_id),
                window_index);
  }
  std::printf("wrote %s\n", out.c_str());

  RunManifest m;
  m.command = "export-attention";
  m.argv = argv;
  m.config = {{"model", model::config_to_json(b.config)},
              {"aggregate", aggregate},
              {"window", window_index}};
  if (student) m.config["student"] = *student;
  record_bundle(m, model_dir, logs);
  m.outputs["attention"] = out;
  finish(m, manifest_path(manifest, out + ".manifest.json"), started);
  return 0;
}

int cmd_gradcheck(const std::vector<std::string>& argv, train::ModelGradcheckOptions o,
                  double tolerance, const std::string& out, const std::string& manifest) {
  const auto started = Clock::now();
  const auto r = train::model_gradcheck(o);
  const bool ok = r.passed(tolerance);
  std::printf("max relative error %.3e over %zu coordinates (worst %s[%zu]) -> %s\n",
              r.max_relative_error, r.coordinates_checked, r.worst_parameter.c_str(),
              r.worst_index, ok ? "PASS" : "FAIL");

  json result = {{"max_relative_error", r.max_relative_error},
                 {"coordinates", r.coordinates_checked},
                 {"worst_parameter", r.worst_parameter},
                 {"worst_index", r.worst_index},
                 {"tolerance", tolerance},
                 {"passed", ok}};
  RunManifest m;
  m.command = "gradcheck";
  m.argv = argv;
  m.config = {{"d", o.model_dim},     {"l", o.window_length},
              {"step", o.check.step}, {"coordinates", o.check.coordinates},
              {"init_std", o.init_std}, {"tolerance", tolerance}};
  m.seed = o.seed;
  std::string report = out;
  if (!report.empty()) {
    write_text_atomic(report, result.dump(2) + "\n");
    m.outputs["report"] = report;
  }
  finish(m, manifest_path(manifest, report.empty() ? "gradcheck.manifest.json"
                                                   : report + ".manifest.json"),
         started);
  return ok ? 0 : 3;
}

int run(const std::vector<std::string>& args);

int cmd_rerun(const std::string& path) {
  const RunManifest recorded = read_manifest(path);
  if (recorded.command == "rerun") throw UsageError("refusing to rerun a rerun manifest");
  std::cout << "rerunning: rkt";
  for (const auto& a : recorded.argv) std::cout << ' ' << a;
  std::cout << "\n";
  const int code = run(recorded.argv);
  if (code != 0) return code;

  std::size_t mismatches = 0;
  for (const auto& [role, p] : recorded.outputs) {
    const auto want = recorded.checksums.find(p);
    if (want == recorded.checksums.end()) continue;
    const std::string got = fs::is_regular_file(p) ? file_checksum(p) : "missing";
    const bool same = got == want->second;
    if (!same) ++mismatches;
    std::printf("%-9s %-10s %s\n", same ? "identical" : "DIFFERS", role.c_str(), p.c_str());
  }
  if (mismatches) {
    throw DataError(std::to_string(mismatches) + " artifact(s) differ from the manifest");
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Relation-aware knowledge tracing", "rkt"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  std::string manifest;
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest, "Run manifest path [next to the outputs]");
  };

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset with known relations");
  std::string gen_out, gen_config;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_students, gen_interactions;
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "Synthetic config JSON");
  gen->add_option("--seed", gen_seed, "Seed [7]");
  gen->add_option("--students", gen_students, "Number of students [500]");
  gen->add_option("--interactions", gen_interactions, "Interactions per student [60]");
  add_manifest(gen);

  // build-relations
  auto* rel = app.add_subcommand("build-relations", "Mine the exercise relation matrix");
  RelationFlags rf;
  rel->add_option("--logs", rf.logs, "Interaction log JSONL")->required();
  rel->add_option("--texts", rf.texts, "Exercise text JSONL (methods 1, 2, 4)");
  rel->add_option("--out", rf.out, "Output CSV")->required();
  rel->add_option("--method", rf.method, "1 same concept, 2 text, 3 performance, 4 both")
      ->check(CLI::Range(1, 4))
      ->default_val(4);
  rel->add_option("--theta", rf.theta, "Threshold")->default_val(relation::kDefaultTheta);
  rel->add_option("--min-support", rf.min_support, "Minimum pair observations for phi")
      ->default_val(relation::kDefaultMinSupport);
  rel->add_option("--word-seed", rf.word_seed, "Random word vector seed")->default_val(0);
  rel->add_option("--word-vectors", rf.word_vectors, "Pretrained word vectors (text format)");
  rel->add_option("--num-exercises", rf.num_exercises, "Exercise universe size [from data]");
  add_manifest(rel);

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  TrainFlags tf;
  std::string train_out;
  add_train_flags(tr, tf);
  tr->add_option("--out-dir", train_out, "Model directory")->required();
  add_manifest(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a trained model on its test students");
  std::string ev_dir, ev_logs, ev_out;
  bool ev_online = false, ev_groups = false;
  ev->add_option("--model-dir", ev_dir, "Model directory from train")->required();
  ev->add_option("--logs", ev_logs, "Interaction log JSONL used for training")->required();
  ev->add_option("--out", ev_out, "Report JSON [model-dir/eval.json]");
  ev->add_flag("--online", ev_online, "One Adam step after each revealed response");
  ev->add_flag("--groups", ev_groups, "Per-sparsity-group metrics");
  add_manifest(ev);

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and evaluate the eight ablation variants");
  TrainFlags af;
  std::string ab_out;
  std::vector<std::string> ab_variants;
  add_train_flags(ab, af);
  ab->add_option("--out-dir", ab_out, "Output directory")->required();
  ab->add_option("--variants", ab_variants, "Subset of variants [all eight]");
  add_manifest(ab);

  // export-attention
  auto* ex = app.add_subcommand("export-attention", "Dump attention and relation weights");
  std::string ex_dir, ex_logs, ex_out;
  std::optional<std::int64_t> ex_student;
  std::size_t ex_window = 0;
  bool ex_aggregate = false;
  ex->add_option("--model-dir", ex_dir, "Model directory from train")->required();
  ex->add_option("--logs", ex_logs, "Interaction log JSONL used for training")->required();
  ex->add_option("--out", ex_out, "Output CSV")->required();
  ex->add_option("--student", ex_student, "Student id [first test student]");
  ex->add_option("--window", ex_window, "Window index of that student")->default_val(0);
  ex->add_flag("--aggregate", ex_aggregate, "Position-averaged matrix over test windows");
  add_manifest(ex);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  train::ModelGradcheckOptions go;
  double tolerance = 1e-4;
  std::string gc_out;
  gc->add_option("--d", go.model_dim, "Model dimension")->default_val(8);
  gc->add_option("--l", go.window_length, "Window length")->default_val(5);
  gc->add_option("--seed", go.seed, "Seed")->default_val(0);
  gc->add_option("--coordinates", go.check.coordinates, "Coordinates to probe")->default_val(200);
  gc->add_option("--step", go.check.step, "Central difference step")->default_val(1e-5);
  gc->add_option("--tolerance", tolerance, "Maximum relative error")->default_val(1e-4);
  gc->add_option("--out", gc_out, "Result JSON");
  add_manifest(gc);

  // rerun
  auto* rr = app.add_subcommand("rerun", "Replay a manifest and verify its artifacts");
  std::string rr_path;
  rr->add_option("manifest", rr_path, "Manifest JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*gen) return cmd_gen_synth(args, gen_out, gen_config, gen_seed, gen_students,
                                 gen_interactions, manifest);
  if (*rel) return cmd_build_relations(args, [&] {
                auto f = rf;
                f.manifest = manifest;
                return f;
              }());
  if (*tr) return cmd_train(args, tf, train_out, manifest);
  if (*ev) return cmd_eval(args, ev_dir, ev_logs, ev_online, ev_groups, ev_out, manifest);
  if (*ab) return cmd_ablate(args, af, ab_out, ab_variants, manifest);
  if (*ex) {
    return cmd_export_attention(args, ex_dir, ex_logs, ex_out, ex_student, ex_window,
                                ex_aggregate, manifest);
  }
  if (*gc) return cmd_gradcheck(args, go, tolerance, gc_out, manifest);
  if (*rr) return cmd_rerun(rr_path);
  return 1;
}

}  // namespace
}  // namespace rkt::cli

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return rkt::cli::run(args);
  } catch (const rkt::Error& e) {
    std::cerr << "rkt: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "rkt: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "rkt: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rkt: " << e.what() << "\n";
    return 3;
  }
}
