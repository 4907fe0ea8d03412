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

#include "rkt/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rkt/binary_io.hpp"
#include "rkt/error.hpp"
#include "rkt/rng.hpp"

namespace rkt::corpus {
namespace {

constexpr std::uint32_t kEmbeddingVersion = 1;

bool is_alpha(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_operator(unsigned char c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '=':
    case '<': case '>': case '^': case '_': case '|':
      return true;
    default:
      return false;
  }
}

char lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                 : static_cast<char>(c);
}

template <typename Pred>
std::size_t take_run(std::string_view text, std::size_t i, Pred pred, std::string& out) {
  while (i < text.size() && pred(static_cast<unsigned char>(text[i]))) {
    out.push_back(lower(static_cast<unsigned char>(text[i])));
    ++i;
  }
  return i;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  bool formula = false;
  std::size_t i = 0;
  while (i < text.size() && tokens.size() < kMaxTokens) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '$') {
      formula = !formula;
      ++i;
      if (i < text.size() && text[i] == '$') ++i;  // $$ display math
      continue;
    }
    if (is_operator(c)) {
      tokens.emplace_back(1, static_cast<char>(c));
      ++i;
      continue;
    }
    std::string tok;
    if (formula) {
      if (c == '\\') {
        i = take_run(text, i + 1, is_alpha, tok);
        if (tok.empty()) ++i;  // escaped symbol such as \{ or \,
      } else if (is_alpha(c)) {
        i = take_run(text, i, is_alpha, tok);
      } else if (is_digit(c)) {
        i = take_run(text, i, is_digit, tok);
      } else {
        ++i;
      }
    } else {
      if (is_alpha(c) || is_digit(c)) {
        i = take_run(text, i, [](unsigned char ch) { return is_alpha(ch) || is_digit(ch); },
                     tok);
      } else {
        ++i;
      }
    }
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::vector<ExerciseRecord> read_exercise_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open exercise text file " + path.string());
  std::vector<ExerciseRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ExerciseRecord r;
      const auto id = j.at("exercise_id").get<long long>();
      if (id < 0) throw DataError("negative exercise_id");
      r.exercise_id = static_cast<std::size_t>(id);
      r.text = j.at("text").get<std::string>();
      if (j.contains("kc") && !j["kc"].is_null()) r.kc = j["kc"].get<std::string>();
      records.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed exercise record: " + e.what());
    }
  }
  return records;
}

void write_exercise_records(std::span<const ExerciseRecord> records,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write exercise text file " + path.string());
  for (const auto& r : records) {
    nlohmann::json j = {{"exercise_id", r.exercise_id}, {"text", r.text}};
    if (r.kc) j["kc"] = *r.kc;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<ExerciseText> tokenize_all(std::span<const ExerciseRecord> records) {
  std::vector<ExerciseText> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.exercise_id, tokenize(r.text)});
  return out;
}

Vocabulary Vocabulary::build(std::span<const ExerciseText> texts) {
  Vocabulary v;
  std::size_t total = 0;
  for (const auto& t : texts) {
    for (const auto& w : t.tokens) {
      auto [it, inserted] = v.ids_.try_emplace(w, v.words_.size());
      if (inserted) {
        v.words_.push_back(w);
        v.counts_.push_back(0);
      }
      ++v.counts_[it->second];
      ++total;
    }
  }
  if (total == 0) throw DataError("empty corpus");
  v.probs_.resize(v.words_.size());
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    v.probs_[i] = static_cast<double>(v.counts_[i]) / static_cast<double>(total);
  }
  return v;
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> WordVectors::deterministic_vector(std::string_view word,
                                                      std::uint64_t seed,
                                                      std::size_t dim) {
  Rng rng(hash_combine(seed, fnv1a(word)));
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

WordVectors WordVectors::deterministic(const Vocabulary& vocab, std::uint64_t seed,
                                       std::size_t dim) {
  WordVectors wv;
  wv.matrix_ = num::Tensor({vocab.size(), dim});
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    const auto v = deterministic_vector(vocab.word(id), seed, dim);
    std::copy(v.begin(), v.end(), wv.matrix_.data() + id * dim);
  }
  wv.source_ = VectorSource::kDeterministicRandom;
  return wv;
}

WordVectors WordVectors::load(const std::filesystem::path& path, const Vocabulary& vocab,
                              std::uint64_t seed, std::size_t dim) {
  WordVectors wv = deterministic(vocab, seed, dim);
  wv.source_ = VectorSource::kLoaded;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vector file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof() || v.size() != dim) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(dim) + " values for '" + word + "'");
    }
    if (auto id = vocab.find(word)) {
      std::copy(v.begin(), v.end(), wv.matrix_.data() + *id * dim);
    }
  }
  return wv;
}

void WordVectors::scale(double c) {
  for (double& v : matrix_.values()) v *= c;
}

std::vector<double> sif_embed(std::span<const std::string> tokens, const Vocabulary& vocab,
                              const WordVectors& vectors, double a) {
  if (tokens.empty()) throw DataError("sif_embed: empty token list");
  if (!(a > 0.0)) throw DataError("sif_embed: SIF weight must be positive");
  std::vector<double> out(vectors.dim(), 0.0);
  for (const auto& w : tokens) {
    const auto id = vocab.find(w);
    if (!id) throw DataError("sif_embed: out-of-vocabulary token '" + w + "'");
    const double weight = a / (a + vocab.probability(*id));
    const auto f = vectors.row(*id);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += weight * f[k];
  }
  const double n = static_cast<double>(tokens.size());
  for (double& v : out) v /= n;
  return out;
}

bool ExerciseEmbeddings::has_text(std::size_t e) const {
  for (double v : row(e))
    if (v != 0.0) return true;
  return false;
}

ExerciseEmbeddings embed_exercises(std::span<const ExerciseText> texts,
                                   std::size_t num_exercises, const Vocabulary& vocab,
                                   const WordVectors& vectors, double a) {
  ExerciseEmbeddings emb;
  emb.sif_weight = a;
  emb.matrix = num::Tensor({num_exercises, vectors.dim()}, 0.0);
  for (const auto& t : texts) {
    if (t.exercise_id >= num_exercises) {
      throw DataError("exercise id " + std::to_string(t.exercise_id) +
                      " outside exercise universe of size " +
                      std::to_string(num_exercises));
    }
    std::vector<std::string> known;
    for (const auto& w : t.tokens)
      if (vocab.find(w)) known.push_back(w);
    if (known.empty()) continue;
    const auto v = sif_embed(known, vocab, vectors, a);
    std::copy(v.begin(), v.end(), emb.matrix.data() + t.exercise_id * vectors.dim());
  }
  return emb;
}

void save_embeddings(const ExerciseEmbeddings& emb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write embeddings " + path.string());
  io::write_magic(out, "RKTE");
  io::write_u32(out, kEmbeddingVersion);
  io::write_u32(out, static_cast<std::uint32_t>(emb.matrix.rows()));
  io::write_u32(out, static_cast<std::uint32_t>(emb.matrix.cols()));
  for (double v : emb.matrix.values()) io::write_f64(out, v);
  if (!out) throw DataError("failed writing embeddings " + path.string());
}

ExerciseEmbeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings " + path.string());
  io::expect_magic(in, "RKTE");
  const auto version = io::read_u32(in, "version");
  if (version != kEmbeddingVersion) {
    throw DataError("unsupported embedding version " + std::to_string(version));
  }
  const auto rows = io::read_u32(in, "rows");
  const auto cols = io::read_u32(in, "cols");
  ExerciseEmbeddings emb;
  emb.matrix = num::Tensor({rows, cols});
  for (double& v : emb.matrix.values()) v = io::read_f64(in, "values");
  return emb;
}

}  // namespace rkt::corpus
