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

#include "rkt/relation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rkt/error.hpp"

namespace rkt::relation {

void ContingencyTable::add(int correct_j, int correct_i) {
  if (correct_j) {
    ++(correct_i ? n11 : n10);
  } else {
    ++(correct_i ? n01 : n00);
  }
}

ContingencyTable& ContingencyTable::operator+=(const ContingencyTable& o) {
  n00 += o.n00;
  n01 += o.n01;
  n10 += o.n10;
  n11 += o.n11;
  return *this;
}

ContingencyTable build_contingency(const data::Sequences& logs, std::size_t i,
                                   std::size_t j, std::size_t num_exercises) {
  if (i >= num_exercises || j >= num_exercises) {
    throw DataError("build_contingency: unknown exercise id " +
                    std::to_string(std::max(i, j)));
  }
  ContingencyTable t;
  for (const auto& s : logs) {
    int last_j = -1;
    for (const auto& x : s.interactions) {
      if (x.exercise_id >= num_exercises) {
        throw DataError("build_contingency: unknown exercise id " +
                        std::to_string(x.exercise_id));
      }
      if (x.exercise_id == i && last_j >= 0) t.add(last_j, x.correct);
      if (x.exercise_id == j) last_j = x.correct;
    }
  }
  return t;
}

void PairTables::accumulate(const data::StudentSequence& sequence) {
  // Latest correctness per exercise seen so far, in first-seen order.
  std::unordered_map<std::size_t, int> last;
  std::vector<std::size_t> seen;
  for (const auto& x : sequence.interactions) {
    const std::size_t i = x.exercise_id;
    if (i >= num_exercises_) {
      throw DataError("contingency: unknown exercise id " + std::to_string(i));
    }
    for (std::size_t j : seen) {
      if (j == i) continue;
      tables_[static_cast<std::uint64_t>(i) * num_exercises_ + j].add(last[j], x.correct);
    }
    auto [it, inserted] = last.try_emplace(i, x.correct);
    if (inserted) {
      seen.push_back(i);
    } else {
      it->second = x.correct;
    }
  }
}

PairTables& PairTables::operator+=(const PairTables& other) {
  if (other.num_exercises_ != num_exercises_) {
    throw DataError("contingency merge: exercise universes differ");
  }
  for (const auto& [key, t] : other.tables_) tables_[key] += t;
  return *this;
}

const ContingencyTable* PairTables::find(std::size_t i, std::size_t j) const {
  auto it = tables_.find(static_cast<std::uint64_t>(i) * num_exercises_ + j);
  return it == tables_.end() ? nullptr : &it->second;
}

PairTables accumulate_contingency(const data::Sequences& logs, std::size_t num_exercises) {
  PairTables tables(num_exercises);
  for (const auto& s : logs) tables.accumulate(s);
  return tables;
}

double phi(const ContingencyTable& t) {
  const auto n1s = static_cast<double>(t.row1());
  const auto n0s = static_cast<double>(t.row0());
  const auto ns1 = static_cast<double>(t.col1());
  const auto ns0 = static_cast<double>(t.col0());
  if (n1s == 0.0 || n0s == 0.0 || ns1 == 0.0 || ns0 == 0.0) return 0.0;
  const double num = static_cast<double>(t.n11) * static_cast<double>(t.n00) -
                     static_cast<double>(t.n01) * static_cast<double>(t.n10);
  return num / std::sqrt(n1s * n0s * ns1 * ns0);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DataError("cosine: dimension mismatch " + std::to_string(u.size()) + " vs " +
                    std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  if (uu == 0.0 || vv == 0.0) throw DataError("undefined similarity");
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

Method method_from_int(int m) {
  if (m < 1 || m > 4) throw UsageError("relation method must be 1, 2, 3 or 4");
  return static_cast<Method>(m);
}

RelationMatrix::RelationMatrix(std::size_t num_exercises, double theta, Method method,
                               std::vector<RelationEntry> entries)
    : num_exercises_(num_exercises), theta_(theta), method_(method) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  row_ptr_.assign(num_exercises + 1, 0);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    if (e.i >= num_exercises || e.j >= num_exercises) {
      throw DataError("relation entry (" + std::to_string(e.i) + "," +
                      std::to_string(e.j) + ") outside universe");
    }
    if (e.i == e.j) throw DataError("relation matrix cannot store self-relations");
    if (k > 0 && entries[k - 1].i == e.i && entries[k - 1].j == e.j) {
      throw DataError("duplicate relation entry");
    }
    ++row_ptr_[e.i + 1];
    cols_.push_back(e.j);
    values_.push_back(e.value);
  }
  for (std::size_t r = 0; r < num_exercises; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

double RelationMatrix::density() const {
  if (num_exercises_ < 2) return 0.0;
  const double pairs =
      static_cast<double>(num_exercises_) * static_cast<double>(num_exercises_ - 1);
  return static_cast<double>(nnz()) / pairs;
}

double RelationMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= num_exercises_ || j >= num_exercises_) return 0.0;
  const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values_[static_cast<std::size_t>(it - cols_.begin())];
}

std::vector<RelationEntry> RelationMatrix::entries() const {
  std::vector<RelationEntry> out;
  out.reserve(nnz());
  for (std::size_t i = 0; i < num_exercises_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      out.push_back({i, cols_[k], values_[k]});
  return out;
}

namespace {

std::string method_name(Method m) {
  return "method " + std::to_string(static_cast<int>(m));
}

}  // namespace

RelationMatrix build_relation_matrix(const RelationInputs& in, const RelationOptions& opt) {
  const std::size_t E = in.num_exercises;
  const Method m = opt.method;
  const bool needs_text = m == Method::kText || m == Method::kTextAndPerformance;
  const bool needs_logs = m == Method::kPerformance || m == Method::kTextAndPerformance;
  if (m == Method::kSameConcept && !in.kc_labels) {
    throw UsageError(method_name(m) + " requires knowledge-concept labels");
  }
  if (needs_text && !in.embeddings) {
    throw UsageError(method_name(m) + " requires exercise embeddings");
  }
  if (needs_logs && !in.logs) {
    throw UsageError(method_name(m) + " requires interaction logs");
  }
  if (in.embeddings && in.embeddings->num_exercises() < E) {
    throw DataError("embeddings cover " + std::to_string(in.embeddings->num_exercises()) +
                    " exercises, need " + std::to_string(E));
  }

  std::vector<RelationEntry> entries;

  if (m == Method::kSameConcept) {
    const auto& kc = *in.kc_labels;
    for (std::size_t i = 0; i < E && i < kc.size(); ++i) {
      if (!kc[i]) continue;
      for (std::size_t j = 0; j < E && j < kc.size(); ++j) {
        if (i != j && kc[j] && *kc[i] == *kc[j]) entries.push_back({i, j, 1.0});
      }
    }
    return RelationMatrix(E, opt.theta, m, std::move(entries));
  }

  std::optional<PairTables> tables;
  if (needs_logs) tables = accumulate_contingency(*in.logs, E);

  auto phi_of = [&](std::size_t i, std::size_t j) {
    const ContingencyTable* t = tables->find(i, j);
    if (!t || t->total() < opt.min_support) return 0.0;
    return phi(*t);
  };

  std::vector<std::uint8_t> has_text(E, 0);
  if (needs_text)
    for (std::size_t e = 0; e < E; ++e) has_text[e] = in.embeddings->has_text(e);
  auto sim_of = [&](std::size_t i, std::size_t j) {
    if (!has_text[i] || !has_text[j]) return 0.0;
    return cosine(in.embeddings->row(i), in.embeddings->row(j));
  };

  if (m == Method::kPerformance) {
    for (const auto& [key, t] : tables->tables()) {
      const std::size_t i = key / E, j = key % E;
      const double v = phi_of(i, j);
      if (v > opt.theta) entries.push_back({i, j, v});
    }
    return RelationMatrix(E, opt.theta, m, std::move(entries));
  }

  for (std::size_t i = 0; i < E; ++i) {
    for (std::size_t j = 0; j < E; ++j) {
      if (i == j) continue;
      double v = sim_of(i, j);
      if (m == Method::kTextAndPerformance) v += phi_of(i, j);
      if (v > opt.theta) entries.push_back({i, j, v});
    }
  }
  return RelationMatrix(E, opt.theta, m, std::move(entries));
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  return std::filesystem::path(csv_path.string() + ".json");
}

void save_relation_matrix(const RelationMatrix& a, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw DataError("cannot write relation matrix " + csv_path.string());
  out << "i,j,value\n";
  char buf[64];
  for (const auto& e : a.entries()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    out << e.i << ',' << e.j << ',' << buf << '\n';
  }
  if (!out) throw DataError("failed writing " + csv_path.string());

  std::ofstream side(sidecar_path(csv_path), std::ios::trunc);
  if (!side) throw DataError("cannot write relation sidecar for " + csv_path.string());
  const nlohmann::json j = {{"num_exercises", a.num_exercises()},
                            {"theta", a.theta()},
                            {"method", static_cast<int>(a.method())}};
  side << j.dump(2) << '\n';
}

RelationMatrix load_relation_matrix(const std::filesystem::path& csv_path) {
  std::ifstream side(sidecar_path(csv_path));
  if (!side) throw DataError("missing relation sidecar " + sidecar_path(csv_path).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(side);
  } catch (const std::exception& e) {
    throw DataError("malformed relation sidecar: " + std::string(e.what()));
  }
  const auto E = meta.at("num_exercises").get<std::size_t>();
  const auto theta = meta.at("theta").get<double>();
  const auto method = method_from_int(meta.at("method").get<int>());

  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open relation matrix " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("i,j,value", 0) != 0) {
    throw DataError(csv_path.string() + ": expected header i,j,value");
  }
  std::vector<RelationEntry> entries;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    RelationEntry e;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> e.i >> c1 >> e.j >> c2 >> e.value) || c1 != ',' || c2 != ',') {
      throw DataError(csv_path.string() + ":" + std::to_string(lineno) +
                      ": malformed relation row");
    }
    entries.push_back(e);
  }
  return RelationMatrix(E, theta, method, std::move(entries));
}

}  // namespace rkt::relation
