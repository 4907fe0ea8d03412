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

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rkt/error.hpp"
#include "rkt/relation.hpp"
#include "rkt/rng.hpp"
#include "test_util.hpp"

namespace rkt::relation {
namespace {

using data::Interaction;
using data::Sequences;
using data::StudentSequence;

StudentSequence seq(std::int64_t id, std::vector<std::pair<std::size_t, int>> xs) {
  StudentSequence s{id, {}};
  double t = 0;
  for (auto [e, c] : xs) s.interactions.push_back({e, c, t++});
  return s;
}

constexpr std::size_t I = 0, J = 1;

TEST(Contingency, PairsWithLatestEarlierOccurrence) {
  const auto a = build_contingency({seq(0, {{J, 1}, {I, 1}})}, I, J, 2);
  EXPECT_EQ(a, (ContingencyTable{0, 0, 0, 1}));
  // latest j before i was correct
  const auto b = build_contingency({seq(0, {{J, 0}, {J, 1}, {I, 0}})}, I, J, 2);
  EXPECT_EQ(b, (ContingencyTable{0, 0, 1, 0}));
  // i before any j contributes nothing; every later i pairs with the same j
  const auto c = build_contingency({seq(0, {{I, 1}, {J, 0}, {I, 1}, {I, 0}})}, I, J, 2);
  EXPECT_EQ(c, (ContingencyTable{1, 1, 0, 0}));
  EXPECT_THROW(build_contingency({}, 2, 0, 2), DataError);
}

TEST(Contingency, TablesMatchPerPairScan) {
  Rng rng(11);
  Sequences logs;
  for (int s = 0; s < 30; ++s) {
    std::vector<std::pair<std::size_t, int>> xs;
    for (int k = 0; k < 25; ++k)
      xs.push_back({rng.below(6), static_cast<int>(rng.below(2))});
    logs.push_back(seq(s, xs));
  }
  const auto all = accumulate_contingency(logs, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (i == j) continue;
      const auto direct = build_contingency(logs, i, j, 6);
      const auto* t = all.find(i, j);
      EXPECT_EQ(t ? *t : ContingencyTable{}, direct) << i << "," << j;
    }
  }
  // additivity across a partition of students
  Sequences left(logs.begin(), logs.begin() + 13), right(logs.begin() + 13, logs.end());
  auto merged = accumulate_contingency(left, 6);
  merged += accumulate_contingency(right, 6);
  EXPECT_EQ(merged.tables(), all.tables());
}

TEST(Phi, HandComputedExample) {
  // (4*3 - 1*2) / sqrt(6*4*5*5) = 10 / sqrt(600)
  const ContingencyTable t{3, 1, 2, 4};
  EXPECT_DOUBLE_EQ(phi(t), 10.0 / std::sqrt(600.0));
  EXPECT_NEAR(phi(t), 0.408248290463863, 1e-15);
  EXPECT_EQ(phi(ContingencyTable{5, 0, 5, 0}), 0.0);  // empty margin
  EXPECT_EQ(phi(ContingencyTable{}), 0.0);
  EXPECT_DOUBLE_EQ(phi(ContingencyTable{4, 0, 0, 7}), 1.0);
  EXPECT_DOUBLE_EQ(phi(ContingencyTable{0, 4, 7, 0}), -1.0);
}

TEST(Phi, RangeAndAntisymmetry) {
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    ContingencyTable t{rng.below(40), rng.below(40), rng.below(40), rng.below(40)};
    const double p = phi(t);
    EXPECT_GE(p, -1.0);
    EXPECT_LE(p, 1.0);
    // Flipping the earlier exercise's correctness swaps rows and negates phi.
    const ContingencyTable flipped{t.n10, t.n11, t.n00, t.n01};
    EXPECT_NEAR(phi(flipped), -p, 1e-15);
  }
}

TEST(Cosine, ExampleAndScaleInvariance) {
  const std::vector<double> u{1, 2, 2}, v{2, 1, 2};
  EXPECT_DOUBLE_EQ(cosine(u, v), 8.0 / 9.0);
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(7), b(7);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    const double c = rng.uniform(0.1, 10.0);
    auto ca = a;
    for (auto& x : ca) x *= c;
    EXPECT_NEAR(cosine(ca, b), cosine(a, b), 1e-14);
    EXPECT_NEAR(cosine(a, b), cosine(b, a), 1e-15);
  }
  const std::vector<double> zero{0, 0, 0};
  EXPECT_THROW(cosine(u, zero), DataError);
  EXPECT_THROW(cosine(u, std::vector<double>{1, 2}), DataError);
}

TEST(Matrix, CsrLookupAndInvariants) {
  RelationMatrix a(5, 0.8, Method::kText, {{3, 1, 0.9}, {0, 4, 1.5}, {3, 0, 1.1}, {0, 2, 0.85}});
  EXPECT_EQ(a.nnz(), 4u);
  EXPECT_DOUBLE_EQ(a.density(), 4.0 / 20.0);
  EXPECT_EQ(a.at(3, 1), 0.9);
  EXPECT_EQ(a.at(1, 3), 0.0);
  EXPECT_EQ(a.at(0, 2), 0.85);
  EXPECT_EQ(a.at(5, 0), 0.0);  // padding id
  const auto e = a.entries();
  ASSERT_EQ(e.size(), 4u);
  EXPECT_EQ(e[0], (RelationEntry{0, 2, 0.85}));
  EXPECT_EQ(e[3], (RelationEntry{3, 1, 0.9}));
  EXPECT_THROW(RelationMatrix(3, 0.8, Method::kText, {{1, 1, 1.0}}), DataError);
  EXPECT_THROW(RelationMatrix(3, 0.8, Method::kText, {{0, 3, 1.0}}), DataError);
  EXPECT_THROW(RelationMatrix(3, 0.8, Method::kText, {{0, 1, 1.0}, {0, 1, 2.0}}), DataError);
}

TEST(Matrix, SaveLoadRoundTrip) {
  RelationMatrix a(4, 0.7, Method::kTextAndPerformance,
                   {{0, 1, 0.1 + 0.2 + 0.7000000000000001}, {2, 3, 1.2345678901234567}});
  const auto path = rkt::testing::scratch_dir("relations") / "a.csv";
  save_relation_matrix(a, path);
  EXPECT_EQ(load_relation_matrix(path), a);
  std::ofstream(path) << "i,j,value\n0,x,1\n";
  EXPECT_THROW(load_relation_matrix(path), DataError);
}

struct Fixture {
  std::size_t E = 8;
  Sequences logs;
  corpus::ExerciseEmbeddings emb;
  std::vector<std::optional<std::string>> kc;

  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed);
    for (int s = 0; s < 60; ++s) {
      std::vector<std::pair<std::size_t, int>> xs;
      double ability = rng.normal();
      for (int k = 0; k < 30; ++k) {
        const std::size_t e = rng.below(E);
        // exercises share a per-pair signal through ability
        xs.push_back({e, rng.uniform() < 1.0 / (1.0 + std::exp(-ability - 0.2 * e)) ? 1 : 0});
      }
      logs.push_back(seq(s, xs));
    }
    emb.matrix = num::Tensor({E + 1, 4});
    for (std::size_t e = 0; e < E; ++e)
      for (std::size_t k = 0; k < 4; ++k) emb.matrix.at(e, k) = rng.normal() + (e % 2 ? 1.5 : 0);
    // exercise E has no text
    for (std::size_t e = 0; e < E; ++e) kc.push_back(e == 5 ? std::nullopt
                                                            : std::optional(std::string(e < 3 ? "a" : "b")));
  }
  RelationInputs inputs() const { return {E, &logs, &emb, &kc}; }
};

TEST(Build, MethodFourMatchesDenseOracle) {
  const Fixture f(21);
  for (double theta : {-0.5, 0.0, 0.4, 0.8, 1.2}) {
    const auto a = build_relation_matrix(f.inputs(), {Method::kTextAndPerformance, theta, 5});
    std::size_t nnz = 0;
    for (std::size_t i = 0; i < f.E; ++i) {
      for (std::size_t j = 0; j < f.E; ++j) {
        if (i == j) continue;
        const auto t = build_contingency(f.logs, i, j, f.E);
        const double p = t.total() < 5 ? 0.0 : phi(t);
        const double v = p + cosine(f.emb.row(i), f.emb.row(j));
        if (v > theta) {
          ++nnz;
          EXPECT_NEAR(a.at(i, j), v, 1e-15) << i << "," << j;
        } else {
          EXPECT_EQ(a.at(i, j), 0.0);
        }
      }
    }
    EXPECT_EQ(a.nnz(), nnz);
  }
}

TEST(Build, DensityNonIncreasingInTheta) {
  const Fixture f(4);
  for (Method m : {Method::kText, Method::kPerformance, Method::kTextAndPerformance}) {
    double prev = 1.0;
    for (double theta = -1.0; theta <= 2.0; theta += 0.1) {
      const double d = build_relation_matrix(f.inputs(), {m, theta, 5}).density();
      EXPECT_LE(d, prev);
      prev = d;
    }
  }
}

TEST(Build, SameConceptAndMissingInputs) {
  const Fixture f(1);
  const auto a = build_relation_matrix(f.inputs(), {Method::kSameConcept, 0.8, 5});
  EXPECT_EQ(a.at(0, 2), 1.0);
  EXPECT_EQ(a.at(2, 0), 1.0);
  EXPECT_EQ(a.at(0, 3), 0.0);
  EXPECT_EQ(a.at(4, 5), 0.0);  // unlabeled
  EXPECT_EQ(a.nnz(), 3u * 2 + 4u * 3);

  RelationInputs no_kc = f.inputs();
  no_kc.kc_labels = nullptr;
  try {
    build_relation_matrix(no_kc, {Method::kSameConcept, 0.8, 5});
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("method 1"), std::string::npos);
  }
  RelationInputs no_text = f.inputs();
  no_text.embeddings = nullptr;
  EXPECT_THROW(build_relation_matrix(no_text, {Method::kText, 0.8, 5}), UsageError);
  EXPECT_NO_THROW(build_relation_matrix(no_text, {Method::kPerformance, 0.8, 5}));
}

TEST(Build, ThresholdAboveCosineRangeIsEmpty) {
  const Fixture f(3);
  EXPECT_EQ(build_relation_matrix(f.inputs(), {Method::kText, 2.1, 5}).nnz(), 0u);
  EXPECT_EQ(build_relation_matrix(f.inputs(), {Method::kTextAndPerformance, 2.1, 5}).nnz(), 0u);
}

TEST(Build, MinSupportZeroesSparsePairs) {
  // one observation of (i=1, j=0): support below 5 means phi counts as 0
  const Sequences logs{seq(0, {{0, 1}, {1, 1}}), seq(1, {{0, 0}, {1, 0}})};
  RelationInputs in{2, &logs, nullptr, nullptr};
  EXPECT_EQ(build_relation_matrix(in, {Method::kPerformance, 0.5, 5}).nnz(), 0u);
  const auto a = build_relation_matrix(in, {Method::kPerformance, 0.5, 2});
  EXPECT_DOUBLE_EQ(a.at(1, 0), 1.0);
}

}  // namespace
}  // namespace rkt::relation
