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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rkt/corpus.hpp"
#include "rkt/error.hpp"
#include "test_util.hpp"

namespace rkt::corpus {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, FormulaBecomesTexTokens) {
  EXPECT_EQ(tokenize("$\\sqrt(x)+1$"), (Tokens{"sqrt", "x", "+", "1"}));
  EXPECT_EQ(tokenize("Solve $x^2$ twice"), (Tokens{"solve", "x", "^", "2", "twice"}));
  EXPECT_EQ(tokenize(""), Tokens{});
}

TEST(Tokenize, PunctuationAndCase) {
  EXPECT_EQ(tokenize("What IS 3, exactly?"), (Tokens{"what", "is", "3", "exactly"}));
  EXPECT_EQ(tokenize("$$\\frac{ab}{12}$$ and x2"),
            (Tokens{"frac", "ab", "12", "and", "x2"}));
  EXPECT_EQ(tokenize("$a\\,b \\{c\\}$"), (Tokens{"a", "b", "c"}));
  EXPECT_EQ(tokenize("a-b=c"), (Tokens{"a", "-", "b", "=", "c"}));
}

TEST(Tokenize, TruncatesAt200) {
  std::string text;
  for (int i = 0; i < 300; ++i) text += "w" + std::to_string(i) + " ";
  const auto t = tokenize(text);
  ASSERT_EQ(t.size(), kMaxTokens);
  EXPECT_EQ(t.back(), "w199");
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
  for (const char* s : {"Solve $x^2 + \\sqrt{y}$ now", "Find $\\frac{1}{2}$ of 10 apples!",
                        "$\\sin(\\theta)$ > 0 | x_1"}) {
    const auto once = tokenize(s);
    std::string joined;
    for (const auto& w : once) joined += w + " ";
    EXPECT_EQ(tokenize(joined), once) << s;
  }
}

std::vector<ExerciseText> texts(std::vector<Tokens> lists) {
  std::vector<ExerciseText> out;
  for (std::size_t i = 0; i < lists.size(); ++i) out.push_back({i, std::move(lists[i])});
  return out;
}

TEST(Vocabulary, Frequencies) {
  auto v = Vocabulary::build(texts({{"a", "a", "b"}}));
  EXPECT_DOUBLE_EQ(v.probability(*v.find("a")), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(v.probability(*v.find("b")), 1.0 / 3.0);
  auto w = Vocabulary::build(texts({{"a"}, {"b"}}));
  EXPECT_DOUBLE_EQ(w.probability(*w.find("a")), 0.5);
  EXPECT_DOUBLE_EQ(w.probability(*w.find("b")), 0.5);
  EXPECT_THROW(Vocabulary::build(texts({{}, {}})), DataError);
}

TEST(Vocabulary, GoldenCorpusCounts) {
  const std::vector<std::string> corpus = {"Solve $x^2$ twice", "Find x if $x+1=3$",
                                           "Solve for x", "$\\frac{1}{2}$ of x",
                                           "Twice x is 4"};
  std::vector<ExerciseRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) records.push_back({i, corpus[i], {}});
  const auto v = Vocabulary::build(tokenize_all(records));
  // Counted by a separate word-count script over the hand-tokenized corpus.
  const std::map<std::string, std::size_t> want = {
      {"+", 1}, {"1", 2},   {"2", 2},    {"3", 1},  {"4", 1},     {"=", 1},
      {"^", 1}, {"find", 1}, {"for", 1}, {"frac", 1}, {"if", 1}, {"is", 1},
      {"of", 1}, {"solve", 2}, {"twice", 2}, {"x", 6}};
  ASSERT_EQ(v.size(), want.size());
  for (const auto& [word, count] : want) {
    const auto id = v.find(word);
    ASSERT_TRUE(id) << word;
    EXPECT_EQ(v.count(*id), count) << word;
    EXPECT_DOUBLE_EQ(v.probability(*id), static_cast<double>(count) / 25.0) << word;
  }
  EXPECT_EQ(v.word(0), "solve");  // first occurrence order
}

WordVectors vectors_from(const Vocabulary& vocab, const std::map<std::string, std::vector<double>>& rows,
                         std::size_t dim, const std::string& name) {
  const auto path = rkt::testing::scratch_dir(name) / "vectors.txt";
  std::ofstream out(path);
  for (const auto& [w, v] : rows) {
    out << w;
    for (double x : v) out << ' ' << x;
    out << '\n';
  }
  out.close();
  return WordVectors::load(path, vocab, 0, dim);
}

TEST(Sif, TrivialWeights) {
  auto vocab = Vocabulary::build(texts({{"w", "u"}}));  // p = 0.5 each
  auto vec = vectors_from(vocab, {{"w", {2, -4}}, {"u", {2, -4}}}, 2, "sif_trivial");
  const auto one = sif_embed(Tokens{"w"}, vocab, vec, 0.5);
  EXPECT_DOUBLE_EQ(one[0], 1.0);
  EXPECT_DOUBLE_EQ(one[1], -2.0);
  // Equal vectors and frequencies: a / (a + p) * v.
  const auto two = sif_embed(Tokens{"w", "u"}, vocab, vec, 0.25);
  EXPECT_DOUBLE_EQ(two[0], 1.0 / 3.0 * 2.0);
}

TEST(Sif, ThreeTokenOracle) {
  const std::vector<std::string> corpus = {"Solve $x^2$ twice", "Find x if $x+1=3$",
                                           "Solve for x", "$\\frac{1}{2}$ of x",
                                           "Twice x is 4"};
  std::vector<ExerciseRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) records.push_back({i, corpus[i], {}});
  const auto vocab = Vocabulary::build(tokenize_all(records));
  const auto vec = vectors_from(vocab, {{"x", {1, 0, 2}}, {"solve", {0, 3, -1}}}, 3, "sif3");
  // Scripted evaluation of the weighted mean with p(x) = 6/25, p(solve) = 2/25.
  const auto e = sif_embed(Tokens{"x", "solve", "x"}, vocab, vec, 1e-3);
  EXPECT_NEAR(e[0], 0.0027662517289073307, 1e-17);
  EXPECT_NEAR(e[1], 0.012345679012345678, 1e-17);
  EXPECT_NEAR(e[2], 0.0014172771203661016, 1e-17);
}

TEST(Sif, Errors) {
  auto vocab = Vocabulary::build(texts({{"a"}}));
  auto vec = WordVectors::deterministic(vocab, 1);
  EXPECT_THROW(sif_embed(Tokens{}, vocab, vec), DataError);
  try {
    sif_embed(Tokens{"zebra"}, vocab, vec);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zebra"), std::string::npos);
  }
}

class SifProperties : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = texts({{"alpha", "beta", "beta", "gamma"}, {"delta", "alpha"}, {"gamma", "gamma"}});
    vocab_ = Vocabulary::build(corpus_);
    vec_ = WordVectors::deterministic(vocab_, 99);
  }
  std::vector<ExerciseText> corpus_;
  Vocabulary vocab_;
  WordVectors vec_;
};

TEST_F(SifProperties, LinearInWordVectors) {
  auto scaled = vec_;
  scaled.scale(-2.5);
  const Tokens t{"alpha", "beta", "gamma", "beta"};
  const auto a = sif_embed(t, vocab_, vec_), b = sif_embed(t, vocab_, scaled);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(b[k], -2.5 * a[k], 1e-15);
}

TEST_F(SifProperties, PermutationInvariant) {
  Tokens t{"alpha", "beta", "gamma", "beta", "delta"};
  const auto ref = sif_embed(t, vocab_, vec_);
  std::sort(t.begin(), t.end());
  do {
    const auto e = sif_embed(t, vocab_, vec_);
    for (std::size_t k = 0; k < e.size(); ++k) ASSERT_NEAR(e[k], ref[k], 1e-15);
  } while (std::next_permutation(t.begin(), t.end()));
}

TEST(SifUniform, ConstantTimesMean) {
  auto vocab = Vocabulary::build(texts({{"a", "b", "c", "d"}}));
  auto vec = WordVectors::deterministic(vocab, 3);
  const Tokens t{"a", "c", "d"};
  const auto e = sif_embed(t, vocab, vec, 1e-3);
  const double c = 1e-3 / (1e-3 + 0.25);
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double mean = (vec.row(0)[k] + vec.row(2)[k] + vec.row(3)[k]) / 3.0;
    EXPECT_NEAR(e[k], c * mean, 1e-15);
  }
}

TEST(WordVectorsTest, DeterministicPerWordAndSeed) {
  auto v1 = Vocabulary::build(texts({{"apple", "pear"}}));
  auto v2 = Vocabulary::build(texts({{"pear", "kiwi", "apple"}}));
  auto a = WordVectors::deterministic(v1, 5), b = WordVectors::deterministic(v2, 5);
  EXPECT_EQ(a.dim(), kWordDim);
  const auto ra = a.row(*v1.find("apple")), rb = b.row(*v2.find("apple"));
  EXPECT_TRUE(std::equal(ra.begin(), ra.end(), rb.begin()));
  auto c = WordVectors::deterministic(v1, 6);
  EXPECT_NE(c.row(0)[0], a.row(0)[0]);
}

TEST(WordVectorsTest, LoadRejectsWrongWidth) {
  auto vocab = Vocabulary::build(texts({{"a"}}));
  EXPECT_THROW(vectors_from(vocab, {{"a", {1, 2}}}, 3, "badwidth"), DataError);
}

TEST(Embeddings, IdenticalTokenMultisetsGiveIdenticalRows) {
  std::vector<ExerciseText> t = texts({{"p", "q", "q"}, {"q", "p", "q"}, {"r"}});
  const auto vocab = Vocabulary::build(t);
  const auto vec = WordVectors::deterministic(vocab, 0);
  const auto emb = embed_exercises(t, 4, vocab, vec);
  EXPECT_EQ(emb.num_exercises(), 4u);
  const auto r0 = emb.row(0), r1 = emb.row(1);
  EXPECT_TRUE(std::equal(r0.begin(), r0.end(), r1.begin()));
  EXPECT_TRUE(emb.has_text(2));
  EXPECT_FALSE(emb.has_text(3));  // no text: zero row
}

TEST(Embeddings, UnknownWordsAreZeroAndUncounted) {
  const auto vocab = Vocabulary::build(texts({{"p", "q"}}));
  const auto vec = WordVectors::deterministic(vocab, 0);
  const auto with_unk = embed_exercises(texts({{"p", "zzz"}}), 1, vocab, vec);
  const auto plain = sif_embed(Tokens{"p"}, vocab, vec);
  for (std::size_t k = 0; k < plain.size(); ++k) EXPECT_EQ(with_unk.row(0)[k], plain[k]);
}

TEST(Embeddings, BinaryRoundTrip) {
  std::vector<ExerciseText> t = texts({{"p", "q"}, {"q"}});
  const auto vocab = Vocabulary::build(t);
  const auto emb = embed_exercises(t, 2, vocab, WordVectors::deterministic(vocab, 4));
  const auto path = rkt::testing::scratch_dir("emb") / "e.bin";
  save_embeddings(emb, path);
  const auto back = load_embeddings(path);
  EXPECT_EQ(back.matrix, emb.matrix);
  std::ofstream(path, std::ios::binary) << "NOPE";
  EXPECT_THROW(load_embeddings(path), DataError);
}

TEST(ExerciseRecords, JsonlRoundTripAndLineNumbers) {
  const auto dir = rkt::testing::scratch_dir("records");
  std::vector<ExerciseRecord> recs = {{0, "Solve $x$", "algebra"}, {3, "Other", std::nullopt}};
  write_exercise_records(recs, dir / "ex.jsonl");
  const auto back = read_exercise_records(dir / "ex.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].kc, std::optional<std::string>("algebra"));
  EXPECT_EQ(back[1].exercise_id, 3u);
  EXPECT_FALSE(back[1].kc);

  std::ofstream(dir / "bad.jsonl") << "{\"exercise_id\": 0, \"text\": \"a\"}\n{\"text\": 5}\n";
  try {
    read_exercise_records(dir / "bad.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace rkt::corpus
