#include <cmath>

#include "doctest.h"
#include "ifx/analytics.hpp"
#include "ifx/model.hpp"
#include "ifx/similarity.hpp"

using namespace ifx;

namespace {

EmbeddingSet set_of(std::string code, std::vector<std::vector<double>> v) {
  EmbeddingSet s;
  s.code = std::move(code);
  s.dim = v.empty() ? 0 : v[0].size();
  s.vectors = std::move(v);
  return s;
}

}  // namespace

TEST_CASE("cosine") {
  const std::vector<double> u{1.0, 2.0, -0.5}, e1{1.0, 0.0}, e2{0.0, 1.0}, neg{-1.0, 0.0};
  CHECK(cosine(u, u) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(e1, e2) == 0.0);
  CHECK(cosine(e1, neg) == -1.0);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(cosine(e1, zero), Error);
}

TEST_CASE("similarity matrix") {
  // sentence 1 cosine 0.2, sentence 2 cosine 0.6
  const double s2 = std::sqrt(1.0 - 0.04), s6 = std::sqrt(1.0 - 0.36);
  const auto a = set_of("a_Latn", {{1, 0}, {1, 0}});
  const auto b = set_of("b_Grek", {{0.2, s2}, {0.6, s6}});
  auto a2 = a;
  a2.code = "c_Cyrl";
  const auto S = similarity_matrix({a, b, a2});
  CHECK(S.at(0, 1) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(S.at(0, 2) == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(2);
  std::vector<EmbeddingSet> sets;
  for (int l = 0; l < 5; ++l) {
    std::vector<std::vector<double>> v(20, std::vector<double>(6));
    for (auto& row : v)
      for (auto& x : row) x = rng.normal();
    sets.push_back(set_of("l" + std::to_string(l) + "_Latn", v));
  }
  const auto R = similarity_matrix(sets);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(R.at(i, i) == 1.0);
    for (std::size_t j = 0; j < 5; ++j) CHECK(R.at(i, j) == R.at(j, i));
  }
  sets[1].vectors.pop_back();
  CHECK_THROWS_AS(similarity_matrix(sets), Error);
}

TEST_CASE("correlations") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{3, 5, 7, 9, 11}, z{10, 4, 3, 1, -8};
  CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, z) == -1.0);
  const std::vector<double> ties{1, 2, 2, 3};
  CHECK(average_ranks(ties) == std::vector<double>{1, 2.5, 2.5, 4});
}

TEST_CASE("row comparison") {
  std::vector<std::string> labels;
  for (int i = 0; i < 6; ++i) labels.push_back("l" + std::to_string(i) + "_Latn");
  Matrix I(labels), S(labels);
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      const double s = 0.1 * static_cast<double>(a + b) + 0.01 * static_cast<double>(b);
      S.set(a, b, a == b ? 1.0 : s);
      I.set(a, b, a == b ? 0.0 : -0.5 + 2.0 * s);
    }
  }
  const auto linear = row_compare(I, S, "l0_Latn");
  CHECK(linear.partners.size() == 5);
  CHECK(linear.pearson == doctest::Approx(1.0).epsilon(1e-12));

  for (std::size_t b = 1; b < 6; ++b) I.set(0, b, -std::exp(S.at(0, b)));
  CHECK(row_compare(I, S, "l0_Latn").spearman == -1.0);

  CHECK_THROWS_AS(row_compare(I, S, "zz_Latn"), Error);
  const std::string csv = to_csv(row_compare(I, S, "l0_Latn"));
  CHECK(csv.find("l3_Latn") != std::string::npos);
}

TEST_CASE("embedding files") {
  const std::string text = "emb v1 a_Latn 3 4\n1 2 3 4\n0 0 0 1\n-1.5 2 0.25 1e-3\n";
  const auto e = parse_embeddings(text);
  CHECK(e.size() == 3);
  CHECK(e.dim == 4);
  CHECK(e.vectors[2][3] == 1e-3);
  CHECK(parse_embeddings(serialize(e)).vectors == e.vectors);
  CHECK(serialize(parse_embeddings(serialize(e))) == serialize(e));

  CHECK_THROWS_AS(parse_embeddings("emb v1 a_Latn 1 4\n1 2 3 4 5\n"), Error);
  CHECK_THROWS_AS(parse_embeddings("emb v1 a_Latn 0 4\n"), Error);
  CHECK_THROWS_AS(parse_embeddings("emb v1 a_Latn 2 4\n1 2 3 4\n"), Error);
  CHECK_THROWS_AS(parse_embeddings("vectors\n"), Error);
}

TEST_CASE("sentence embeddings of a model") {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ffn = 16;
  c.max_len = 16;
  c.seed = 1;
  std::vector<Corpus> corpora{{"a_Latn", {"abc abd", "bcd"}, Provenance::file}};
  const Vocab v = train_bpe(corpora, 40);
  std::vector<std::string> sentences{"abc abd", "bcd", "abc abd"};
  c.vocab_size = static_cast<std::int64_t>(v.size());
  const Model m = init(c);
  const auto emb = sentence_embeddings(m, v, sentences);
  REQUIRE(emb.size() == 3);
  CHECK(emb[0].size() == 8);
  CHECK(emb[0] == emb[2]);
  CHECK(emb[0] != emb[1]);
}
