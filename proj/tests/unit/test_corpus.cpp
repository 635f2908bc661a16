#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ifx/corpus.hpp"

using namespace ifx;

namespace {

std::set<std::string> words(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& s : c.sentences) {
    std::istringstream in(s);
    for (std::string w; in >> w;) out.insert(w);
  }
  return out;
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  auto p = std::filesystem::temp_directory_path() / ("ifx_test_" + name);
  std::ofstream(p, std::ios::binary) << contents;
  return p;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
  SyntheticLanguageSpec s{"syn_Latn", 60, 0, 1.1, 1, 8, 7};
  const Corpus a = generate_synthetic(s, 100), b = generate_synthetic(s, 100);
  CHECK(a.sentences == b.sentences);
  CHECK(a.size() == 100);
  s.seed = 8;
  CHECK(generate_synthetic(s, 100).sentences != a.sentences);
}

TEST_CASE("disjoint id ranges share no words") {
  const Corpus a = generate_synthetic({"a_Latn", 50, 0, 1.1, 1, 8, 1}, 400);
  const Corpus b = generate_synthetic({"b_Latn", 50, 50, 1.1, 1, 8, 2}, 400);
  const auto wa = words(a), wb = words(b);
  for (const auto& w : wa) CHECK(wb.count(w) == 0);
  CHECK(wa.size() > 30);
}

TEST_CASE("top word frequency follows the Zipf law") {
  // H(1000) = 7.485470860550345, summed exactly with rationals offline
  const double expected = 1.0 / 7.485470860550345;
  const Corpus c = generate_synthetic({"z_Latn", 1000, 0, 1.0, 1, 8, 3}, 10000);
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& s : c.sentences) {
    std::istringstream in(s);
    for (std::string w; in >> w; ++total) ++counts[w];
  }
  std::size_t top = 0;
  for (const auto& [w, n] : counts) top = std::max(top, n);
  const double freq = static_cast<double>(top) / static_cast<double>(total);
  CHECK(freq > 0.8 * expected);
  CHECK(freq < 1.2 * expected);

  const SyntheticGenerator gen({"z_Latn", 1000, 0, 1.0, 1, 8, 3});
  CHECK(gen.zipf_probability(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("topics tilt sentences towards their own ranks") {
  SyntheticLanguageSpec s{"t_Latn", 60, 0, 1.1, 1, 8, 4};
  s.topics = 3;
  s.topic_tilt = 0.6;
  const SyntheticGenerator gen(s);
  Rng rng(1);
  std::size_t on_topic = 0, total = 0;
  for (int i = 0; i < 500; ++i) {
    for (auto r : gen.sentence_ranks(rng, 2)) {
      on_topic += r % 3 == 2 ? 1 : 0;
      ++total;
    }
  }
  // untilted share of topic 2 is ~0.3; tilted share is ~0.6 + 0.4 * 0.3
  CHECK(static_cast<double>(on_topic) / static_cast<double>(total) > 0.6);
  CHECK_THROWS_AS(gen.sentence_ranks(rng, 3), Error);
}

TEST_CASE("synthetic references round-trip") {
  const auto s = parse_synthetic_ref("x_Cyrl", "synth:vocab=70;offset=5;zipf=1.3;order=2;len=9;seed=11");
  CHECK(s.vocab_size == 70);
  CHECK(s.token_id_offset == 5);
  CHECK(s.markov_order == 2);
  CHECK(s.topics == 0);
  CHECK(to_synthetic_ref(s) == "synth:vocab=70;offset=5;zipf=1.3;order=2;len=9;seed=11");

  const auto t = parse_synthetic_ref("x_Cyrl", "synth:vocab=70;topics=3;tilt=0.25");
  CHECK(t.topics == 3);
  CHECK(t.topic_tilt == 0.25);
  CHECK(parse_synthetic_ref("x_Cyrl", to_synthetic_ref(t)).topic_tilt == 0.25);

  CHECK_THROWS_AS(parse_synthetic_ref("x_Cyrl", "synth:vocab=5"), Error);
  CHECK_THROWS_AS(parse_synthetic_ref("x_Cyrl", "synth:zipf=3"), Error);
  CHECK_THROWS_AS(parse_synthetic_ref("x_Cyrl", "synth:topics=1"), Error);
  CHECK_THROWS_AS(parse_synthetic_ref("x_Zzzz", "synth:vocab=50"), Error);
}

TEST_CASE("load_text") {
  auto p = temp_file("blank.txt", "one two\n\nthree\n");
  CHECK(load_text(p, "x_Latn").size() == 2);
  p = temp_file("crlf.txt", "one two\r\nthree\r\n");
  const Corpus c = load_text(p, "x_Latn");
  REQUIRE(c.size() == 2);
  for (const auto& s : c.sentences) CHECK(s.find('\r') == std::string::npos);
  p = temp_file("empty.txt", "");
  CHECK_THROWS_AS(load_text(p, "x_Latn"), Error);
  p = temp_file("bad.txt", "ok\n\xFF\xFE\n");
  CHECK_THROWS_AS(load_text(p, "x_Latn"), Error);
}

TEST_CASE("split") {
  Corpus c{"x_Latn", {}, Provenance::file};
  for (int i = 0; i < 100; ++i) c.sentences.push_back("s" + std::to_string(i));
  const auto a = split(c, 10, 1), b = split(c, 10, 1);
  CHECK(a.train.size() == 90);
  CHECK(a.eval.size() == 10);
  CHECK(a.train.sentences == b.train.sentences);
  CHECK(a.eval.sentences == b.eval.sentences);
  std::set<std::string> tr(a.train.sentences.begin(), a.train.sentences.end());
  for (const auto& s : a.eval.sentences) CHECK(tr.count(s) == 0);
  CHECK_THROWS_AS(split(c, 100, 1), Error);
}

TEST_CASE("parallel evaluation sets") {
  std::vector<SyntheticLanguageSpec> specs{{"a_Latn", 60, 0, 1.1, 1, 8, 5},
                                           {"b_Cyrl", 60, 100, 1.1, 1, 8, 6}};
  auto par = make_parallel_eval(specs, 50);
  REQUIRE(par.at("a_Latn").size() == 50);
  REQUIRE(par.at("b_Cyrl").size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    std::istringstream x(par.at("a_Latn").sentences[i]), y(par.at("b_Cyrl").sentences[i]);
    std::size_t nx = 0, ny = 0;
    for (std::string w; x >> w;) ++nx;
    for (std::string w; y >> w;) ++ny;
    CHECK(nx == ny);
  }

  auto single = make_parallel_eval({specs[0]}, 30);
  CHECK(single.at("a_Latn").sentences == generate_synthetic(specs[0], 30).sentences);

  std::vector<SyntheticLanguageSpec> same{{"a_Latn", 60, 0, 1.1, 1, 8, 5},
                                          {"c_Latn", 60, 0, 1.1, 1, 8, 9}};
  auto twins = make_parallel_eval(same, 40);
  CHECK(twins.at("a_Latn").sentences == twins.at("c_Latn").sentences);
}
