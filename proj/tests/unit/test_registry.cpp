#include "doctest.h"
#include "ifx/registry.hpp"

using namespace ifx;

namespace {

const std::string kHeader = "code,script,family,resource_level,corpus_source\n";

}  // namespace

TEST_CASE("parse keeps file order") {
  const Registry r = parse_registry(kHeader +
                                    "syn1_Latn,Latin,Italic,high\n"
                                    "syn2_Cyrl,Cyrillic,Balto-Slavic,low\n");
  REQUIRE(r.size() == 2);
  CHECK(r[0].code == "syn1_Latn");
  CHECK(r[1].code == "syn2_Cyrl");
  CHECK(r[1].family == "Balto-Slavic");
  CHECK(r[0].resource_level == ResourceLevel::high);
  CHECK(r.index_of("syn2_Cyrl") == 1u);
  CHECK_FALSE(r.contains("syn3_Grek"));
}

TEST_CASE("invalid registries are rejected") {
  CHECK_THROWS_AS(parse_registry(kHeader + "syn1_Latn,Latin,,high\nsyn1_Latn,Latin,,low\n"), Error);
  CHECK_THROWS_AS(parse_registry(kHeader + "syn3_Grek,Latin,Hellenic,high\n"), Error);
  CHECK_THROWS_AS(parse_registry(kHeader + "syn3Grek,Greek,Hellenic,high\n"), Error);
  CHECK_THROWS_AS(parse_registry(kHeader + "a_b_Grek,Greek,Hellenic,high\n"), Error);
  CHECK_THROWS_AS(parse_registry(kHeader + "syn3_Grek,Greek,Hellenic,medium\n"), Error);
  CHECK_THROWS_AS(parse_registry(kHeader + "syn3_Grek,Greek\n"), Error);
  CHECK_THROWS_AS(parse_registry("code,script\nsyn3_Grek,Greek,,high\n"), Error);
  CHECK_THROWS_AS(load_registry("/nonexistent/registry.csv"), Error);
}

TEST_CASE("csv round-trip") {
  const std::string text = kHeader +
                           "a_Latn,Latin,Italic,high,synth:vocab=60\n"
                           "b_Grek,Greek,,unknown,corpora/b.txt\n";
  const Registry r = parse_registry(text);
  CHECK(to_csv(r) == text);
  CHECK(parse_registry(to_csv(r)).hash() == r.hash());
}

TEST_CASE("group_by") {
  const Registry r = parse_registry(kHeader +
                                    "a_Latn,Latin,Italic,high\n"
                                    "b_Latn,Latin,Germanic,high\n"
                                    "c_Cyrl,Cyrillic,,high\n"
                                    "d_Grek,Greek,Hellenic,high\n");
  const auto scripts = group_by(r, GroupKey::script);
  REQUIRE(scripts.size() == 3);
  CHECK(scripts[0].label == "Latin");
  CHECK(scripts[0].codes == std::vector<std::string>{"a_Latn", "b_Latn"});
  CHECK(scripts[1].codes.size() == 1);
  CHECK(scripts[2].codes.size() == 1);

  const auto levels = group_by(r, GroupKey::resource_level);
  REQUIRE(levels.size() == 1);
  CHECK(levels[0].codes.size() == 4);

  const auto families = group_by(r, GroupKey::family);
  for (const auto& g : families) {
    for (const auto& c : g.codes) CHECK(c != "c_Cyrl");
  }
  CHECK(families.size() == 3);
}

TEST_CASE("without keeps order") {
  const Registry r = parse_registry(kHeader + "a_Latn,Latin,,high\nb_Grek,Greek,,low\nc_Cyrl,Cyrillic,,low\n");
  const Registry w = r.without({"b_Grek"});
  CHECK(w.codes() == std::vector<std::string>{"a_Latn", "c_Cyrl"});
}
