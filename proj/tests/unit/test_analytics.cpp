#include <cmath>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "ifx/analytics.hpp"
#include "ifx/sweep.hpp"

using namespace ifx;

namespace {

const std::string kHeader = "code,script,family,resource_level,corpus_source\n";

Matrix from_rows(std::vector<std::string> labels, const std::vector<std::vector<double>>& rows) {
  Matrix m(std::move(labels));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (!std::isnan(rows[i][j])) m.set(i, j, rows[i][j]);
    }
  }
  return m;
}

Job finished(std::vector<std::string> langs, std::map<std::string, double> losses) {
  Job j;
  j.id = langs.size() == 1 ? mono_job_id(langs[0]) : bilingual_job_id(langs[0], langs[1]);
  j.languages = std::move(langs);
  j.status = JobStatus::done;
  j.losses = std::move(losses);
  j.initial_losses = j.losses;
  return j;
}

double value_of(const LanguageValues& v, const std::string& code) {
  for (const auto& [c, x] : v) {
    if (c == code) return x;
  }
  throw Error("missing " + code);
}

const double kNaN = std::nan("");

}  // namespace

TEST_CASE("loss matrix placement") {
  const Registry reg = parse_registry(kHeader + "a_Latn,Latin,,high\nb_Grek,Greek,,low\n");
  SweepManifest m;
  m.languages = reg.codes();
  m.registry_hash = reg.hash();
  m.jobs = {finished({"a_Latn"}, {{"a_Latn", 2.0}}), finished({"b_Grek"}, {{"b_Grek", 3.0}}),
            finished({"a_Latn", "b_Grek"}, {{"a_Latn", 2.4}, {"b_Grek", 3.3}})};
  const auto L = assemble_loss_matrix(m, reg);
  CHECK(L == from_rows(reg.codes(), {{2.0, 2.4}, {3.3, 3.0}}));

  m.jobs[2].status = JobStatus::failed;
  m.jobs[2].losses.clear();
  const auto masked = assemble_loss_matrix(m, reg);
  CHECK(masked.present_count() == 2);
  CHECK_FALSE(masked.has(0, 1));
  CHECK_FALSE(masked.has(1, 0));

  const Registry swapped = parse_registry(kHeader + "b_Grek,Greek,,low\na_Latn,Latin,,high\n");
  m.jobs[2].status = JobStatus::done;
  m.jobs[2].losses = {{"a_Latn", 2.4}, {"b_Grek", 3.3}};
  m.languages = swapped.codes();
  m.registry_hash = swapped.hash();
  CHECK(assemble_loss_matrix(m, swapped) == from_rows(swapped.codes(), {{3.0, 3.3}, {2.4, 2.0}}));
  CHECK_THROWS_AS(assemble_loss_matrix(m, reg), Error);
}

TEST_CASE("interference arithmetic") {
  const auto I = interference(from_rows({"a_Latn", "b_Grek"}, {{2.0, 2.5}, {3.0, 3.0}}));
  CHECK(I.at(0, 1) == -0.25);
  CHECK(I.at(1, 0) == 0.0);
  CHECK(I.at(0, 0) == 0.0);
  const auto gain = interference(from_rows({"a_Latn", "b_Grek"}, {{2.0, 1.9}, {3.0, 3.0}}));
  CHECK(gain.at(0, 1) > 0.0);

  // the row stays masked when its baseline is missing
  const auto partial = interference(from_rows({"a_Latn", "b_Grek"}, {{kNaN, 2.5}, {3.0, 3.0}}));
  CHECK_FALSE(partial.has(0, 1));
  CHECK(partial.has(1, 0));
}

TEST_CASE("interference round-trips to the loss matrix") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("l" + std::to_string(i) + "_Latn");
    Matrix L(labels);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a == b || rng.uniform() < 0.9) L.set(a, b, 1.0 + 5.0 * rng.uniform());
    const auto I = interference(L);
    for (std::size_t a = 0; a < n; ++a) {
      CHECK(I.at(a, a) == 0.0);
      for (std::size_t b = 0; b < n; ++b) {
        if (!L.has(a, b)) continue;
        CHECK(std::abs(L.at(a, a) * (1.0 - I.at(a, b)) - L.at(a, b)) < 1e-12);
      }
    }
  }
}

TEST_CASE("robustness and friendliness") {
  const std::vector<std::string> labels{"a_Latn", "b_Grek", "c_Cyrl"};
  const auto I = from_rows(labels, {{0, -0.2, -0.4}, {-0.1, 0, -0.5}, {-0.3, -0.6, 0}});
  CHECK(value_of(robustness(I), "a_Latn") == doctest::Approx(-0.3));
  CHECK(value_of(friendliness(I), "a_Latn") == doctest::Approx(-0.2));

  Matrix shifted = I;
  for (std::size_t b = 1; b < 3; ++b) shifted.set(0, b, I.at(0, b) + 0.05);
  CHECK(value_of(robustness(shifted), "a_Latn") - value_of(robustness(I), "a_Latn") ==
        doctest::Approx(0.05).epsilon(1e-12));

  const auto S = from_rows(labels, {{0, -0.2, -0.4}, {-0.2, 0, -0.5}, {-0.4, -0.5, 0}});
  const auto r = robustness(S), f = friendliness(S);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r[i].second == doctest::Approx(f[i].second).epsilon(1e-15));
  CHECK(robustness(I) != friendliness(I));

  // excluded languages leave both rows and columns
  const auto rx = robustness(I, {"c_Cyrl"});
  REQUIRE(rx.size() == 2);
  CHECK(value_of(rx, "a_Latn") == doctest::Approx(-0.2));

  const auto lonely = from_rows(labels, {{0, kNaN, kNaN}, {-0.1, 0, -0.5}, {-0.3, -0.6, 0}});
  CHECK_THROWS_AS(robustness(lonely), Error);
}

TEST_CASE("IQR examples") {
  auto r = iqr_outliers({{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}, {"e", 100}});
  CHECK(r.q1 == 2.0);
  CHECK(r.q3 == 4.0);
  CHECK(r.iqr == 2.0);
  CHECK(r.lower == -1.0);
  CHECK(r.upper == 7.0);
  CHECK(r.outliers == std::vector<std::string>{"e"});
  CHECK(r.high == std::vector<std::string>{"e"});

  r = iqr_outliers({{"a", 5}, {"b", 5}, {"c", 5}, {"d", 5}});
  CHECK(r.iqr == 0.0);
  CHECK(r.lower == 5.0);
  CHECK(r.upper == 5.0);
  CHECK(r.outliers.empty());

  r = iqr_outliers({{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}});
  CHECK(r.q1 == 1.75);
  CHECK(r.q3 == 3.25);
  CHECK(r.iqr == 1.5);
  CHECK(r.lower == -0.5);
  CHECK(r.upper == 5.5);
  CHECK(r.outliers.empty());

  CHECK_THROWS_AS(iqr_outliers({{"a", 1}, {"b", 2}, {"c", 3}}), Error);
}

TEST_CASE("IQR agrees with a brute-force type-7 oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng.below(197);
    LanguageValues values;
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) {
      // heavy tail plus ties
      double x = rng.uniform() < 0.1 ? 10.0 * rng.normal() : rng.normal();
      if (rng.uniform() < 0.1) x = std::round(x);
      xs.push_back(x);
      values.emplace_back("c" + std::to_string(i), x);
    }
    const auto r = iqr_outliers(values);
    const auto f = testing::brute_force_fences(xs);
    CHECK(std::abs(r.lower - f.lower) <= 1e-12);
    CHECK(std::abs(r.upper - f.upper) <= 1e-12);
    std::vector<std::string> expect;
    for (auto i : f.outside) expect.push_back("c" + std::to_string(i));
    CHECK(r.outliers == expect);
  }
}

TEST_CASE("group aggregation") {
  const std::vector<std::string> labels{"a_Latn", "b_Latn", "c_Latn", "d_Grek"};
  Rng rng(3);
  Matrix I(labels);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) I.set(a, b, a == b ? 0.0 : -rng.uniform());
  const Grouping g{{"Latin", {"a_Latn", "b_Latn", "c_Latn"}}, {"Greek", {"d_Grek"}}};

  const auto gm = aggregate_by_group(I, g, 3);
  REQUIRE(gm.labels == std::vector<std::string>{"Latin"});
  CHECK(gm.count(0, 0) == 6);
  double sum = 0.0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      if (a != b) sum += I.at(a, b);
  CHECK(gm.mean.at(0, 0) == doctest::Approx(sum / 6.0).epsilon(1e-14));

  const Grouping singletons{{"a", {"a_Latn"}}, {"b", {"b_Latn"}}, {"c", {"c_Latn"}}, {"d", {"d_Grek"}}};
  const auto id = aggregate_by_group(I, singletons, 1);
  for (std::size_t a = 0; a < 4; ++a) {
    CHECK_FALSE(id.mean.has(a, a));
    CHECK(id.count(a, a) == 0);
    for (std::size_t b = 0; b < 4; ++b)
      if (a != b) CHECK(id.mean.at(a, b) == I.at(a, b));
  }
}

TEST_CASE("resource statistics") {
  const Registry reg = parse_registry(kHeader +
                                      "a_Latn,Latin,,high\nb_Grek,Greek,,high\n"
                                      "c_Cyrl,Cyrillic,,low\nd_Armn,Armenian,,low\n");
  // rows chosen so robustness is -0.1, -0.3, -0.5, -0.7
  Matrix I(reg.codes());
  const double rob[] = {-0.1, -0.3, -0.5, -0.7};
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) I.set(a, b, a == b ? 0.0 : rob[a]);
  const auto stats = resource_stats(I, reg);
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].level == ResourceLevel::high);
  CHECK(stats[0].mean_robustness == doctest::Approx(-0.2));
  CHECK(stats[1].mean_robustness == doctest::Approx(-0.6));
  CHECK(stats[0].languages == 2);

  const Registry unknown = parse_registry(kHeader + "a_Latn,Latin,,unknown\nb_Grek,Greek,,unknown\n");
  const auto I2 = from_rows(unknown.codes(), {{0, -0.1}, {-0.2, 0}});
  CHECK(resource_stats(I2, unknown).empty());

  const Registry single = parse_registry(kHeader + "a_Latn,Latin,,low\nb_Grek,Greek,,low\n");
  CHECK(resource_stats(I2, single).size() == 1);
}

TEST_CASE("asymmetry") {
  const std::vector<std::string> labels{"a_Latn", "b_Grek", "c_Cyrl"};
  const auto sym = from_rows(labels, {{0, -0.2, -0.4}, {-0.2, 0, -0.5}, {-0.4, -0.5, 0}});
  const auto s = asymmetry(sym);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) CHECK(s.delta.at(a, b) == 0.0);

  const auto I = from_rows(labels, {{0, -0.3, -0.4}, {-0.1, 0, kNaN}, {-0.45, -0.5, 0}});
  const auto d = asymmetry(I);
  CHECK(d.delta.at(0, 1) == doctest::Approx(-0.2));
  CHECK(d.delta.at(1, 0) == doctest::Approx(0.2));
  CHECK_FALSE(d.delta.has(1, 2));
  CHECK(d.max_delta == doctest::Approx(0.2));
  CHECK(d.a == "b_Grek");
  CHECK(d.b == "a_Latn");

  Rng rng(5);
  Matrix R(labels);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) R.set(a, b, a == b ? 0.0 : rng.normal());
  const auto r = asymmetry(R);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) CHECK(r.delta.at(a, b) == -r.delta.at(b, a));
}

TEST_CASE("convergence profile") {
  const auto two = from_rows({"a_Latn", "b_Grek"}, {{2.0, 2.4}, {3.3, 3.0}});
  CHECK_THROWS_AS(convergence_profile(two), Error);
  const auto cp = convergence_profile(two, false);
  CHECK(cp.outliers.outliers.empty());
  CHECK(value_of(cp.mean_loss, "a_Latn") == doctest::Approx(2.2));
  CHECK(value_of(cp.mean_loss, "b_Grek") == doctest::Approx(3.15));

  std::vector<std::string> labels;
  for (int i = 0; i < 6; ++i) labels.push_back("l" + std::to_string(i) + "_Latn");
  Matrix flat(labels);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b) flat.set(a, b, 3.0);
  CHECK(convergence_profile(flat).outliers.outliers.empty());
  flat.set(5, 5, 9.0);
  for (std::size_t b = 0; b < 5; ++b) flat.set(5, b, 9.5);
  CHECK(convergence_profile(flat).outliers.high == std::vector<std::string>{"l5_Latn"});
}

TEST_CASE("matrix csv round-trip") {
  const auto m = from_rows({"a_Latn", "b_Grek", "c_Cyrl"},
                           {{0, -0.1234567890123456789, kNaN}, {1e-300, 0, 3.5}, {-2.0 / 3.0, kNaN, 0}});
  const std::string text = to_csv(m);
  const auto back = parse_matrix_csv(text);
  CHECK(back == m);
  CHECK(to_csv(back) == text);
  CHECK(to_csv(parse_matrix_csv(to_csv(Matrix{}))) == to_csv(Matrix{}));
  CHECK_THROWS_AS(parse_matrix_csv(",a_Latn\nb_Grek,1\n"), Error);
}
