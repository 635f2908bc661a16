#include <cmath>
#include <vector>

#include "../support/gradcheck.hpp"
#include "doctest.h"
#include "ifx/model.hpp"

using namespace ifx;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ffn = 32;
  c.max_len = 16;
  c.vocab_size = 50;
  c.seed = 3;
  return c;
}

std::vector<double> logits_at(const ForwardResult& fw, std::size_t row) {
  for (std::size_t r = 0; r < fw.logits.rows.size(); ++r) {
    if (fw.logits.rows[r] == row) {
      auto s = fw.logits.row(r);
      return {s.begin(), s.end()};
    }
  }
  return {};
}

}  // namespace

TEST_CASE("parameter count has the closed form") {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 64;
  c.n_heads = 4;
  c.d_ffn = 256;
  c.vocab_size = 1000;
  c.max_len = 64;
  const std::size_t L = 2, d = 64, f = 256, V = 1000, T = 64;
  // embeddings, per layer (2 norms, 4 projections, ffn), final norm, head bias
  const std::size_t per_layer = 2 * 2 * d + 4 * (d * d + d) + (d * f + f) + (f * d + d);
  const std::size_t expect = V * d + T * d + L * per_layer + 2 * d + V;
  CHECK(ParameterLayout(c).total() == expect);
  CHECK(init(c).params().size() == expect);
}

TEST_CASE("init is deterministic and validates shapes") {
  auto c = tiny();
  Model a = init(c), b = init(c);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  c.seed = 4;
  Model other = init(c);
  CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), other.params().begin()));

  ModelConfig bad;
  bad.d_model = 64;
  bad.n_heads = 3;
  CHECK_THROWS_AS(init(bad), Error);
}

TEST_CASE("forward: padding and batch order invariance") {
  const Model m = testing::perturbed_model(tiny(), 1);
  std::vector<TokenId> s1{kClsId, 10, 11, 12, kSepId};
  std::vector<TokenId> s2{kClsId, 20, 21, 22, 23, 24, 25, 26, kSepId};
  std::vector<std::vector<TokenId>> alone{s1}, both{s1, s2}, swapped{s2, s1};
  auto a = forward(m, Batch::pack(alone));
  auto b = forward(m, Batch::pack(both));
  auto c = forward(m, Batch::pack(swapped));
  const std::size_t T = b.cache.seq_len;
  for (std::size_t t = 0; t < s1.size(); ++t) {
    const auto x = logits_at(a, t), y = logits_at(b, t), z = logits_at(c, T + t);
    REQUIRE(x.size() == 50);
    for (std::size_t v = 0; v < x.size(); ++v) {
      CHECK(std::abs(x[v] - y[v]) < 1e-12);
      CHECK(std::abs(x[v] - z[v]) < 1e-12);
    }
  }
  for (std::size_t t = 0; t < s2.size(); ++t) {
    const auto y = logits_at(b, T + t), z = logits_at(c, t);
    for (std::size_t v = 0; v < y.size(); ++v) CHECK(std::abs(y[v] - z[v]) < 1e-12);
  }

  std::vector<std::vector<TokenId>> single{{kClsId}};
  auto one = forward(m, Batch::pack(single));
  REQUIRE(one.logits.values.size() == 50);
  for (double v : one.logits.values) CHECK(std::isfinite(v));
}

TEST_CASE("mlm_loss") {
  Logits lg;
  lg.vocab = 7;
  lg.rows = {0, 1};
  lg.values.assign(14, 0.25);
  std::vector<TokenId> labels{3, -1};
  CHECK(mlm_loss(lg, labels).loss == doctest::Approx(std::log(7.0)).epsilon(1e-15));

  // one position with a margin, by hand
  lg.values = {2.0, 0.5, -1.0, 0.0, 0.0, 0.0, 0.0, 0, 0, 0, 0, 0, 0, 0};
  labels = {1, -1};
  const double z = std::exp(2.0) + std::exp(0.5) + std::exp(-1.0) + 4.0;
  CHECK(std::abs(mlm_loss(lg, labels).loss - (std::log(z) - 0.5)) < 1e-12);

  labels = {-1, -1};
  CHECK_THROWS_AS(mlm_loss(lg, labels), Error);
}

TEST_CASE("backward matches central differences") {
  const auto c = tiny();
  const Model m = testing::perturbed_model(c, 11);
  const Batch b = testing::labeled_batch(c, 3, 12);
  const auto r = testing::check_gradients(m, b, 12, 1e-5, 13);
  CHECK(r.sampled >= 200);
  CHECK(r.per_kind.size() == 6);
  CHECK(r.max_rel_error < 1e-4);
  MESSAGE("max relative error " << r.max_rel_error << " over " << r.sampled << " parameters");
}

TEST_CASE("backward is linear in the logit gradient") {
  const auto c = tiny();
  const Model m = testing::perturbed_model(c, 21);
  const Batch b = testing::labeled_batch(c, 2, 22);
  auto fw = forward(m, b, HeadRows::labeled);
  auto loss = mlm_loss(fw.logits, b.labels);

  Logits zero = loss.grad;
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  for (double g : backward(m, b, fw.cache, zero)) CHECK(g == 0.0);

  Logits twice = loss.grad;
  for (auto& v : twice.values) v *= 2.0;
  const auto g1 = backward(m, b, fw.cache, loss.grad);
  const auto g2 = backward(m, b, fw.cache, twice);
  double worst = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) worst = std::max(worst, std::abs(g2[i] - 2.0 * g1[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("mean_pool") {
  const auto c = tiny();
  const Model m = testing::perturbed_model(c, 5);
  std::vector<TokenId> s{kClsId, 7, 8, 9, kSepId};
  std::vector<std::vector<TokenId>> a{s}, b{s, std::vector<TokenId>(12, 6)};
  const auto pa = mean_pool(m, Batch::pack(a));
  const auto pb = mean_pool(m, Batch::pack(b));
  const auto d = static_cast<std::size_t>(c.d_model);
  for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(pa[j] - pb[j]) < 1e-12);
  double diff = 0.0;
  for (std::size_t j = 0; j < d; ++j) diff += std::abs(pb[j] - pb[d + j]);
  CHECK(diff > 1e-6);

  std::vector<std::vector<TokenId>> one{{kClsId}};
  const Batch b1 = Batch::pack(one);
  const auto pooled = mean_pool(m, b1);
  const auto fw = forward(m, b1, HeadRows::none);
  for (std::size_t j = 0; j < d; ++j) CHECK(pooled[j] == fw.cache.hidden[j]);
}

TEST_CASE("checkpoint round-trip and corruption") {
  const Model m = testing::perturbed_model(tiny(), 8);
  const std::string bytes = serialize(m);
  const Model back = parse_checkpoint(bytes);
  CHECK(back.config() == m.config());
  CHECK(serialize(back) == bytes);

  std::string broken = bytes;
  broken[broken.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(parse_checkpoint(broken), Error);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
}
