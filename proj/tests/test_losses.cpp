#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "scagan/features.hpp"
#include "scagan/losses.hpp"
#include "scagan/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace scagan;
using testing::gradcheck;
using testing::random_tensor;
using testing::as_matrix;
using testing::cx_oracle;
using testing::mean_log_oracle;

namespace {

Var rand_var(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0, bool grad = false) {
  std::mt19937_64 rng(seed);
  return Var(random_tensor(std::move(s), rng, lo, hi), grad);
}

Var constant_map(double v, int n = 2) { return Var(Tensor({n, 1, 4, 3}, v)); }

}  // namespace

TEST_CASE("discriminator loss: fixed point, optimum and scalar oracle") {
  CHECK(adv_loss_discriminator(constant_map(0.5), constant_map(0.5), constant_map(0.5), constant_map(0.5)).item() ==
        doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(4.0 * std::log(2.0) == doctest::Approx(2.7726).epsilon(1e-4));
  const double d = 1e-12;
  const double best = adv_loss_discriminator(constant_map(1 - d), constant_map(d), constant_map(1 - d), constant_map(d)).item();
  CHECK(best >= 0.0);
  CHECK(best < 1e-10);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Var a = rand_var({2, 1, 3, 2}, seed, 0.01, 0.99), b = rand_var({2, 1, 3, 2}, seed + 100, 0.01, 0.99),
              c = rand_var({2, 1, 3, 2}, seed + 200, 0.01, 0.99), e = rand_var({2, 1, 3, 2}, seed + 300, 0.01, 0.99);
    const double oracle = -(mean_log_oracle(a.value(), false) + mean_log_oracle(b.value(), true) +
                            mean_log_oracle(c.value(), false) + mean_log_oracle(e.value(), true));
    CHECK(adv_loss_discriminator(a, b, c, e).item() == doctest::Approx(oracle).epsilon(1e-12));
  }
  Tensor bad({2, 1, 4, 3}, 0.5);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(adv_loss_discriminator(Var(bad), constant_map(0.5), constant_map(0.5), constant_map(0.5)), LossError);
}

TEST_CASE("generator adversarial loss: fixed point, fooled case and oracle") {
  CHECK(adv_loss_generator(constant_map(0.5), constant_map(0.5)).item() == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(adv_loss_generator(constant_map(1 - 1e-12), constant_map(1 - 1e-12)).item() < 1e-10);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Var a = rand_var({3, 1, 2, 2}, seed, 1e-3, 1), b = rand_var({3, 1, 2, 2}, seed + 50, 1e-3, 1);
    const double oracle = -(mean_log_oracle(a.value(), false) + mean_log_oracle(b.value(), false));
    const double got = adv_loss_generator(a, b).item();
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(got >= 0.0);
  }
}

TEST_CASE("l1 loss: identity, constant offset and brute-force oracle") {
  const Var x = rand_var({2, 3, 4, 4}, 1);
  CHECK(l1_loss(x, x).item() == 0.0);
  CHECK(l1_loss(ops::add_scalar(x, 0.5), x).item() == doctest::Approx(0.5).epsilon(1e-15));
  const Var y = rand_var({2, 3, 4, 4}, 2);
  double s = 0.0;
  for (std::size_t i = 0; i < x.value().size(); ++i) s += std::fabs(x.value()[i] - y.value()[i]);
  CHECK(std::fabs(l1_loss(x, y).item() - s / static_cast<double>(x.value().size())) < 1e-12);
  CHECK_THROWS_AS(l1_loss(x, rand_var({2, 3, 4, 2}, 3)), ShapeError);
}

TEST_CASE("perceptual loss: identity extractor reduces to l1") {
  const IdentityExtractor id;
  const Var x = rand_var({2, 3, 6, 5}, 1), y = rand_var({2, 3, 6, 5}, 2);
  CHECK(perceptual_loss(x, y, id).item() == l1_loss(x, y).item());
  const Var e = rand_var({2, 1, 6, 5}, 3, 0, 1), f = rand_var({2, 1, 6, 5}, 4, 0, 1);
  CHECK(perceptual_loss(e, f, id).item() == doctest::Approx(l1_loss(e, f).item()).epsilon(1e-14));
  const auto pyramid = ConvPyramidExtractor::random(7);
  CHECK(perceptual_loss(x, x, pyramid).item() == 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    CHECK(perceptual_loss(rand_var({1, 3, 8, 8}, seed), rand_var({1, 3, 8, 8}, seed + 9), pyramid).item() >= 0.0);
  CHECK_THROWS_AS(perceptual_loss(x, y, IdentityExtractor({"relu3_2"})), LossError);
}

TEST_CASE("cx similarity: singleton, row sums and a hand-computed 3x3 oracle") {
  const Var a = rand_var({4, 1}, 1), b = rand_var({4, 1}, 2);
  CHECK(cx_similarity(a, b).item() == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<std::vector<double>> x = {{1.0, 0.2, -0.5}, {0.3, -1.0, 0.8}, {-0.7, 0.4, 0.1}};
  const std::vector<std::vector<double>> y = {{0.9, 0.1, -0.4}, {-0.2, 0.6, 0.5}, {0.4, -0.8, 0.3}};
  const auto oracle = cx_oracle(x, y, 0.5, 1e-5);
  const Var cx = cx_similarity(as_matrix(x), as_matrix(y));
  REQUIRE(cx.shape() == Shape{3, 3});
  for (int i = 0; i < 3; ++i) {
    double row = 0.0;
    for (int j = 0; j < 3; ++j) {
      CHECK(std::fabs(cx.value()[i * 3 + j] - oracle[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) < 1e-6);
      row += cx.value()[i * 3 + j];
    }
    CHECK(std::fabs(row - 1.0) < 1e-6);
  }

  const Var big = cx_similarity(rand_var({5, 30}, 3), rand_var({5, 20}, 4));
  for (int i = 0; i < 30; ++i) {
    double row = 0.0, mx = 0.0;
    for (int j = 0; j < 20; ++j) row += big.value()[i * 20 + j];
    for (int j = 0; j < 20; ++j) mx = std::max(mx, big.value()[i * 20 + j]);
    CHECK(std::fabs(row - 1.0) < 1e-6);
    CHECK(mx > 0.0);
    CHECK(mx <= 1.0);
  }
  CHECK_THROWS_AS(cx_similarity(Var(Tensor({4, 0})), b), LossError);
}

TEST_CASE("contextual loss: self-similarity, finiteness and permutation invariance") {
  const auto pyramid = ConvPyramidExtractor::random(3);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Var x = rand_var({1, 3, 32, 24}, seed), other = rand_var({1, 3, 32, 24}, seed + 40);
    const double self = contextual_loss(x, x, pyramid).item();
    const double cross = contextual_loss(other, x, pyramid).item();
    CHECK(std::isfinite(cross));
    CHECK(self <= cross);
  }
  // Permuting the generated feature positions.
  const Var g = rand_var({1, 6, 4, 5}, 1), t = rand_var({1, 6, 4, 5}, 2);
  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  Tensor shuffled(g.shape());
  for (int c = 0; c < 6; ++c)
    for (int p = 0; p < 20; ++p) shuffled[c * 20 + p] = g.value()[c * 20 + perm[static_cast<std::size_t>(p)]];
  CHECK(contextual_layer_loss(Var(shuffled), t).item() == doctest::Approx(contextual_layer_loss(g, t).item()).epsilon(1e-12));
}

TEST_CASE("contextual loss caps the number of feature positions") {
  CxParams params;
  params.max_positions = 16;
  const Var g = rand_var({1, 3, 8, 8}, 1), t = rand_var({1, 3, 8, 8}, 2);
  const double capped = contextual_layer_loss(g, t, params).item();
  const double manual = contextual_layer_loss(ops::resize_nearest(g, 4, 4), ops::resize_nearest(t, 4, 4)).item();
  CHECK(capped == doctest::Approx(manual).epsilon(1e-14));
}

TEST_CASE("full loss: weighting, defaults and non-finite terms") {
  const LossWeights defaults;
  CHECK(defaults.adv == 5.0);
  CHECK(defaults.l1 == 1.0);
  CHECK(defaults.per == 1.0);
  CHECK(defaults.cx == 0.1);
  const Var one(Tensor({1}, 1.0));
  const WeightedLoss w = full_loss(LossTerms{one, one, one, one}, defaults);
  CHECK(w.total.item() == doctest::Approx(7.1).epsilon(1e-15));
  CHECK(w.breakdown.size() == 4);
  CHECK(full_loss(LossTerms{one, one, one, one}, LossWeights{0, 0, 0, 0}).total.item() == 0.0);
  const Var inf(Tensor({1}, std::numeric_limits<double>::infinity()));
  try {
    full_loss(LossTerms{one, one, inf, one}, defaults);
    FAIL("expected LossError");
  } catch (const LossError& e) {
    CHECK(std::string(e.what()).find("'per'") != std::string::npos);
  }
  CHECK_THROWS_AS(full_loss(LossTerms{one, one, one, one}, LossWeights{-1, 1, 1, 1}), LossError);
}

TEST_CASE("loss gradients match finite differences on 8x8 inputs") {
  auto check = [](const char* name, const std::function<Var()>& f, const std::vector<Var>& wrt) {
    const auto res = gradcheck(f, wrt, 24);
    INFO(name << ": " << res.worst);
    CHECK(res.max_rel_error < 1e-3);
  };
  const Var a = rand_var({2, 1, 8, 8}, 1, 0.05, 0.95, true), b = rand_var({2, 1, 8, 8}, 2, 0.05, 0.95, true),
            c = rand_var({2, 1, 8, 8}, 3, 0.05, 0.95, true), d = rand_var({2, 1, 8, 8}, 4, 0.05, 0.95, true);
  check("adv_d", [&] { return adv_loss_discriminator(a, b, c, d); }, {a, b, c, d});
  check("adv_g", [&] { return adv_loss_generator(b, d); }, {b, d});
  const Var x = rand_var({2, 3, 8, 8}, 5, -1, 1, true), y = rand_var({2, 3, 8, 8}, 6);
  check("l1", [&] { return l1_loss(x, y); }, {x});
  const auto pyramid = ConvPyramidExtractor::random(11);
  check("perceptual", [&] { return perceptual_loss(x, y, pyramid); }, {x});
  check("contextual", [&] { return contextual_loss(x, y, pyramid); }, {x});
  const IdentityExtractor id({"relu3_2", "relu4_2"});
  check("contextual/identity", [&] { return contextual_loss(x, y, id); }, {x});
  const Var fa = rand_var({4, 7}, 7, -1, 1, true), fb = rand_var({4, 9}, 8, -1, 1, true);
  check("cx_similarity", [&] {
    std::mt19937_64 rng(3);
    return ops::sum(ops::mul(cx_similarity(fa, fb), Var(random_tensor({7, 9}, rng))));
  }, {fa, fb});
}
