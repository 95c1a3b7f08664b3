#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pmpo/aggregation.hpp"
#include "pmpo/oracle.hpp"
#include "pmpo/rng.hpp"

using namespace pmpo;

namespace {
const double kLn2 = std::log(2.0);
const double kLn4 = std::log(4.0);
}  // namespace

TEST_CASE("power mean closed forms") {
  std::vector<double> d = {0.0, kLn4};  // ratios {1, 4}
  CHECK(power_mean_log(d, 1.0) == Catch::Approx(2.5).epsilon(1e-12));
  CHECK(power_mean_log(d, 0.0) == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(power_mean_log(d, 0.5) == Catch::Approx(2.25).epsilon(1e-12));

  std::vector<double> zeros = {0.0, 0.0, 0.0};
  for (double p : {-1.5, -0.2, 0.0, 0.3, 1.0, 2.0}) {
    CHECK(power_mean_log(zeros, p) == Catch::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("power mean no-norm form") {
  std::vector<double> d = {0.0, kLn4};
  // sum-aggregated arithmetic mean: 1 + 4
  CHECK(power_mean_log(d, 1.0, false) == Catch::Approx(5.0).epsilon(1e-12));
  // geometric without 1/n: exp(sum) = 4
  CHECK(power_mean_log(d, 0.0, false) == Catch::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("power mean input validation") {
  std::vector<double> empty;
  CHECK_THROWS_AS(power_mean_log(empty, 1.0), invalid_input);
  std::vector<double> bad = {0.0, std::nan("")};
  CHECK_THROWS_AS(power_mean_log(bad, 1.0), invalid_input);
  std::vector<double> ok = {0.1};
  CHECK_THROWS_AS(power_mean_log(ok, std::nan("")), invalid_input);
}

TEST_CASE("power mean survives large deltas via max shift") {
  // Direct evaluation of exp(40)^2 would be fine, but exp of the scaled sum
  // without shifting would overflow for tens-scale deltas at larger p.
  std::vector<double> d = {40.0, 38.0, 41.0};
  double m = power_mean_log(d, 2.0);
  CHECK(std::isfinite(m));
  CHECK(m > std::exp(38.0));
}

TEST_CASE("softmax weights") {
  SECTION("ratios {1,2} at p=1") {
    std::vector<double> d = {0.0, kLn2};
    std::vector<double> w = softmax_weights(d, 1.0);
    CHECK(w[0] == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(w[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  SECTION("p=0 gives the exact uniform vector") {
    std::vector<double> d = {3.0, -1.0, 0.5, 2.0};
    std::vector<double> w = softmax_weights(d, 0.0);
    for (double wi : w) CHECK(wi == 0.25);
  }
  SECTION("frozen extended-precision oracle values") {
    // Independent mpmath evaluation at 50 digits.
    std::vector<double> d = {5.0, -3.0, 0.7};
    std::vector<double> w = softmax_weights(d, 0.8);
    CHECK(w[0] == Catch::Approx(0.96737410620806760).epsilon(1e-14));
    CHECK(w[1] == Catch::Approx(0.0016073474820501489).epsilon(1e-14));
    CHECK(w[2] == Catch::Approx(0.031018546309882251).epsilon(1e-14));
  }
  SECTION("negative p rejected") {
    std::vector<double> d = {0.0, 1.0};
    CHECK_THROWS_AS(softmax_weights(d, -0.5), invalid_input);
  }
}

TEST_CASE("ess_norm") {
  std::vector<double> uniform(8, 0.125);
  CHECK(ess_norm(uniform) == Catch::Approx(1.0).epsilon(1e-14));

  std::vector<double> onehot(8, 0.0);
  onehot[3] = 1.0;
  CHECK(ess_norm(onehot) == Catch::Approx(0.125).epsilon(1e-14));

  std::vector<double> w = {1.0 / 3.0, 2.0 / 3.0};
  CHECK(ess_norm(w) == Catch::Approx(0.9).epsilon(1e-14));

  std::vector<double> zeros(4, 0.0);
  CHECK_THROWS_AS(ess_norm(zeros), invalid_input);
}

TEST_CASE("ess_norm_at_p") {
  std::vector<double> flat = {0.7, 0.7, 0.7, 0.7};
  for (double p : {0.0, 0.5, 1.0, 3.0}) {
    CHECK(ess_norm_at_p(flat, p) == Catch::Approx(1.0).epsilon(1e-14));
  }
  std::vector<double> d = {0.0, kLn2};
  CHECK(ess_norm_at_p(d, 1.0) == Catch::Approx(0.9).epsilon(1e-13));
  CHECK(ess_norm_at_p(d, 2.0) == Catch::Approx(25.0 / 34.0).epsilon(1e-13));
}

TEST_CASE("power mean monotone in order", "[property]") {
  Rng rng(2024);
  for (int i = 0; i < 300; ++i) {
    std::size_t n = 2 + rng.index(31);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-4.0, 4.0);
    double p1 = rng.uniform(-2.0, 2.0);
    double p2 = rng.uniform(-2.0, 2.0);
    if (std::abs(p1) < 1e-3 || std::abs(p2) < 1e-3) continue;
    if (p1 > p2) std::swap(p1, p2);
    CHECK(power_mean_log(d, p1) <= power_mean_log(d, p2) + 1e-9);
  }
}

TEST_CASE("geometric limit consistency", "[property]") {
  Rng rng(2025);
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 2 + rng.index(31);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-2.0, 2.0);
    double geo = power_mean_log(d, 0.0);
    CHECK(std::abs(power_mean_log(d, 1e-3) - geo) / geo <= 1e-2);
  }
}

TEST_CASE("ESS monotone non-increasing in p", "[property]") {
  Rng rng(2026);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 2 + rng.index(31);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-3.0, 3.0);
    double prev = 2.0;
    double first = 0.0, last = 0.0;
    for (int g = 0; g < 50; ++g) {
      double p = 0.01 + (4.0 - 0.01) * g / 49.0;
      double e = ess_norm_at_p(d, p);
      if (g == 0) first = e;
      last = e;
      CHECK(e <= prev + 1e-10);
      prev = e;
    }
    CHECK(first > last);  // strict overall decrease on non-constant deltas
  }
}

TEST_CASE("weights shift invariant", "[property]") {
  Rng rng(2027);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 2 + rng.index(15);
    std::vector<double> d(n), shifted(n);
    double c = rng.uniform(-5.0, 5.0);
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = rng.uniform(-2.0, 2.0);
      shifted[j] = d[j] + c;
    }
    double p = rng.uniform(0.0, 2.0);
    std::vector<double> w1 = softmax_weights(d, p);
    std::vector<double> w2 = softmax_weights(shifted, p);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(w1[j] - w2[j]) <= 1e-12);
    CHECK(std::abs(ess_norm_at_p(d, p) - ess_norm_at_p(shifted, p)) <= 1e-12);
  }
}

TEST_CASE("scale coupling: ESS(s*d, p) == ESS(d, s*p)", "[property]") {
  Rng rng(2028);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 2 + rng.index(15);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-1.5, 1.5);
    double s = std::exp(rng.uniform(-2.3, 2.3));  // s in ~[0.1, 10]
    double p = rng.uniform(0.0, 1.0);
    std::vector<double> ds(d);
    for (double& x : ds) x *= s;
    CHECK(std::abs(ess_norm_at_p(ds, p) - ess_norm_at_p(d, s * p)) <= 1e-12);
  }
}

TEST_CASE("log-domain power mean agrees with the naive oracle", "[property]") {
  Rng rng(2029);
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 2 + rng.index(31);
    std::vector<double> d(n), ratios(n);
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = rng.uniform(-3.0, 3.0);
      ratios[j] = std::exp(d[j]);
    }
    double p = rng.uniform(-2.0, 2.0);
    if (std::abs(p) < 0.05) p = 0.5;
    for (bool normalized : {true, false}) {
      double fast = power_mean_log(d, p, normalized);
      double naive = oracle::naive_power_mean(ratios, p, normalized);
      CHECK(std::abs(fast - naive) / naive <= 1e-10);
    }
  }
}
