#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pmpo/oracle.hpp"
#include "pmpo/p_selection.hpp"
#include "pmpo/rng.hpp"

using namespace pmpo;

TEST_CASE("target_ess interpolation") {
  CHECK(target_ess(0.0, 4) == Catch::Approx(0.25));
  CHECK(target_ess(1.0, 4) == 1.0);
  CHECK(target_ess(1.0, 977) == 1.0);
  CHECK(target_ess(0.5, 4) == Catch::Approx(0.625));
}

TEST_CASE("solver hits the p where ESS matches a closed-form target") {
  // ESS({0, ln2}, p=1) = 0.9 exactly, so the root is p = 1.
  std::vector<double> d = {0.0, std::log(2.0)};
  PBounds bounds{0.01, 2.0};
  SolverConfig solver;
  PSelection sel = solve_p_ess_match(d, 0.9, bounds, solver);
  CHECK(std::abs(sel.p - 1.0) <= 1e-2);
  CHECK(std::abs(sel.achieved_ess - 0.9) <= solver.tol);
  CHECK(sel.iterations >= 1);
}

TEST_CASE("solver boundary fallbacks") {
  PBounds bounds;  // [0.01, 0.99]
  SolverConfig solver;
  SECTION("constant deltas, unreachable concentration") {
    std::vector<double> flat(6, 0.3);
    PSelection sel = solve_p_ess_match(flat, 0.5, bounds, solver);
    CHECK(sel.p == bounds.p_max);
    CHECK(sel.achieved_ess == Catch::Approx(1.0));
    CHECK(sel.iterations == 0);
  }
  SECTION("uniformity target returns p_min") {
    std::vector<double> d = {0.0, 0.7, -0.3};
    PSelection sel = solve_p_ess_match(d, 1.0, bounds, solver);
    CHECK(sel.p == bounds.p_min);
  }
  SECTION("over-concentrated target returns p_max") {
    std::vector<double> d = {0.0, 0.7, -0.3};
    double ess_hi = ess_norm_at_p(d, bounds.p_max);
    PSelection sel = solve_p_ess_match(d, 0.5 * ess_hi, bounds, solver);
    CHECK(sel.p == bounds.p_max);
  }
}

TEST_CASE("solver input validation") {
  std::vector<double> d = {0.0, 0.5};
  CHECK_THROWS_AS(solve_p_ess_match(d, 0.0, PBounds{}, SolverConfig{}), invalid_input);
  CHECK_THROWS_AS(solve_p_ess_match(d, 1.5, PBounds{}, SolverConfig{}), invalid_input);
  CHECK_THROWS_AS(solve_p_ess_match(d, 0.5, PBounds{0.5, 0.1}, SolverConfig{}), invalid_input);
}

TEST_CASE("solver matches the grid oracle on random achievable targets", "[property]") {
  Rng rng(41);
  PBounds bounds;
  SolverConfig solver;
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 2 + rng.index(127);
    std::vector<double> d(n);
    for (;;) {
      for (double& x : d) x = rng.uniform(-3.0, 3.0);
      double lo = *std::min_element(d.begin(), d.end());
      double hi = *std::max_element(d.begin(), d.end());
      if (hi - lo > 0.5) break;
    }
    double ess_lo = ess_norm_at_p(d, bounds.p_min);
    double ess_hi = ess_norm_at_p(d, bounds.p_max);
    double target = ess_hi + (ess_lo - ess_hi) * rng.uniform(0.05, 0.95);
    PSelection sel = solve_p_ess_match(d, target, bounds, solver);
    CHECK(std::abs(sel.achieved_ess - target) <= solver.tol);
    CHECK(sel.iterations <= 20);
    double p_oracle = oracle::grid_solve_p(d, target, bounds, 1e-3);
    CHECK(std::abs(sel.p - p_oracle) <= 1e-2);
  }
}

TEST_CASE("scale compensation restores the matched concentration", "[property]") {
  Rng rng(42);
  PBounds bounds;
  SolverConfig solver;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> d(16);
    for (double& x : d) x = rng.uniform(-1.0, 1.0);
    for (double s : {0.1, 10.0}) {
      std::vector<double> ds(d);
      for (double& x : ds) x *= s;
      double lo_t = std::max(ess_norm_at_p(d, bounds.p_max), ess_norm_at_p(ds, bounds.p_max));
      double hi_t = std::min(ess_norm_at_p(d, bounds.p_min), ess_norm_at_p(ds, bounds.p_min));
      if (lo_t + 2e-3 >= hi_t) continue;
      double target = 0.5 * (lo_t + hi_t);
      PSelection a = solve_p_ess_match(d, target, bounds, solver);
      PSelection b = solve_p_ess_match(ds, target, bounds, solver);
      CHECK(std::abs(a.achieved_ess - target) <= solver.tol);
      CHECK(std::abs(b.achieved_ess - target) <= solver.tol);
    }
  }
}

TEST_CASE("f_clip = 0 forces the upper bound on non-constant deltas") {
  PBounds bounds;
  SolverConfig solver;
  Rng rng(43);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-0.09, 0.09);  // below eps_ess, no saturation
    double eta = target_ess(0.0, n);                   // 1/n
    PSelection sel = solve_p_ess_match(d, eta, bounds, solver);
    CHECK(sel.p == bounds.p_max);
  }
}

TEST_CASE("select_p_direct") {
  PBounds bounds;
  CHECK(select_p_direct(0.0, bounds) == Catch::Approx(0.99));
  CHECK(select_p_direct(1.0, bounds) == Catch::Approx(0.01));
  CHECK(select_p_direct(0.3, bounds) == Catch::Approx(0.7));
}

TEST_CASE("select_p_zscore") {
  PBounds bounds;
  HeuristicConfig h;
  SECTION("z = 0 lands mid-range") {
    EmaTracker t{10.0, 4.0, 0.99, 100};
    CHECK(select_p_zscore(10.0, t, h, bounds) == Catch::Approx(0.5).epsilon(1e-12));
  }
  SECTION("large statistic drives p toward p_min") {
    EmaTracker t{10.0, 1.0, 0.99, 100};
    double p = select_p_zscore(60.0, t, h, bounds);
    CHECK(p < 0.011);
    CHECK(p >= bounds.p_min);
  }
  SECTION("frozen sigmoid value at z = 1") {
    // Independent mpmath evaluation: 0.01 + 0.98 * sigma(-1).
    EmaTracker t{10.0, 1.0, 0.99, 100};
    CHECK(select_p_zscore(11.0, t, h, bounds) ==
          Catch::Approx(0.27356259294259522).epsilon(1e-13));
  }
  SECTION("warmup forces z = 0") {
    EmaTracker t{10.0, 1.0, 0.99, 3};  // count below the warmup threshold
    CHECK(select_p_zscore(60.0, t, h, bounds) == Catch::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("select_p_schedule cosine decay") {
  PBounds bounds;
  CHECK(select_p_schedule(0, 100, bounds) == Catch::Approx(bounds.p_max));
  CHECK(select_p_schedule(100, 100, bounds) == Catch::Approx(bounds.p_min));
  CHECK(select_p_schedule(50, 100, bounds) == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(select_p_schedule(250, 100, bounds) == Catch::Approx(bounds.p_min));  // clamped
}

TEST_CASE("update_ema") {
  EmaTracker t;
  t.decay = 0.9;
  SECTION("first observation seeds the mean") {
    update_ema(t, 7.5);
    CHECK(t.mean == 7.5);
    CHECK(t.variance == 0.0);
    CHECK(t.count == 1);
  }
  SECTION("constant stream converges to zero variance") {
    for (int i = 0; i < 200; ++i) update_ema(t, 3.0);
    CHECK(t.mean == Catch::Approx(3.0));
    CHECK(t.variance <= 1e-12);
  }
  SECTION("single decay step") {
    t.mean = 10.0;
    t.count = 5;
    update_ema(t, 20.0);
    CHECK(t.mean == Catch::Approx(11.0));
  }
}

TEST_CASE("all selectors stay inside the bounds", "[property]") {
  Rng rng(44);
  PBounds bounds{0.05, 0.8};
  HeuristicConfig h;
  for (int i = 0; i < 200; ++i) {
    double f = rng.uniform();
    CHECK(select_p_direct(f, bounds) >= bounds.p_min);
    CHECK(select_p_direct(f, bounds) <= bounds.p_max);
    EmaTracker t{rng.uniform(-5, 5), rng.uniform(0, 4), 0.99, 50};
    double p = select_p_zscore(rng.uniform(-20, 20), t, h, bounds);
    CHECK(p >= bounds.p_min);
    CHECK(p <= bounds.p_max);
    long total = 1 + static_cast<long>(rng.index(500));
    double ps = select_p_schedule(static_cast<long>(rng.index(600)), total, bounds);
    CHECK(ps >= bounds.p_min);
    CHECK(ps <= bounds.p_max);
  }
}
