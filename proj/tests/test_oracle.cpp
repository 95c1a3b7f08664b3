#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pmpo/oracle.hpp"

using namespace pmpo;

TEST_CASE("naive power mean closed forms") {
  std::vector<double> r14 = {1.0, 4.0};
  CHECK(oracle::naive_power_mean(r14, 1.0) == Catch::Approx(2.5));
  CHECK(oracle::naive_power_mean(r14, 0.5) == Catch::Approx(2.25));
  std::vector<double> r2 = {2.0, 2.0, 2.0};
  for (double p : {-1.0, 0.0, 0.3, 1.0, 2.0}) {
    CHECK(oracle::naive_power_mean(r2, p) == Catch::Approx(2.0));
  }
}

TEST_CASE("naive power mean reports overflow") {
  std::vector<double> big(4, 1e200);
  CHECK_THROWS_AS(oracle::naive_power_mean(big, 2.0), invalid_input);
  std::vector<double> nonpos = {1.0, 0.0};
  CHECK_THROWS_AS(oracle::naive_power_mean(nonpos, 1.0), invalid_input);
}

TEST_CASE("grid oracle") {
  PBounds wide{0.01, 2.0};
  SECTION("constant deltas tie toward the upper bound") {
    std::vector<double> flat(5, 0.2);
    CHECK(oracle::grid_solve_p(flat, 0.5, wide) == Catch::Approx(wide.p_max));
  }
  SECTION("closed-form root at p = 1") {
    std::vector<double> d = {0.0, std::log(2.0)};
    CHECK(oracle::grid_solve_p(d, 0.9, wide) == Catch::Approx(1.0).margin(2e-3));
  }
  SECTION("uniformity target lands on p_min") {
    std::vector<double> d = {0.0, 0.6, -0.4};
    CHECK(oracle::grid_solve_p(d, 1.0, wide) == Catch::Approx(wide.p_min));
  }
  SECTION("resolution must be fine") {
    std::vector<double> d = {0.0, 0.6};
    CHECK_THROWS_AS(oracle::grid_solve_p(d, 0.9, wide, 0.1), invalid_input);
  }
}

TEST_CASE("frozen-p finite differences at the zero-delta fixed point") {
  // With all deltas zero the softmax is uniform at any p, so each partial of
  // r_hat w.r.t. a delta is exactly 1/n; through the loss the factor is -A/M.
  std::vector<double> d(4, 0.0);
  AggregationConfig cfg;
  SurrogateResult res = effective_ratio(d, 1.0, cfg);
  for (double g : res.token_grad_weights) {
    CHECK(g == Catch::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("finite-difference epsilon range enforced") {
  TaskSpec task;
  task.vocab_size = 4;
  task.episode_length = 2;
  task.num_prompts = 2;
  PolicyParams params = PolicyParams::zeros(task);
  std::vector<Trajectory*> none;
  AggregationConfig cfg;
  SelectorContext ctx;
  CHECK_THROWS_AS(oracle::finite_difference_loss_grad(none, cfg, ctx, params, 1e-2),
                  invalid_input);
}
