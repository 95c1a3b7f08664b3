#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pmpo/clipping.hpp"
#include "pmpo/rng.hpp"

using namespace pmpo;

TEST_CASE("paper-max clips only the sign-corrected lower side") {
  ClipConfig cfg;  // paper-max, c = 0.4
  std::vector<double> d = {-0.6, 0.6};
  ClippedDeltas out = clip_deltas(d, 1, cfg);
  CHECK(out.values[0] == Catch::Approx(-0.4));
  CHECK(out.values[1] == Catch::Approx(0.6));
  CHECK(out.grad_mask[0] == 0);
  CHECK(out.grad_mask[1] == 1);
}

TEST_CASE("two-sided clamps symmetrically regardless of sign") {
  ClipConfig cfg;
  cfg.mode = ClipMode::two_sided;
  std::vector<double> d = {0.6, -0.1};
  ClippedDeltas out = clip_deltas(d, -1, cfg);
  CHECK(out.values[0] == Catch::Approx(0.4));
  CHECK(out.values[1] == Catch::Approx(-0.1));
  CHECK(out.grad_mask[0] == 0);
  CHECK(out.grad_mask[1] == 1);
}

TEST_CASE("none mode is the identity with a full mask") {
  ClipConfig cfg;
  cfg.mode = ClipMode::none;
  std::vector<double> d = {2.0, -3.5, 0.0};
  ClippedDeltas out = clip_deltas(d, 1, cfg);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(out.values[i] == d[i]);
    CHECK(out.grad_mask[i] == 1);
  }
}

TEST_CASE("sequence mode gates the whole trajectory") {
  ClipConfig cfg;
  cfg.mode = ClipMode::sequence;
  SECTION("inside the trust region") {
    std::vector<double> d = {0.3, 0.2, 0.1};  // mean 0.2 <= 0.4
    ClippedDeltas out = clip_deltas(d, 1, cfg);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(out.values[i] == d[i]);
      CHECK(out.grad_mask[i] == 1);
    }
  }
  SECTION("outside the trust region") {
    std::vector<double> d = {0.7, 0.5, 0.6};  // mean 0.6 > 0.4
    ClippedDeltas out = clip_deltas(d, 1, cfg);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(out.values[i] == d[i]);  // values pass through untouched
      CHECK(out.grad_mask[i] == 0);
    }
  }
  SECTION("negative advantage flips the exit direction") {
    std::vector<double> d = {-0.7, -0.5, -0.6};
    CHECK(clip_deltas(d, 1, cfg).grad_mask[0] == 1);
    CHECK(clip_deltas(d, -1, cfg).grad_mask[0] == 0);
  }
}

TEST_CASE("invalid advantage sign rejected") {
  std::vector<double> d = {0.1};
  CHECK_THROWS_AS(clip_deltas(d, 0, ClipConfig{}), invalid_input);
  CHECK_THROWS_AS(clip_deltas(d, 2, ClipConfig{}), invalid_input);
}

TEST_CASE("clip_fraction counts symmetric saturation of raw deltas") {
  std::vector<double> d = {0.05, 0.2, -0.15};
  CHECK(clip_fraction(d, 0.1) == Catch::Approx(2.0 / 3.0));
  std::vector<double> zeros(5, 0.0);
  CHECK(clip_fraction(zeros, 0.1) == 0.0);
  std::vector<double> all(4, 0.5);
  CHECK(clip_fraction(all, 0.1) == 1.0);
}

TEST_CASE("clipping is idempotent", "[property]") {
  Rng rng(31);
  for (ClipMode mode : {ClipMode::paper_max, ClipMode::two_sided, ClipMode::sequence,
                        ClipMode::none}) {
    for (int i = 0; i < 50; ++i) {
      std::size_t n = 1 + rng.index(16);
      std::vector<double> d(n);
      for (double& x : d) x = rng.uniform(-1.0, 1.0);
      int sign = rng.uniform() < 0.5 ? 1 : -1;
      ClipConfig cfg;
      cfg.mode = mode;
      ClippedDeltas once = clip_deltas(d, sign, cfg);
      ClippedDeltas twice = clip_deltas(once.values, sign, cfg);
      CHECK(twice.values == once.values);
      CHECK(twice.grad_mask == once.grad_mask);
    }
  }
}

TEST_CASE("paper-max ordering and pass-through", "[property]") {
  Rng rng(32);
  ClipConfig cfg;
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 1 + rng.index(16);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-1.0, 1.0);
    ClippedDeltas out = clip_deltas(d, 1, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      CHECK(out.values[t] >= -cfg.c);
      if (d[t] >= -cfg.c) CHECK(out.values[t] == d[t]);
    }
  }
}

TEST_CASE("paper-max sign symmetry", "[property]") {
  Rng rng(33);
  ClipConfig cfg;
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 1 + rng.index(16);
    std::vector<double> d(n), neg(n);
    for (std::size_t t = 0; t < n; ++t) {
      d[t] = rng.uniform(-1.0, 1.0);
      neg[t] = -d[t];
    }
    ClippedDeltas minus = clip_deltas(d, -1, cfg);
    ClippedDeltas plus_on_neg = clip_deltas(neg, 1, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      CHECK(minus.values[t] == Catch::Approx(-plus_on_neg.values[t]).margin(0.0));
      CHECK(minus.grad_mask[t] == plus_on_neg.grad_mask[t]);
    }
  }
}

TEST_CASE("clip_fraction permutation invariant and monotone in eps", "[property]") {
  Rng rng(34);
  for (int i = 0; i < 50; ++i) {
    std::size_t n = 2 + rng.index(16);
    std::vector<double> d(n);
    for (double& x : d) x = rng.uniform(-1.0, 1.0);
    std::vector<double> shuffled(d);
    rng.shuffle(shuffled);
    double eps1 = rng.uniform(0.0, 0.5);
    double eps2 = eps1 + rng.uniform(0.0, 0.5);
    CHECK(clip_fraction(d, eps1) == clip_fraction(shuffled, eps1));
    CHECK(clip_fraction(d, eps2) <= clip_fraction(d, eps1));
  }
}
