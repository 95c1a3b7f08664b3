#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmpo/aggregation.hpp"
#include "pmpo/clipping.hpp"
#include "pmpo/errors.hpp"
#include "pmpo/oracle.hpp"
#include "pmpo/p_selection.hpp"
#include "pmpo/rng.hpp"
#include "pmpo/rollout.hpp"
#include "pmpo/surrogate.hpp"
#include "pmpo/train.hpp"

// Randomized property suites behind the `check` command and the acceptance
// runner. Each check reports the first counterexample it finds.
namespace pmpo::checks {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;

  static CheckResult fail(std::string name, std::string detail) {
    return {std::move(name), false, std::move(detail)};
  }
  static CheckResult pass(std::string name, std::string detail = "") {
    return {std::move(name), true, std::move(detail)};
  }
};

namespace detail {

inline std::vector<double> random_deltas(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> d(n);
  for (double& x : d) x = rng.uniform(lo, hi);
  return d;
}

/// Deltas kept away from the clip boundaries so finite differences never
/// straddle a kink.
inline std::vector<double> margin_deltas(Rng& rng, std::size_t n, double span, double c,
                                         double eps_ess, double margin) {
  std::vector<double> d(n);
  for (double& x : d) {
    for (;;) {
      x = rng.uniform(-span, span);
      if (std::abs(std::abs(x) - c) > margin && std::abs(std::abs(x) - eps_ess) > margin) break;
    }
  }
  return d;
}

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace detail

/// Appendix-A property: M_p is non-decreasing in p, with equality only on
/// constant vectors.
inline CheckResult power_mean_monotonicity(int cases = 1000, std::uint64_t seed = 101) {
  Rng rng(seed);
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(63);
    // ratios in (1e-3, 1e3]  <=>  deltas in (-ln 1000, ln 1000]
    std::vector<double> d = detail::random_deltas(rng, n, -6.9077, 6.9077);
    double p1 = 0.0;
    double p2 = 0.0;
    while (std::abs(p1) < 1e-3 || std::abs(p2) < 1e-3 || std::abs(p1 - p2) < 1e-3) {
      p1 = rng.uniform(-2.0, 2.0);
      p2 = rng.uniform(-2.0, 2.0);
    }
    if (p1 > p2) std::swap(p1, p2);
    double m1 = power_mean_log(d, p1);
    double m2 = power_mean_log(d, p2);
    if (!(m1 <= m2 + 1e-9))
      return CheckResult::fail("power-mean-monotonicity",
                               "case " + std::to_string(i) + ": M(" + detail::fmt(p1) + ")=" +
                                   detail::fmt(m1) + " > M(" + detail::fmt(p2) + ")=" +
                                   detail::fmt(m2));
    // Strictness on non-constant inputs (generated continuous, so never constant).
    if (!(m2 > m1))
      return CheckResult::fail("power-mean-monotonicity",
                               "case " + std::to_string(i) + ": no strict increase on non-constant input");
  }
  // Equality holds exactly on constant vectors.
  for (int i = 0; i < 50; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d(n, rng.uniform(-3.0, 3.0));
    double m1 = power_mean_log(d, 0.3);
    double m2 = power_mean_log(d, 1.7);
    if (std::abs(m1 - m2) > 1e-9 * std::abs(m1))
      return CheckResult::fail("power-mean-monotonicity", "constant vector broke the equality case");
  }
  return CheckResult::pass("power-mean-monotonicity", std::to_string(cases) + " cases");
}

/// M_p at p = 1e-3 stays within 1% of the geometric branch for |delta| <= 2.
inline CheckResult geometric_limit(int cases = 1000, std::uint64_t seed = 102) {
  Rng rng(seed);
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d = detail::random_deltas(rng, n, -2.0, 2.0);
    double near = power_mean_log(d, 1e-3);
    double geo = power_mean_log(d, 0.0);
    if (std::abs(near - geo) / geo > 1e-2)
      return CheckResult::fail("geometric-limit", "case " + std::to_string(i) + ": gap " +
                                                      detail::fmt(std::abs(near - geo) / geo));
  }
  return CheckResult::pass("geometric-limit", std::to_string(cases) + " cases");
}

/// Appendix-B.2 property: ESS_norm(p) is non-increasing on an ascending grid,
/// strictly decreasing overall for non-constant deltas.
inline CheckResult ess_monotonicity(int cases = 1000, int grid_points = 400,
                                    std::uint64_t seed = 103) {
  Rng rng(seed);
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d = detail::random_deltas(rng, n, -3.0, 3.0);
    double prev = -1.0;
    double first = 0.0;
    double last = 0.0;
    for (int g = 0; g < grid_points; ++g) {
      double p = 0.01 + (4.0 - 0.01) * static_cast<double>(g) / (grid_points - 1);
      double e = ess_norm_at_p(d, p);
      if (g == 0) first = e;
      last = e;
      if (g > 0 && e > prev + 1e-10)
        return CheckResult::fail("ess-monotonicity",
                                 "case " + std::to_string(i) + ": ESS rose at p=" + detail::fmt(p));
      prev = e;
    }
    if (!(first - last > 0.0))
      return CheckResult::fail("ess-monotonicity",
                               "case " + std::to_string(i) + ": no strict overall decrease");
  }
  return CheckResult::pass("ess-monotonicity", std::to_string(cases) + " cases");
}

/// Solver vs grid oracle on achievable targets, plus the iteration budget.
inline CheckResult solver_match(int cases = 1000, std::uint64_t seed = 104) {
  Rng rng(seed);
  PBounds bounds;
  SolverConfig solver;
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(255);
    std::vector<double> d;
    for (;;) {
      d = detail::random_deltas(rng, n, -3.0, 3.0);
      double lo = *std::min_element(d.begin(), d.end());
      double hi = *std::max_element(d.begin(), d.end());
      if (hi - lo > 0.5) break;  // keep the ESS curve usefully steep
    }
    double ess_lo = ess_norm_at_p(d, bounds.p_min);
    double ess_hi = ess_norm_at_p(d, bounds.p_max);
    double target = ess_hi + (ess_lo - ess_hi) * rng.uniform(0.05, 0.95);

    PSelection sel = solve_p_ess_match(d, target, bounds, solver);
    if (std::abs(sel.achieved_ess - target) > solver.tol)
      return CheckResult::fail("solver-match", "case " + std::to_string(i) + ": |ESS-target| = " +
                                                   detail::fmt(std::abs(sel.achieved_ess - target)));
    if (sel.iterations > 20)
      return CheckResult::fail("solver-match", "case " + std::to_string(i) + ": " +
                                                   std::to_string(sel.iterations) + " iterations");
    double p_oracle = oracle::grid_solve_p(d, target, bounds, 1e-3);
    if (std::abs(sel.p - p_oracle) > 1e-2)
      return CheckResult::fail("solver-match",
                               "case " + std::to_string(i) + ": p=" + detail::fmt(sel.p) +
                                   " oracle=" + detail::fmt(p_oracle));
  }
  return CheckResult::pass("solver-match", std::to_string(cases) + " cases");
}

/// Unreachable targets must clamp to the bound dictated by monotonicity.
inline CheckResult solver_boundary_fallbacks(int cases = 200, std::uint64_t seed = 105) {
  Rng rng(seed);
  PBounds bounds;
  SolverConfig solver;
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(127);
    std::vector<double> d = detail::random_deltas(rng, n, -3.0, 3.0);
    double ess_lo = ess_norm_at_p(d, bounds.p_min);
    double ess_hi = ess_norm_at_p(d, bounds.p_max);

    // Too-uniform target: above ESS(p_min).
    double high_target = ess_lo + (1.0 - ess_lo) * 0.5 + 1e-12;
    if (high_target <= 1.0) {
      PSelection sel = solve_p_ess_match(d, std::min(1.0, high_target), bounds, solver);
      if (sel.p != bounds.p_min)
        return CheckResult::fail("solver-boundary", "case " + std::to_string(i) + ": high target p=" +
                                                        detail::fmt(sel.p));
    }
    // Too-concentrated target: below ESS(p_max).
    double low_target = ess_hi * rng.uniform(0.1, 0.9);
    PSelection sel2 = solve_p_ess_match(d, low_target, bounds, solver);
    if (sel2.p != bounds.p_max)
      return CheckResult::fail("solver-boundary", "case " + std::to_string(i) + ": low target p=" +
                                                      detail::fmt(sel2.p));
    // Constant deltas: ESS == 1 everywhere, any target < 1 resolves to p_max.
    std::vector<double> flat(n, rng.uniform(-1.0, 1.0));
    PSelection sel3 = solve_p_ess_match(flat, rng.uniform(0.1, 0.99), bounds, solver);
    if (sel3.p != bounds.p_max)
      return CheckResult::fail("solver-boundary", "case " + std::to_string(i) + ": constant deltas p=" +
                                                      detail::fmt(sel3.p));
    // Exact uniformity target resolves to p_min.
    PSelection sel4 = solve_p_ess_match(d, 1.0, bounds, solver);
    if (sel4.p != bounds.p_min)
      return CheckResult::fail("solver-boundary",
                               "case " + std::to_string(i) + ": target 1.0 p=" + detail::fmt(sel4.p));
  }
  return CheckResult::pass("solver-boundary", std::to_string(cases) + " cases");
}

/// Appendix-B.1: ESS(s*delta, p) == ESS(delta, s*p), and re-solving under a
/// rescaled delta restores the same target concentration.
inline CheckResult scale_compensation(int cases = 200, std::uint64_t seed = 106) {
  Rng rng(seed);
  PBounds bounds;
  SolverConfig solver;
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d;
    for (;;) {
      d = detail::random_deltas(rng, n, -1.5, 1.5);
      double lo = *std::min_element(d.begin(), d.end());
      double hi = *std::max_element(d.begin(), d.end());
      if (hi - lo > 0.5) break;
    }
    for (double s : {0.1, 10.0}) {
      std::vector<double> ds(d);
      for (double& x : ds) x *= s;
      // Identity: scaling deltas by s equals scaling p by s.
      double p_probe = rng.uniform(bounds.p_min, bounds.p_max);
      double a = ess_norm_at_p(ds, p_probe);
      double b = ess_norm_at_p(d, s * p_probe);
      if (std::abs(a - b) > 1e-12)
        return CheckResult::fail("scale-compensation",
                                 "case " + std::to_string(i) + ": identity gap " +
                                     detail::fmt(std::abs(a - b)));
      // Matched concentration survives rescaling when achievable both ways.
      double lo1 = ess_norm_at_p(d, bounds.p_max), hi1 = ess_norm_at_p(d, bounds.p_min);
      double lo2 = ess_norm_at_p(ds, bounds.p_max), hi2 = ess_norm_at_p(ds, bounds.p_min);
      double lo_t = std::max(lo1, lo2), hi_t = std::min(hi1, hi2);
      if (lo_t + 1e-3 >= hi_t - 1e-3) continue;  // no shared achievable band
      double target = lo_t + (hi_t - lo_t) * rng.uniform(0.1, 0.9);
      PSelection sel = solve_p_ess_match(ds, target, bounds, solver);
      if (std::abs(sel.achieved_ess - target) > solver.tol)
        return CheckResult::fail("scale-compensation",
                                 "case " + std::to_string(i) + ": rescaled solve missed target by " +
                                     detail::fmt(std::abs(sel.achieved_ess - target)));
    }
  }
  return CheckResult::pass("scale-compensation", std::to_string(cases) + " cases");
}

/// p=1/no-clip equals the arithmetic mean of ratios; gmpo equals
/// exp(mean clipped delta).
inline CheckResult special_case_equivalence(int cases = 1000, std::uint64_t seed = 107) {
  Rng rng(seed);
  AggregationConfig arith;
  arith.geometry.kind = GeometryKind::pmpo_fixed;
  arith.geometry.p_fixed = 1.0;
  arith.clip.mode = ClipMode::none;
  AggregationConfig geo;
  geo.geometry.kind = GeometryKind::gmpo;
  for (int i = 0; i < cases; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d = detail::random_deltas(rng, n, -2.0, 2.0);
    double advantage = rng.uniform() < 0.5 ? 0.7 : -0.7;

    SurrogateResult a = effective_ratio(d, advantage, arith);
    double mean_ratio = 0.0;
    for (double x : d) mean_ratio += std::exp(x);
    mean_ratio /= static_cast<double>(n);
    if (std::abs(a.effective_ratio - mean_ratio) > 1e-12 * mean_ratio)
      return CheckResult::fail("special-case-equivalence",
                               "case " + std::to_string(i) + ": arithmetic gap " +
                                   detail::fmt(std::abs(a.effective_ratio - mean_ratio)));

    SurrogateResult g = effective_ratio(d, advantage, geo);
    ClippedDeltas clipped = clip_deltas(d, advantage > 0 ? 1 : -1, geo.clip);
    double mean_delta = 0.0;
    for (double x : clipped.values) mean_delta += x;
    double geo_ref = std::exp(mean_delta / static_cast<double>(n));
    if (std::abs(g.effective_ratio - geo_ref) > 1e-12 * geo_ref)
      return CheckResult::fail("special-case-equivalence",
                               "case " + std::to_string(i) + ": geometric gap " +
                                   detail::fmt(std::abs(g.effective_ratio - geo_ref)));

    // p -> 0 approaches the geometric branch.
    AggregationConfig near0 = geo;
    near0.geometry.kind = GeometryKind::pmpo_fixed;
    near0.geometry.p_fixed = 0.01;
    SurrogateResult s = effective_ratio(d, advantage, near0);
    if (std::abs(s.effective_ratio - g.effective_ratio) > 5e-3 * g.effective_ratio)
      return CheckResult::fail("special-case-equivalence",
                               "case " + std::to_string(i) + ": p=0.01 not near geometric");
  }
  return CheckResult::pass("special-case-equivalence", std::to_string(cases) + " cases");
}

/// Closed-form token gradients vs central finite differences of the frozen-p
/// loss in delta space, across every geometry and clip mode. Masked tokens
/// must have exactly zero partials.
inline CheckResult surrogate_gradient_fd(int cases = 200, std::uint64_t seed = 108,
                                         bool inject_sign_fault = false) {
  Rng rng(seed);
  const GeometryKind geometries[] = {
      GeometryKind::grpo,        GeometryKind::gmpo,         GeometryKind::pmpo_fixed,
      GeometryKind::pmpo_adaptive, GeometryKind::pmpo_direct, GeometryKind::pmpo_length,
      GeometryKind::pmpo_entropy, GeometryKind::pmpo_schedule};
  const ClipMode clip_modes[] = {ClipMode::paper_max, ClipMode::two_sided, ClipMode::sequence,
                                 ClipMode::none};
  const double fd_eps = 1e-5;

  SelectorContext ctx;
  ctx.length_ema = {32.0, 4.0, 0.99, 100};
  ctx.entropy_ema = {1.5, 0.25, 0.99, 100};
  ctx.length_stat = 30.0;
  ctx.entropy_stat = 1.2;
  ctx.step = 40;
  ctx.total_steps = 100;

  for (int i = 0; i < cases; ++i) {
    // Round-robin over the 32 geometry x clip combinations.
    GeometryKind geom = geometries[static_cast<std::size_t>(i) % 8];
    ClipMode mode = clip_modes[(static_cast<std::size_t>(i) / 8) % 4];
    AggregationConfig cfg;
    cfg.geometry.kind = geom;
    cfg.geometry.p_fixed = 0.5;
    cfg.clip.mode = mode;

    std::size_t n = 2 + rng.index(63);
    std::vector<double> d;
    double advantage = (rng.uniform() < 0.5 ? 1.0 : -1.0) * rng.uniform(0.25, 1.0);
    int sign = advantage > 0 ? 1 : -1;
    for (;;) {
      d = detail::margin_deltas(rng, n, 1.2, cfg.clip.c, cfg.clip.eps_ess, 1e-3);
      double mean = 0.0;
      for (double x : d) mean += x;
      mean /= static_cast<double>(n);
      if (std::abs(sign * mean - cfg.clip.c) > 1e-3) break;  // keep the sequence gate stable
    }

    SurrogateResult res = effective_ratio(d, advantage, cfg, ctx);
    ClippedDeltas clipped = clip_deltas(d, sign, cfg.clip);
    const double p_frozen = res.p_used;
    const bool gate_closed =
        mode == ClipMode::sequence &&
        std::all_of(clipped.grad_mask.begin(), clipped.grad_mask.end(),
                    [](std::uint8_t m) { return m == 0; });

    auto loss_at = [&](const std::vector<double>& deltas) {
      ClippedDeltas cl = clip_deltas(deltas, sign, cfg.clip);
      return -advantage * power_mean_log(cl.values, p_frozen, cfg.length_normalized);
    };

    for (std::size_t j = 0; j < n; ++j) {
      double analytic = -advantage * res.token_grad_weights[j];
      if (inject_sign_fault) analytic = analytic != 0.0 ? -analytic : 1e-2;
      if (!clipped.grad_mask[j]) {
        // Clipped-branch partials are exactly zero. Outside the sequence
        // gate (whose forward value passes through unmodified), the
        // clamped-constant branch makes the finite difference exactly zero
        // as well.
        if (analytic != 0.0)
          return CheckResult::fail(
              "surrogate-gradient-fd",
              "case " + std::to_string(i) + " (" + std::string(to_string(geom)) + ", " +
                  to_string(mode) + "): masked token " + std::to_string(j) +
                  " has nonzero analytic partial " + detail::fmt(analytic));
        if (!gate_closed) {
          std::vector<double> dp(d), dm(d);
          dp[j] += fd_eps;
          dm[j] -= fd_eps;
          double fd = (loss_at(dp) - loss_at(dm)) / (2.0 * fd_eps);
          if (fd != 0.0)
            return CheckResult::fail(
                "surrogate-gradient-fd",
                "case " + std::to_string(i) + " (" + std::string(to_string(geom)) + ", " +
                    to_string(mode) + "): masked token " + std::to_string(j) +
                    " has nonzero finite difference " + detail::fmt(fd));
        }
        continue;
      }
      std::vector<double> dp(d), dm(d);
      dp[j] += fd_eps;
      dm[j] -= fd_eps;
      double fd = (loss_at(dp) - loss_at(dm)) / (2.0 * fd_eps);
      double err = std::abs(analytic - fd);
      double scale = std::max(std::abs(fd), 1e-4);  // 1e-8 absolute floor at rel tol 1e-4
      if (err > 1e-4 * scale)
        return CheckResult::fail(
            "surrogate-gradient-fd",
            "case " + std::to_string(i) + " (" + std::string(to_string(geom)) + ", " +
                to_string(mode) + "): token " + std::to_string(j) + " analytic=" +
                detail::fmt(analytic) + " fd=" + detail::fmt(fd));
    }
  }
  return CheckResult::pass("surrogate-gradient-fd", std::to_string(cases) + " trajectories");
}

/// End-to-end analytic vs finite-difference gradients through the policy
/// parameters on a frozen small instance, for every geometry and clip mode.
inline CheckResult end_to_end_gradient_fd(std::uint64_t seed = 109) {
  TaskSpec task;
  task.kind = TaskKind::last_token_key;
  task.vocab_size = 8;
  task.episode_length = 4;
  task.num_prompts = 2;
  task.seed = 3;

  // Old policy: mildly random so rollouts are non-uniform.
  PolicyParams old_params = PolicyParams::zeros(task);
  Rng rng(seed);
  for (double& x : old_params.prev_token_table) x = 0.3 * rng.normal();
  for (double& x : old_params.position_table) x = 0.3 * rng.normal();
  for (double& x : old_params.prompt_table) x = 0.3 * rng.normal();

  // Roll out until both groups carry signal.
  std::vector<Group> groups;
  std::vector<int> prompts = {0, 1};
  for (std::uint64_t attempt = 0;; ++attempt) {
    groups = rollout(old_params, task, prompts, 4, seed + 17 * attempt);
    bool ok = true;
    for (const Group& g : groups)
      if (is_degenerate(g.advantages)) ok = false;
    if (ok) break;
    if (attempt > 200) return CheckResult::fail("end-to-end-gradient-fd", "no non-degenerate rollout found");
  }
  std::vector<Trajectory*> trajs;
  for (Group& g : groups)
    for (Trajectory& t : g.trajectories) trajs.push_back(&t);

  // Evaluation point: nudged away from the old policy.
  PolicyParams params = old_params;
  for (double& x : params.prev_token_table) x += 0.15 * rng.normal();
  for (double& x : params.position_table) x += 0.15 * rng.normal();
  for (double& x : params.prompt_table) x += 0.15 * rng.normal();

  SelectorContext ctx;
  ctx.length_ema = {4.0, 1.0, 0.99, 50};
  ctx.entropy_ema = {1.8, 0.1, 0.99, 50};
  ctx.step = 10;
  ctx.total_steps = 40;

  const GeometryKind geometries[] = {
      GeometryKind::grpo,        GeometryKind::gmpo,         GeometryKind::pmpo_fixed,
      GeometryKind::pmpo_adaptive, GeometryKind::pmpo_direct, GeometryKind::pmpo_length,
      GeometryKind::pmpo_entropy, GeometryKind::pmpo_schedule};
  const ClipMode clip_modes[] = {ClipMode::paper_max, ClipMode::two_sided, ClipMode::sequence,
                                 ClipMode::none};
  for (GeometryKind geom : geometries) {
    for (ClipMode mode : clip_modes) {
      AggregationConfig cfg;
      cfg.geometry.kind = geom;
      cfg.geometry.p_fixed = 0.5;
      cfg.clip.mode = mode;

      MinibatchEval eval = evaluate_minibatch(trajs, params, cfg, ctx);
      TableGrads fd = oracle::finite_difference_loss_grad(trajs, cfg, ctx, params, 1e-5);

      auto compare = [&](const std::vector<double>& a, const std::vector<double>& b,
                         const char* which) -> std::string {
        for (std::size_t i = 0; i < a.size(); ++i) {
          double err = std::abs(a[i] - b[i]);
          double scale = std::max(std::abs(b[i]), 1e-4);
          if (err > 1e-4 * scale)
            return std::string(which) + "[" + std::to_string(i) + "] analytic=" +
                   detail::fmt(a[i]) + " fd=" + detail::fmt(b[i]);
        }
        return "";
      };
      std::string bad = compare(eval.grad.prev_token, fd.prev_token, "prev_token");
      if (bad.empty()) bad = compare(eval.grad.position, fd.position, "position");
      if (bad.empty()) bad = compare(eval.grad.prompt, fd.prompt, "prompt");
      if (!bad.empty())
        return CheckResult::fail("end-to-end-gradient-fd",
                                 std::string(to_string(geom)) + ", " + to_string(mode) + ": " + bad);
    }
  }
  return CheckResult::pass("end-to-end-gradient-fd", "32 geometry x clip combinations");
}

/// eps_ess = 0 degenerates the selector: every saturated trajectory pins the
/// target at 1 and the solver at p_min.
inline CheckResult eps_zero_degeneration(std::uint64_t seed = 110) {
  Rng rng(seed);
  PBounds bounds;
  SolverConfig solver;
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 2 + rng.index(63);
    std::vector<double> d(n);
    for (double& x : d) {
      x = 0.0;
      while (x == 0.0) x = rng.uniform(-0.5, 0.5);
    }
    double f = clip_fraction(d, 0.0);
    if (f != 1.0)
      return CheckResult::fail("eps-zero-degeneration", "f_clip != 1 on all-nonzero deltas");
    double eta = target_ess(f, n);
    if (eta != 1.0) return CheckResult::fail("eps-zero-degeneration", "target != 1 at f_clip=1");
    ClippedDeltas clipped = clip_deltas(d, 1, {ClipMode::paper_max, 0.4, 0.0});
    PSelection sel = solve_p_ess_match(clipped.values, eta, bounds, solver);
    if (sel.p != bounds.p_min)
      return CheckResult::fail("eps-zero-degeneration", "solver returned " + detail::fmt(sel.p));
  }
  return CheckResult::pass("eps-zero-degeneration", "200 cases");
}

/// The adaptive layer is O(M*n): doubling n eightfold must not cost more than
/// 10x wall time.
inline CheckResult linear_cost(int trials = 100, std::uint64_t seed = 111) {
  Rng rng(seed);
  AggregationConfig cfg;  // adaptive defaults
  auto run_once = [&](std::size_t n) {
    std::vector<double> d(n);
    for (double& x : d) x = 0.3 * rng.normal();
    auto begin = std::chrono::steady_clock::now();
    SurrogateResult res = effective_ratio(d, 1.0, cfg);
    auto end = std::chrono::steady_clock::now();
    volatile double guard = res.effective_ratio;
    (void)guard;
    return std::chrono::duration<double>(end - begin).count();
  };
  // Warm up allocators and caches.
  run_once(1024);
  run_once(8192);
  double small = 0.0;
  double large = 0.0;
  for (int i = 0; i < trials; ++i) small += run_once(1024);
  for (int i = 0; i < trials; ++i) large += run_once(8192);
  double ratio = large / small;
  if (!(ratio <= 10.0))
    return CheckResult::fail("linear-cost", "8192/1024 time ratio " + detail::fmt(ratio));
  return CheckResult::pass("linear-cost", "time ratio " + detail::fmt(ratio));
}

/// Fig-5 style data: ESS vs p for three variance classes, p in [0.01, 4].
inline void write_ess_curve_csv(const std::string& path, int grid_points = 400,
                                std::uint64_t seed = 112) {
  struct Class {
    const char* name;
    double sigma;
  };
  const Class classes[] = {{"low", 0.05}, {"typical", 0.3}, {"high", 1.5}};
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for write: " + path);
  out << "variance_class,p,ess_norm\n";
  for (const Class& cls : classes) {
    Rng rng(seed);
    std::vector<double> d(64);
    for (double& x : d) x = cls.sigma * rng.normal();
    for (int g = 0; g < grid_points; ++g) {
      double p = 0.01 + (4.0 - 0.01) * static_cast<double>(g) / (grid_points - 1);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.12g", ess_norm_at_p(d, p));
      out << cls.name << ',' << p << ',' << buf << '\n';
    }
  }
  if (!out) throw io_error("write failed: " + path);
}

/// Every ess-curve column must be monotone non-increasing in p.
inline CheckResult ess_curve_monotone(const std::string& path, int grid_points = 400,
                                      std::uint64_t seed = 112) {
  write_ess_curve_csv(path, grid_points, seed);
  std::ifstream in(path);
  if (!in) return CheckResult::fail("ess-curve", "cannot reopen " + path);
  std::string line;
  std::getline(in, line);  // header
  std::string prev_class;
  double prev_ess = 2.0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cls, p_str, ess_str;
    std::getline(ss, cls, ',');
    std::getline(ss, p_str, ',');
    std::getline(ss, ess_str, ',');
    double ess = std::strtod(ess_str.c_str(), nullptr);
    if (cls != prev_class) {
      prev_class = cls;
      prev_ess = 2.0;
    }
    if (ess > prev_ess + 1e-10)
      return CheckResult::fail("ess-curve", "class " + cls + " rose at p=" + p_str);
    prev_ess = ess;
  }
  return CheckResult::pass("ess-curve", path);
}

}  // namespace pmpo::checks
