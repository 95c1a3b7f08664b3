#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pmpo/aggregation.hpp"
#include "pmpo/errors.hpp"
#include "pmpo/p_selection.hpp"
#include "pmpo/policy.hpp"
#include "pmpo/surrogate.hpp"
#include "pmpo/train.hpp"
#include "pmpo/trajectory.hpp"

// Reference implementations for tests and the `check` command. Deliberately
// direct and slow; the training path never calls into this namespace.
namespace pmpo::oracle {

/// Direct (non-log-domain) power mean (sum r^p / n)^(1/p). Overflow is
/// detected and reported instead of silently returning inf.
inline double naive_power_mean(std::span<const double> ratios, double p, bool normalized = true) {
  if (ratios.empty()) throw invalid_input("naive_power_mean: empty input");
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw invalid_input("naive_power_mean: ratios must be positive");
  }
  const double n = static_cast<double>(ratios.size());
  double result;
  if (std::abs(p) < kGeometricEps) {
    double prod = 1.0;
    for (double r : ratios) prod *= r;
    result = normalized ? std::pow(prod, 1.0 / n) : prod;
  } else {
    double sum = 0.0;
    for (double r : ratios) sum += std::pow(r, p);
    if (normalized) sum /= n;
    result = std::pow(sum, 1.0 / p);
  }
  if (!std::isfinite(result)) throw invalid_input("naive_power_mean: overflow");
  return result;
}

/// Exhaustive scan over the p grid, returning the argmin of
/// |ESS_norm(p) - target|. Ties break to the upper bound, mirroring the
/// solver's fallback on constant inputs.
inline double grid_solve_p(std::span<const double> deltas, double target, const PBounds& bounds,
                           double resolution = 1e-3) {
  check_deltas(deltas);
  bounds.validate();
  if (!(resolution > 0.0 && resolution <= 1e-3)) throw invalid_input("grid resolution must be in (0, 1e-3]");
  double best_p = bounds.p_min;
  double best_gap = std::abs(ess_norm_at_p(deltas, bounds.p_min) - target);
  for (double p = bounds.p_min;; p += resolution) {
    if (p > bounds.p_max) p = bounds.p_max;
    double gap = std::abs(ess_norm_at_p(deltas, p) - target);
    if (gap <= best_gap) {
      best_gap = gap;
      best_p = p;
    }
    if (p >= bounds.p_max) break;
  }
  return best_p;
}

/// Loss over a trajectory set with each trajectory's aggregation exponent
/// frozen (0 encodes the geometric branch). The clip is re-applied at the
/// evaluation point; p is not re-solved. A trajectory whose gradient mask is
/// fully closed (the sequence gate) contributes a constant, and constants
/// drop out of central differences, so its term is skipped.
inline double frozen_p_loss(std::span<Trajectory* const> trajectories,
                            const AggregationConfig& agg, std::span<const double> frozen_p,
                            const PolicyParams& params) {
  if (trajectories.size() != frozen_p.size())
    throw invalid_input("frozen_p_loss: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    Trajectory* traj = trajectories[k];
    int prev = 0;
    for (std::size_t t = 0; t < traj->tokens.size(); ++t) {
      traj->new_logprobs[t] =
          log_prob(params, traj->prompt_id, static_cast<int>(t), prev, traj->tokens[t]);
      prev = traj->tokens[t];
    }
    std::vector<double> deltas = token_log_deltas(*traj);
    const int sign = traj->advantage > 0.0 ? 1 : -1;
    ClippedDeltas clipped = clip_deltas(deltas, sign, agg.clip);
    bool any_open = false;
    for (std::uint8_t m : clipped.grad_mask) any_open = any_open || m != 0;
    if (!any_open) continue;
    double r_hat = power_mean_log(clipped.values, frozen_p[k], agg.length_normalized);
    total += traj->advantage * r_hat;
  }
  return -total / static_cast<double>(trajectories.size());
}

/// Central finite differences of the frozen-p loss over every policy
/// parameter coordinate. The per-trajectory p is solved once at the
/// unperturbed point and then held fixed, matching the training-path
/// convention that the ESS solver is a stop-gradient.
inline TableGrads finite_difference_loss_grad(std::span<Trajectory* const> trajectories,
                                              const AggregationConfig& agg,
                                              const SelectorContext& ctx, PolicyParams params,
                                              double epsilon = 1e-5) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw invalid_input("finite-difference epsilon out of the supported range");

  // Freeze p at the unperturbed point, using the same evaluation path as the
  // analytic gradient so heuristic selectors see identical statistics.
  std::vector<double> frozen_p;
  {
    MinibatchEval eval = evaluate_minibatch(trajectories, params, agg, ctx);
    if (eval.counted.size() != trajectories.size())
      throw invalid_input("finite-difference oracle requires non-degenerate trajectories");
    for (const TrajectoryDiagnostics& d : eval.counted) frozen_p.push_back(d.selection.p);
  }

  TableGrads grad;
  auto diff_table = [&](std::vector<double>& table, std::vector<double>& out) {
    out.assign(table.size(), 0.0);
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double saved = table[i];
      table[i] = saved + epsilon;
      double up = frozen_p_loss(trajectories, agg, frozen_p, params);
      table[i] = saved - epsilon;
      double down = frozen_p_loss(trajectories, agg, frozen_p, params);
      table[i] = saved;
      out[i] = (up - down) / (2.0 * epsilon);
    }
  };
  diff_table(params.prev_token_table, grad.prev_token);
  diff_table(params.position_table, grad.position);
  diff_table(params.prompt_table, grad.prompt);
  return grad;
}

}  // namespace pmpo::oracle
