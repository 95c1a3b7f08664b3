#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "pmpo/aggregation.hpp"
#include "pmpo/errors.hpp"

namespace pmpo {

struct PBounds {
  double p_min = 0.01;
  double p_max = 0.99;

  void validate() const {
    if (!(0.0 < p_min && p_min < p_max)) throw invalid_input("require 0 < p_min < p_max");
  }
  double clamp(double p) const { return std::min(std::max(p, p_min), p_max); }
};

struct SolverConfig {
  /// Tolerance on |ESS(p) - target|.
  double tol = 1e-3;
  int max_iter = 60;

  void validate() const {
    if (!(tol > 0.0)) throw invalid_input("solver tol must be > 0");
    if (max_iter < 1) throw invalid_input("solver max_iter must be >= 1");
  }
};

/// Running mean/variance with exponential decay. First observation seeds the
/// mean directly.
struct EmaTracker {
  double mean = 0.0;
  double variance = 0.0;
  double decay = 0.99;
  long count = 0;
};

inline void update_ema(EmaTracker& t, double observation) {
  if (!std::isfinite(observation)) throw invalid_input("EMA observation must be finite");
  if (t.count == 0) {
    t.mean = observation;
    t.variance = 0.0;
  } else {
    t.mean = t.decay * t.mean + (1.0 - t.decay) * observation;
    double d = observation - t.mean;
    t.variance = t.decay * t.variance + (1.0 - t.decay) * d * d;
  }
  ++t.count;
}

/// Knobs for the z-score heuristic selectors. None of these are pinned by the
/// method itself; all are surfaced in the run config.
struct HeuristicConfig {
  double alpha = 1.0;
  long warmup_steps = 10;
  double variance_floor = 1e-8;
};

enum class SelectorId : std::uint8_t {
  fixed,
  adaptive_ess,
  direct,
  length_zscore,
  entropy_zscore,
  schedule,
  grpo,
  gmpo,
};

/// Outcome of choosing p for one trajectory, with the matching diagnostics.
struct PSelection {
  double p = 0.0;
  double target_ess = 0.0;
  double achieved_ess = 0.0;
  double f_clip = 0.0;
  SelectorId selector = SelectorId::fixed;
  int iterations = 0;
};

/// Target ESS from the clip fraction: 1/n when nothing saturated (maximal
/// concentration requested, which the solver resolves to p_max), 1 when
/// everything saturated.
inline double target_ess(double f_clip, std::size_t n) {
  if (n == 0) throw invalid_input("target_ess needs n >= 1");
  if (!(f_clip >= 0.0 && f_clip <= 1.0)) throw invalid_input("f_clip must be in [0,1]");
  const double inv_n = 1.0 / static_cast<double>(n);
  return inv_n + f_clip * (1.0 - inv_n);
}

/// Bisection on the monotone map p -> ESS_norm(p) over [p_min, p_max].
/// Unreachable targets clamp to the bound dictated by monotonicity: targets
/// above ESS(p_min) return p_min, targets below ESS(p_max) return p_max
/// (constant deltas have ESS == 1 everywhere and land on p_max for any
/// target < 1). Otherwise iterate until the ESS gap is within tol and the
/// bracket has collapsed to tol*(p_max - p_min), which pins p itself; this
/// takes ~10 halvings at the default tolerance.
inline PSelection solve_p_ess_match(std::span<const double> clipped_deltas, double target,
                                    const PBounds& bounds, const SolverConfig& solver) {
  check_deltas(clipped_deltas);
  bounds.validate();
  solver.validate();
  if (!(target > 0.0 && target <= 1.0)) throw invalid_input("target ESS must be in (0, 1]");

  PSelection sel;
  sel.selector = SelectorId::adaptive_ess;
  sel.target_ess = target;

  double lo = bounds.p_min;
  double hi = bounds.p_max;
  const double ess_lo = ess_norm_at_p(clipped_deltas, lo);
  const double ess_hi = ess_norm_at_p(clipped_deltas, hi);

  if (target >= ess_lo) {
    sel.p = lo;
    sel.achieved_ess = ess_lo;
    return sel;
  }
  if (target <= ess_hi) {
    sel.p = hi;
    sel.achieved_ess = ess_hi;
    return sel;
  }

  const double p_tol = solver.tol * (bounds.p_max - bounds.p_min);
  for (int it = 1; it <= solver.max_iter; ++it) {
    double mid = 0.5 * (lo + hi);
    double ess_mid = ess_norm_at_p(clipped_deltas, mid);
    sel.p = mid;
    sel.achieved_ess = ess_mid;
    sel.iterations = it;
    if (std::abs(ess_mid - target) <= solver.tol && (hi - lo) <= p_tol) return sel;
    if (ess_mid > target) {
      lo = mid;  // ESS decreasing in p: the matching p lies above mid
    } else {
      hi = mid;
    }
  }
  throw solver_failure("ESS bisection exhausted max_iter on a bracketed target");
}

/// Naive linear mapping p = 1 - f_clip, clamped to the bounds.
inline double select_p_direct(double f_clip, const PBounds& bounds) {
  bounds.validate();
  if (!(f_clip >= 0.0 && f_clip <= 1.0)) throw invalid_input("f_clip must be in [0,1]");
  return bounds.clamp(1.0 - f_clip);
}

/// Sigmoid mapping p = p_min + (p_max - p_min) * sigma(-alpha * z), where z is
/// the statistic's z-score against the EMA. During warmup z is forced to 0.
inline double select_p_zscore(double statistic, const EmaTracker& tracker,
                              const HeuristicConfig& cfg, const PBounds& bounds) {
  bounds.validate();
  if (!std::isfinite(statistic)) throw invalid_input("selector statistic must be finite");
  double z = 0.0;
  if (tracker.count >= cfg.warmup_steps) {
    double sd = std::sqrt(std::max(tracker.variance, cfg.variance_floor));
    z = (statistic - tracker.mean) / sd;
  }
  double s = 1.0 / (1.0 + std::exp(cfg.alpha * z));  // sigma(-alpha*z)
  return bounds.p_min + (bounds.p_max - bounds.p_min) * s;
}

/// Cosine decay from p_max at step 0 to p_min at step = total_steps.
inline double select_p_schedule(long step, long total_steps, const PBounds& bounds) {
  bounds.validate();
  if (total_steps < 1) throw invalid_input("total_steps must be >= 1");
  if (step < 0) throw invalid_input("step must be >= 0");
  if (step > total_steps) step = total_steps;
  double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  double half = 0.5 * (1.0 + std::cos(3.141592653589793238463 * frac));
  return bounds.p_min + (bounds.p_max - bounds.p_min) * half;
}

}  // namespace pmpo
