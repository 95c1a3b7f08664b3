#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pmpo/aggregation.hpp"
#include "pmpo/clipping.hpp"
#include "pmpo/errors.hpp"
#include "pmpo/p_selection.hpp"

namespace pmpo {

enum class GeometryKind {
  grpo,           // arithmetic mean, p = 1
  gmpo,           // geometric limit
  pmpo_fixed,     // fixed exponent p_fixed
  pmpo_adaptive,  // clip-aware ESS matching
  pmpo_direct,    // p = 1 - f_clip
  pmpo_length,    // z-score of sequence length
  pmpo_entropy,   // z-score of mean token entropy
  pmpo_schedule,  // cosine decay over training steps
};

inline const char* to_string(GeometryKind k) {
  switch (k) {
    case GeometryKind::grpo: return "grpo";
    case GeometryKind::gmpo: return "gmpo";
    case GeometryKind::pmpo_fixed: return "pmpo-fixed";
    case GeometryKind::pmpo_adaptive: return "pmpo-adaptive";
    case GeometryKind::pmpo_direct: return "pmpo-direct";
    case GeometryKind::pmpo_length: return "pmpo-length";
    case GeometryKind::pmpo_entropy: return "pmpo-entropy";
    case GeometryKind::pmpo_schedule: return "pmpo-schedule";
  }
  return "?";
}

inline GeometryKind geometry_from_string(const std::string& s) {
  if (s == "grpo") return GeometryKind::grpo;
  if (s == "gmpo") return GeometryKind::gmpo;
  if (s == "pmpo-fixed") return GeometryKind::pmpo_fixed;
  if (s == "pmpo-adaptive") return GeometryKind::pmpo_adaptive;
  if (s == "pmpo-direct") return GeometryKind::pmpo_direct;
  if (s == "pmpo-length") return GeometryKind::pmpo_length;
  if (s == "pmpo-entropy") return GeometryKind::pmpo_entropy;
  if (s == "pmpo-schedule") return GeometryKind::pmpo_schedule;
  throw invalid_input("unknown geometry '" + s + "'");
}

struct GeometryMode {
  GeometryKind kind = GeometryKind::pmpo_adaptive;
  double p_fixed = 0.5;  // used only by pmpo_fixed
};

/// Everything needed to aggregate one trajectory.
struct AggregationConfig {
  GeometryMode geometry;
  ClipConfig clip;
  PBounds bounds;
  SolverConfig solver;
  HeuristicConfig heuristic;
  bool length_normalized = true;
};

/// Per-trajectory inputs consumed only by the heuristic selectors. Trackers
/// are read-only snapshots; the trainer updates them after the batch so every
/// trajectory in a batch sees the same statistics.
struct SelectorContext {
  double length_stat = 0.0;
  double entropy_stat = 0.0;
  EmaTracker length_ema;
  EmaTracker entropy_ema;
  long step = 0;
  long total_steps = 1;
};

struct TrajectoryDiagnostics {
  PSelection selection;
  double delta_abs_mean = 0.0;  // mean |raw delta|
  double ratio_max = 1.0;       // max exp(raw delta)
};

struct SurrogateResult {
  double effective_ratio = 1.0;
  /// Exponent used for aggregation; 0 encodes the geometric branch.
  double p_used = 0.0;
  /// d r_hat / d delta_j with the clip grad_mask applied.
  std::vector<double> token_grad_weights;
  double loss_contribution = 0.0;  // -A * r_hat
  TrajectoryDiagnostics diagnostics;
};

/// Closed-form per-token gradient of the aggregated ratio. For p away from the
/// geometric branch, d r_hat / d delta_j = r_hat * softmax_p(delta)_j for both
/// the normalized and the sum-aggregated mean. The geometric branch gives
/// r_hat/n per token (normalized) or r_hat (sum-aggregated). Masked tokens sit
/// on the constant branch of the clip and contribute exactly zero.
inline std::vector<double> token_gradients(const ClippedDeltas& clipped, double p, double r_hat,
                                           bool length_normalized) {
  if (clipped.values.size() != clipped.grad_mask.size())
    throw invalid_input("clipped values and grad_mask sizes differ");
  if (!(r_hat > 0.0) || !std::isfinite(r_hat))
    throw invalid_input("r_hat must be finite and > 0");
  const std::size_t n = clipped.values.size();
  std::vector<double> g(n, 0.0);
  if (std::abs(p) < kGeometricEps) {
    double per_token = length_normalized ? r_hat / static_cast<double>(n) : r_hat;
    for (std::size_t j = 0; j < n; ++j) {
      if (clipped.grad_mask[j]) g[j] = per_token;
    }
    return g;
  }
  std::vector<double> w = softmax_weights(clipped.values, p);
  for (std::size_t j = 0; j < n; ++j) {
    if (clipped.grad_mask[j]) g[j] = r_hat * w[j];
  }
  return g;
}

/// One trajectory through the full pipeline: clip with the advantage sign,
/// measure the clip fraction on raw deltas, choose p per the configured
/// geometry, aggregate the clipped deltas, and emit gradient weights plus
/// diagnostics.
inline SurrogateResult effective_ratio(std::span<const double> deltas, double advantage,
                                       const AggregationConfig& cfg,
                                       const SelectorContext& ctx = {}) {
  check_deltas(deltas);
  if (advantage == 0.0 || !std::isfinite(advantage))
    throw invalid_input("zero-advantage trajectories must be skipped upstream");
  cfg.bounds.validate();

  const int sign = advantage > 0.0 ? 1 : -1;
  const std::size_t n = deltas.size();
  ClippedDeltas clipped = clip_deltas(deltas, sign, cfg.clip);
  const double f_clip = clip_fraction(deltas, cfg.clip.eps_ess);

  PSelection sel;
  sel.f_clip = f_clip;
  double p = 0.0;
  bool geometric = false;

  switch (cfg.geometry.kind) {
    case GeometryKind::grpo:
      p = 1.0;
      sel.selector = SelectorId::grpo;
      break;
    case GeometryKind::gmpo:
      geometric = true;
      sel.selector = SelectorId::gmpo;
      break;
    case GeometryKind::pmpo_fixed:
      p = cfg.geometry.p_fixed;
      geometric = std::abs(p) < kGeometricEps;
      sel.selector = SelectorId::fixed;
      break;
    case GeometryKind::pmpo_adaptive: {
      double eta = target_ess(f_clip, n);
      sel = solve_p_ess_match(clipped.values, eta, cfg.bounds, cfg.solver);
      sel.f_clip = f_clip;
      p = sel.p;
      break;
    }
    case GeometryKind::pmpo_direct:
      p = select_p_direct(f_clip, cfg.bounds);
      sel.selector = SelectorId::direct;
      break;
    case GeometryKind::pmpo_length:
      p = select_p_zscore(ctx.length_stat, ctx.length_ema, cfg.heuristic, cfg.bounds);
      sel.selector = SelectorId::length_zscore;
      break;
    case GeometryKind::pmpo_entropy:
      p = select_p_zscore(ctx.entropy_stat, ctx.entropy_ema, cfg.heuristic, cfg.bounds);
      sel.selector = SelectorId::entropy_zscore;
      break;
    case GeometryKind::pmpo_schedule:
      p = select_p_schedule(ctx.step, ctx.total_steps, cfg.bounds);
      sel.selector = SelectorId::schedule;
      break;
  }

  // Non-adaptive selectors still report the target/achieved ESS so every run
  // logs the same diagnostic columns.
  if (cfg.geometry.kind != GeometryKind::pmpo_adaptive) {
    sel.p = geometric ? 0.0 : p;
    sel.target_ess = target_ess(f_clip, n);
    sel.achieved_ess = ess_norm_at_p(clipped.values, geometric ? 0.0 : p);
  }

  const double p_eff = geometric ? 0.0 : p;
  SurrogateResult res;
  res.effective_ratio = power_mean_log(clipped.values, p_eff, cfg.length_normalized);
  res.p_used = p_eff;
  res.token_grad_weights =
      token_gradients(clipped, p_eff, res.effective_ratio, cfg.length_normalized);
  res.loss_contribution = -advantage * res.effective_ratio;
  res.diagnostics.selection = sel;

  double abs_sum = 0.0;
  double max_delta = deltas[0];
  for (double d : deltas) {
    abs_sum += std::abs(d);
    max_delta = std::max(max_delta, d);
  }
  res.diagnostics.delta_abs_mean = abs_sum / static_cast<double>(n);
  res.diagnostics.ratio_max = std::exp(max_delta);
  return res;
}

/// Batch surrogate loss, -(1/K) * sum_k A_k * r_hat_k.
inline double batch_loss(std::span<const SurrogateResult> results,
                         std::span<const double> advantages) {
  if (results.size() != advantages.size())
    throw invalid_input("batch_loss: results and advantages lengths differ");
  if (results.empty()) throw invalid_input("batch_loss: empty batch");
  double total = 0.0;
  for (std::size_t k = 0; k < results.size(); ++k)
    total += advantages[k] * results[k].effective_ratio;
  return -total / static_cast<double>(results.size());
}

}  // namespace pmpo
