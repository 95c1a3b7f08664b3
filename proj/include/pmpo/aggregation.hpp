#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "pmpo/errors.hpp"

namespace pmpo {

/// Exponents below this magnitude take the geometric-limit branch of the
/// power mean. The ESS solver's lower bound (0.01) never enters this region;
/// only explicit geometric-mode callers do.
inline constexpr double kGeometricEps = 1e-6;

inline void check_deltas(std::span<const double> deltas) {
  if (deltas.empty()) throw invalid_input("token log-delta vector is empty");
  for (double d : deltas) {
    if (!std::isfinite(d)) throw invalid_input("token log-delta vector has a non-finite entry");
  }
}

/// Max-shifted log-sum-exp.
inline double log_sum_exp(std::span<const double> xs) {
  double m = *std::max_element(xs.begin(), xs.end());
  double total = 0.0;
  for (double x : xs) total += std::exp(x - m);
  return m + std::log(total);
}

/// Power mean of order p over the token ratios exp(delta_t), evaluated
/// entirely in the log domain:
///   exp((LSE(p*delta) - ln n) / p)   when length_normalized,
///   exp(LSE(p*delta) / p)            otherwise.
/// |p| < kGeometricEps selects the geometric limit, exp(mean(delta)) resp.
/// exp(sum(delta)).
inline double power_mean_log(std::span<const double> deltas, double p,
                             bool length_normalized = true) {
  check_deltas(deltas);
  if (!std::isfinite(p)) throw invalid_input("power mean order p must be finite");
  const double n = static_cast<double>(deltas.size());
  if (std::abs(p) < kGeometricEps) {
    double s = std::accumulate(deltas.begin(), deltas.end(), 0.0);
    return length_normalized ? std::exp(s / n) : std::exp(s);
  }
  std::vector<double> scaled(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) scaled[i] = p * deltas[i];
  double lse = log_sum_exp(scaled);
  if (length_normalized) lse -= std::log(n);
  return std::exp(lse / p);
}

/// Softmax weights w_j = exp(p*delta_j) / sum_t exp(p*delta_t), max-shifted.
/// p = 0 returns the exact uniform vector.
inline std::vector<double> softmax_weights(std::span<const double> deltas, double p) {
  check_deltas(deltas);
  if (!std::isfinite(p) || p < 0.0) throw invalid_input("softmax weights require finite p >= 0");
  const std::size_t n = deltas.size();
  std::vector<double> w(n);
  if (p == 0.0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(n));
    return w;
  }
  double m = p * *std::max_element(deltas.begin(), deltas.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(p * deltas[i] - m);
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  return w;
}

/// Normalized effective sample size of a weight vector:
///   ESS_norm(w) = (1/n) / sum_t w_t^2, in [1/n, 1].
inline double ess_norm(std::span<const double> weights) {
  if (weights.empty()) throw invalid_input("weight vector is empty");
  double sum = 0.0;
  double sumsq = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw invalid_input("weights must be finite and nonnegative");
    sum += w;
    sumsq += w * w;
  }
  if (sum == 0.0) throw invalid_input("weight vector sums to zero");
  return 1.0 / (static_cast<double>(weights.size()) * sumsq);
}

/// ESS of the softmax weights induced by deltas at inverse temperature p.
inline double ess_norm_at_p(std::span<const double> deltas, double p) {
  std::vector<double> w = softmax_weights(deltas, p);
  return ess_norm(w);
}

}  // namespace pmpo
