#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pmpo/aggregation.hpp"
#include "pmpo/errors.hpp"

namespace pmpo {

/// Log-domain clipping variants.
///   paper_max: sign-corrected one-sided clip, out = sgn(A)*max(sgn(A)*d, -c).
///   two_sided: symmetric clamp of the raw delta to [-c, c].
///   sequence:  per-token values untouched; the whole trajectory's gradient is
///              gated off when the sign-corrected mean delta exits the trust
///              region.
///   none:      identity.
enum class ClipMode { paper_max, two_sided, sequence, none };

inline const char* to_string(ClipMode m) {
  switch (m) {
    case ClipMode::paper_max: return "paper-max";
    case ClipMode::two_sided: return "two-sided";
    case ClipMode::sequence: return "sequence";
    case ClipMode::none: return "none";
  }
  return "?";
}

inline ClipMode clip_mode_from_string(const std::string& s) {
  if (s == "paper-max") return ClipMode::paper_max;
  if (s == "two-sided") return ClipMode::two_sided;
  if (s == "sequence") return ClipMode::sequence;
  if (s == "none") return ClipMode::none;
  throw invalid_input("unknown clip mode '" + s + "'");
}

struct ClipConfig {
  ClipMode mode = ClipMode::paper_max;
  /// Training clip range in log units.
  double c = 0.4;
  /// Saturation threshold for the clip fraction. Distinct from c. Zero is
  /// allowed: it is the degeneration ablation where any drift counts as
  /// saturated.
  double eps_ess = 0.1;

  void validate() const {
    if (!(c > 0.0)) throw invalid_input("clip range c must be > 0");
    if (!(eps_ess >= 0.0)) throw invalid_input("eps_ess must be >= 0");
  }
};

struct ClippedDeltas {
  std::vector<double> values;
  /// 1 where the clip is inactive and gradient passes, 0 where the clipped
  /// branch is a constant.
  std::vector<std::uint8_t> grad_mask;
};

/// Clip token log-deltas per the configured mode. advantage_sign must be +1
/// or -1; zero-advantage trajectories are skipped upstream.
inline ClippedDeltas clip_deltas(std::span<const double> deltas, int advantage_sign,
                                 const ClipConfig& cfg) {
  check_deltas(deltas);
  cfg.validate();
  if (advantage_sign != 1 && advantage_sign != -1)
    throw invalid_input("advantage sign must be +1 or -1");

  const std::size_t n = deltas.size();
  ClippedDeltas out;
  out.values.assign(deltas.begin(), deltas.end());
  out.grad_mask.assign(n, 1);
  const double sign = static_cast<double>(advantage_sign);

  switch (cfg.mode) {
    case ClipMode::paper_max:
      // out = sgn(A)*max(x, clip(x, -c, c)) with x = sgn(A)*d; only the
      // sign-corrected lower side ever clips, so this is sgn(A)*max(x, -c).
      for (std::size_t i = 0; i < n; ++i) {
        double x = sign * deltas[i];
        if (x < -cfg.c) {
          out.values[i] = sign * -cfg.c;
          out.grad_mask[i] = 0;
        }
      }
      break;
    case ClipMode::two_sided:
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(deltas[i]) > cfg.c) {
          out.values[i] = std::clamp(deltas[i], -cfg.c, cfg.c);
          out.grad_mask[i] = 0;
        }
      }
      break;
    case ClipMode::sequence: {
      double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) /
                    static_cast<double>(n);
      if (sign * mean > cfg.c) std::fill(out.grad_mask.begin(), out.grad_mask.end(), 0);
      break;
    }
    case ClipMode::none:
      break;
  }
  return out;
}

/// Fraction of response tokens whose raw |delta| exceeds eps_ess. The test is
/// symmetric and deliberately ignores the advantage sign.
inline double clip_fraction(std::span<const double> deltas, double eps_ess) {
  check_deltas(deltas);
  if (!(eps_ess >= 0.0)) throw invalid_input("eps_ess must be >= 0");
  std::size_t saturated = 0;
  for (double d : deltas) {
    if (std::abs(d) > eps_ess) ++saturated;
  }
  return static_cast<double>(saturated) / static_cast<double>(deltas.size());
}

}  // namespace pmpo
