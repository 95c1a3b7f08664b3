#pragma once

#include <cstdint>
#include <vector>

#include "pmpo/errors.hpp"

namespace pmpo {

/// One sampled response. Log-probs are stored per step; the response mask
/// selects the tokens that count (the toy tasks use full-response masks, but
/// the deltas builder honors the mask regardless).
struct Trajectory {
  int prompt_id = 0;
  std::vector<int> tokens;
  std::vector<double> old_logprobs;
  std::vector<double> new_logprobs;
  std::vector<std::uint8_t> response_mask;
  double reward = 0.0;
  double advantage = 0.0;
};

/// Per-token log-probability changes new - old over mask-selected tokens.
inline std::vector<double> token_log_deltas(const Trajectory& traj) {
  if (traj.old_logprobs.size() != traj.new_logprobs.size() ||
      traj.old_logprobs.size() != traj.response_mask.size())
    throw invalid_input("trajectory per-token arrays have mismatched lengths");
  std::vector<double> deltas;
  deltas.reserve(traj.old_logprobs.size());
  for (std::size_t t = 0; t < traj.old_logprobs.size(); ++t) {
    if (traj.response_mask[t]) deltas.push_back(traj.new_logprobs[t] - traj.old_logprobs[t]);
  }
  if (deltas.empty()) throw invalid_input("trajectory selects no response tokens");
  return deltas;
}

}  // namespace pmpo
