#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pmpo/errors.hpp"
#include "pmpo/trajectory.hpp"

namespace pmpo {

/// K trajectories sampled for one prompt, with their group-relative
/// advantages. Advantages sum to zero by construction.
struct Group {
  int prompt_id = 0;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

/// Mean-only group-relative advantages A_k = R_k - mean(R). With
/// std_normalize the centered values are additionally divided by the group
/// standard deviation (floored, so all-equal groups stay at zero).
inline std::vector<double> group_advantages(std::span<const double> rewards,
                                            bool std_normalize = false) {
  if (rewards.size() < 2) throw invalid_input("group needs at least 2 trajectories");
  const double k = static_cast<double>(rewards.size());
  double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / k;
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  if (std_normalize) {
    double var = 0.0;
    for (double a : adv) var += a * a;
    double sd = std::sqrt(var / k);
    if (sd > 1e-8) {
      for (double& a : adv) a /= sd;
    }
  }
  return adv;
}

/// All-equal rewards give a zero advantage vector; such groups carry no
/// learning signal and are skipped in the loss.
inline bool is_degenerate(std::span<const double> advantages) {
  return std::all_of(advantages.begin(), advantages.end(),
                     [](double a) { return a == 0.0; });
}

}  // namespace pmpo
