#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pmpo/grouping.hpp"
#include "pmpo/policy.hpp"
#include "pmpo/rng.hpp"
#include "pmpo/task.hpp"
#include "pmpo/trajectory.hpp"

namespace pmpo {

/// Sample one trajectory token-by-token at temperature 1.
inline Trajectory sample_trajectory(const PolicyParams& params, const TaskSpec& task,
                                    int prompt_id, Rng& rng) {
  Trajectory traj;
  traj.prompt_id = prompt_id;
  const int t_len = task.episode_length;
  traj.tokens.resize(static_cast<std::size_t>(t_len));
  traj.old_logprobs.resize(static_cast<std::size_t>(t_len));
  traj.new_logprobs.assign(static_cast<std::size_t>(t_len), 0.0);
  traj.response_mask.assign(static_cast<std::size_t>(t_len), 1);

  int prev = 0;  // BOS convention
  for (int t = 0; t < t_len; ++t) {
    std::vector<double> logp = log_softmax_at(params, prompt_id, t, prev);
    double u = rng.uniform();
    double cum = 0.0;
    int action = task.vocab_size - 1;
    for (int a = 0; a < task.vocab_size; ++a) {
      cum += std::exp(logp[static_cast<std::size_t>(a)]);
      if (u < cum) {
        action = a;
        break;
      }
    }
    traj.tokens[static_cast<std::size_t>(t)] = action;
    traj.old_logprobs[static_cast<std::size_t>(t)] = logp[static_cast<std::size_t>(action)];
    prev = action;
  }
  traj.reward = verify(task, prompt_id, traj.tokens);
  return traj;
}

/// Sample K trajectories per prompt under the old policy and attach
/// group-relative advantages. Each prompt draws from its own child stream of
/// the given seed, so results do not depend on prompt processing order.
inline std::vector<Group> rollout(const PolicyParams& params_old, const TaskSpec& task,
                                  std::span<const int> prompt_ids, int group_size,
                                  std::uint64_t seed, bool advantage_std_norm = false) {
  task.validate();
  if (group_size < 2) throw invalid_input("group_size must be >= 2");
  std::vector<Group> groups;
  groups.reserve(prompt_ids.size());
  for (std::size_t i = 0; i < prompt_ids.size(); ++i) {
    int prompt_id = prompt_ids[i];
    Rng rng(child_seed(seed, static_cast<std::uint64_t>(prompt_id)));
    Group g;
    g.prompt_id = prompt_id;
    g.trajectories.reserve(static_cast<std::size_t>(group_size));
    g.rewards.reserve(static_cast<std::size_t>(group_size));
    for (int k = 0; k < group_size; ++k) {
      Trajectory traj = sample_trajectory(params_old, task, prompt_id, rng);
      g.rewards.push_back(traj.reward);
      g.trajectories.push_back(std::move(traj));
    }
    g.advantages = group_advantages(g.rewards, advantage_std_norm);
    for (int k = 0; k < group_size; ++k)
      g.trajectories[static_cast<std::size_t>(k)].advantage =
          g.advantages[static_cast<std::size_t>(k)];
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace pmpo
