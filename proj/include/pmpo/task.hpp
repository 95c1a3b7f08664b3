#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>

#include "pmpo/errors.hpp"
#include "pmpo/rng.hpp"

namespace pmpo {

/// Synthetic verifiable-reward tasks. Both have a seeded hidden target per
/// prompt and a deterministic 0/1 verifier.
enum class TaskKind { last_token_key, mod_sum };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::last_token_key: return "last-token-key";
    case TaskKind::mod_sum: return "mod-sum";
  }
  return "?";
}

inline TaskKind task_from_string(const std::string& s) {
  if (s == "last-token-key") return TaskKind::last_token_key;
  if (s == "mod-sum") return TaskKind::mod_sum;
  throw invalid_input("unknown task '" + s + "'");
}

struct TaskSpec {
  TaskKind kind = TaskKind::last_token_key;
  int vocab_size = 16;
  int episode_length = 8;
  int num_prompts = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_size < 2) throw invalid_input("vocab_size must be >= 2");
    if (episode_length < 1) throw invalid_input("episode_length must be >= 1");
    if (num_prompts < 1) throw invalid_input("num_prompts must be >= 1");
  }

  /// Seeded hidden target for a prompt: the required last token
  /// (last-token-key) or the required token-sum residue (mod-sum).
  int target(int prompt_id) const {
    if (prompt_id < 0 || prompt_id >= num_prompts) throw invalid_input("prompt_id out of range");
    std::uint64_t s = child_seed(seed, static_cast<std::uint64_t>(prompt_id));
    return static_cast<int>(splitmix64(s) % static_cast<std::uint64_t>(vocab_size));
  }
};

/// Rule-based verifier: 1 on success, 0 otherwise.
inline double verify(const TaskSpec& task, int prompt_id, std::span<const int> tokens) {
  task.validate();
  if (tokens.empty()) throw invalid_input("verify: empty token sequence");
  for (int t : tokens) {
    if (t < 0 || t >= task.vocab_size) throw invalid_input("verify: token out of vocabulary");
  }
  switch (task.kind) {
    case TaskKind::last_token_key:
      return tokens.back() == task.target(prompt_id) ? 1.0 : 0.0;
    case TaskKind::mod_sum: {
      long sum = std::accumulate(tokens.begin(), tokens.end(), 0L);
      return static_cast<int>(sum % task.vocab_size) == task.target(prompt_id) ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

}  // namespace pmpo
