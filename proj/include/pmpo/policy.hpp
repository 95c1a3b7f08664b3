#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pmpo/aggregation.hpp"
#include "pmpo/errors.hpp"
#include "pmpo/task.hpp"

namespace pmpo {

/// Factored additive policy: logits for a state are the sum of three table
/// rows, one keyed by the previous token, one by the position, one by the
/// prompt class. Tiny parameter count, exact gradients, expressive enough for
/// the toy tasks. Position 0 conditions on a fixed BOS previous token of 0.
struct PolicyParams {
  int vocab_size = 0;
  int episode_length = 0;
  int num_prompts = 0;
  std::vector<double> prev_token_table;  // V x V
  std::vector<double> position_table;    // T x V
  std::vector<double> prompt_table;      // P x V

  static PolicyParams zeros(const TaskSpec& task) {
    task.validate();
    PolicyParams p;
    p.vocab_size = task.vocab_size;
    p.episode_length = task.episode_length;
    p.num_prompts = task.num_prompts;
    p.prev_token_table.assign(static_cast<std::size_t>(task.vocab_size) * task.vocab_size, 0.0);
    p.position_table.assign(static_cast<std::size_t>(task.episode_length) * task.vocab_size, 0.0);
    p.prompt_table.assign(static_cast<std::size_t>(task.num_prompts) * task.vocab_size, 0.0);
    return p;
  }

  std::size_t size() const {
    return prev_token_table.size() + position_table.size() + prompt_table.size();
  }

  void check_state(int prompt_id, int position, int prev_token) const {
    if (prompt_id < 0 || prompt_id >= num_prompts) throw invalid_input("prompt_id out of range");
    if (position < 0 || position >= episode_length) throw invalid_input("position out of range");
    if (prev_token < 0 || prev_token >= vocab_size) throw invalid_input("prev_token out of range");
  }

  /// Sum the three active rows into `logits` (resized to V).
  void logits_at(int prompt_id, int position, int prev_token, std::vector<double>& logits) const {
    check_state(prompt_id, position, prev_token);
    const int v = vocab_size;
    logits.resize(static_cast<std::size_t>(v));
    const double* prev_row = &prev_token_table[static_cast<std::size_t>(prev_token) * v];
    const double* pos_row = &position_table[static_cast<std::size_t>(position) * v];
    const double* prompt_row = &prompt_table[static_cast<std::size_t>(prompt_id) * v];
    for (int a = 0; a < v; ++a) logits[a] = prev_row[a] + pos_row[a] + prompt_row[a];
  }
};

/// Log-softmax of the state's logits. Rollout sampling and training both go
/// through this so recomputed log-probs match the sampled ones bit for bit.
inline std::vector<double> log_softmax_at(const PolicyParams& params, int prompt_id, int position,
                                          int prev_token) {
  std::vector<double> logits;
  params.logits_at(prompt_id, position, prev_token, logits);
  double lse = log_sum_exp(logits);
  for (double& x : logits) x -= lse;
  return logits;
}

inline double log_prob(const PolicyParams& params, int prompt_id, int position, int prev_token,
                       int action) {
  if (action < 0 || action >= params.vocab_size) throw invalid_input("action out of range");
  return log_softmax_at(params, prompt_id, position, prev_token)[static_cast<std::size_t>(action)];
}

struct LogProbGrad {
  double log_prob = 0.0;
  /// one_hot(action) - softmax(logits); the same row is the gradient of
  /// log pi w.r.t. each of the three active table rows.
  std::vector<double> grad_row;
};

inline LogProbGrad log_prob_and_grad(const PolicyParams& params, int prompt_id, int position,
                                     int prev_token, int action) {
  if (action < 0 || action >= params.vocab_size) throw invalid_input("action out of range");
  std::vector<double> logp = log_softmax_at(params, prompt_id, position, prev_token);
  LogProbGrad out;
  out.log_prob = logp[static_cast<std::size_t>(action)];
  out.grad_row.resize(logp.size());
  for (std::size_t a = 0; a < logp.size(); ++a) out.grad_row[a] = -std::exp(logp[a]);
  out.grad_row[static_cast<std::size_t>(action)] += 1.0;
  return out;
}

/// Shannon entropy (nats) of the policy's token distribution at a state.
inline double token_entropy(const PolicyParams& params, int prompt_id, int position,
                            int prev_token) {
  std::vector<double> logp = log_softmax_at(params, prompt_id, position, prev_token);
  double h = 0.0;
  for (double lp : logp) {
    double pr = std::exp(lp);
    if (pr > 0.0) h -= pr * lp;
  }
  return h;
}

}  // namespace pmpo
