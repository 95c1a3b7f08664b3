#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pmpo/diagnostics.hpp"
#include "pmpo/grouping.hpp"
#include "pmpo/policy.hpp"
#include "pmpo/rollout.hpp"
#include "pmpo/surrogate.hpp"
#include "pmpo/task.hpp"
#include "pmpo/trajectory.hpp"

namespace pmpo {

struct TrainConfig {
  TaskSpec task;
  int group_size = 8;
  int prompts_per_batch = 64;
  int inner_epochs = 2;
  int minibatch_size = 64;
  double learning_rate = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double grad_norm_clip = 1.0;
  long total_steps = 300;
  std::uint64_t seed = 1;
  bool use_adam = true;  // plain gradient descent when false
  bool advantage_std_norm = false;
  double ema_decay = 0.99;
  AggregationConfig aggregation;

  void validate() const {
    task.validate();
    if (group_size < 2) throw invalid_input("group_size must be >= 2");
    if (prompts_per_batch < 1) throw invalid_input("prompts_per_batch must be >= 1");
    if (prompts_per_batch > task.num_prompts)
      throw invalid_input("prompts_per_batch exceeds num_prompts");
    if (inner_epochs < 1) throw invalid_input("inner_epochs must be >= 1");
    if (minibatch_size < 1) throw invalid_input("minibatch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw invalid_input("learning_rate must be >= 0");
    if (!(grad_norm_clip > 0.0)) throw invalid_input("grad_norm_clip must be > 0");
    if (total_steps < 0) throw invalid_input("total_steps must be >= 0");
    if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw invalid_input("ema_decay must be in (0,1)");
    aggregation.clip.validate();
    aggregation.bounds.validate();
    aggregation.solver.validate();
  }
};

/// Gradient (or optimizer moment) storage shaped like PolicyParams.
struct TableGrads {
  std::vector<double> prev_token;
  std::vector<double> position;
  std::vector<double> prompt;

  static TableGrads zeros_like(const PolicyParams& p) {
    TableGrads g;
    g.prev_token.assign(p.prev_token_table.size(), 0.0);
    g.position.assign(p.position_table.size(), 0.0);
    g.prompt.assign(p.prompt_table.size(), 0.0);
    return g;
  }

  double l2_norm() const {
    double s = 0.0;
    for (double x : prev_token) s += x * x;
    for (double x : position) s += x * x;
    for (double x : prompt) s += x * x;
    return std::sqrt(s);
  }

  void scale(double factor) {
    for (double& x : prev_token) x *= factor;
    for (double& x : position) x *= factor;
    for (double& x : prompt) x *= factor;
  }
};

class AdamOptimizer {
 public:
  AdamOptimizer(const PolicyParams& params, double lr, double beta1, double beta2)
      : lr_(lr),
        beta1_(beta1),
        beta2_(beta2),
        m_(TableGrads::zeros_like(params)),
        v_(TableGrads::zeros_like(params)) {}

  void step(PolicyParams& params, const TableGrads& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    update(params.prev_token_table, grad.prev_token, m_.prev_token, v_.prev_token, bc1, bc2);
    update(params.position_table, grad.position, m_.position, v_.position, bc1, bc2);
    update(params.prompt_table, grad.prompt, m_.prompt, v_.prompt, bc1, bc2);
  }

 private:
  void update(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
              std::vector<double>& v, double bc1, double bc2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      theta[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
    }
  }

  double lr_;
  double beta1_;
  double beta2_;
  long t_ = 0;
  TableGrads m_;
  TableGrads v_;
};

inline bool finite_params(const PolicyParams& p) {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  return ok(p.prev_token_table) && ok(p.position_table) && ok(p.prompt_table);
}

/// Result of evaluating one minibatch at the current parameters: analytic loss
/// gradient, surrogate loss, and per-trajectory diagnostics.
struct MinibatchEval {
  TableGrads grad;
  double loss = 0.0;
  /// Diagnostics of trajectories that entered the loss.
  std::vector<TrajectoryDiagnostics> counted;
  /// Diagnostics-only evaluations of zero-advantage trajectories.
  std::vector<TrajectoryDiagnostics> degenerate;
  /// Per-trajectory mean token entropies under the current policy.
  std::vector<double> entropies;
  double mean_entropy = 0.0;
};

/// Recompute new log-probs under `params`, run the surrogate per trajectory
/// (re-solving p each call), and chain the token gradient weights with the
/// policy log-prob gradients. Zero-advantage trajectories contribute no loss
/// or gradient but are still evaluated (with a positive clip sign) so the
/// diagnostic columns stay populated. The loss normalizer is the full
/// minibatch size; zero-advantage terms are exact zeros under that averaging.
inline MinibatchEval evaluate_minibatch(std::span<Trajectory* const> minibatch,
                                        const PolicyParams& params, const AggregationConfig& agg,
                                        const SelectorContext& base_ctx) {
  if (minibatch.empty()) throw invalid_input("empty minibatch");
  MinibatchEval eval;
  eval.grad = TableGrads::zeros_like(params);
  const double inv_m = 1.0 / static_cast<double>(minibatch.size());
  const int v = params.vocab_size;

  std::vector<std::vector<double>> logps;  // per-token log-softmax cache
  for (Trajectory* traj : minibatch) {
    const std::size_t t_len = traj->tokens.size();
    logps.resize(t_len);
    double traj_entropy = 0.0;
    int prev = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      logps[t] = log_softmax_at(params, traj->prompt_id, static_cast<int>(t), prev);
      traj->new_logprobs[t] = logps[t][static_cast<std::size_t>(traj->tokens[t])];
      for (double lp : logps[t]) traj_entropy -= std::exp(lp) * lp;
      prev = traj->tokens[t];
    }
    traj_entropy /= static_cast<double>(t_len);
    eval.entropies.push_back(traj_entropy);

    std::vector<double> deltas = token_log_deltas(*traj);
    SelectorContext ctx = base_ctx;
    ctx.length_stat = static_cast<double>(deltas.size());
    ctx.entropy_stat = traj_entropy;

    const bool degenerate = traj->advantage == 0.0;
    SurrogateResult res = effective_ratio(deltas, degenerate ? 1.0 : traj->advantage, agg, ctx);
    if (degenerate) {
      eval.degenerate.push_back(res.diagnostics);
      continue;
    }
    eval.counted.push_back(res.diagnostics);
    eval.loss += res.loss_contribution;

    // d loss / d theta = -(A/M) * sum_j g_j * grad(log pi_j)
    const double scale = -traj->advantage * inv_m;
    std::size_t j = 0;  // index into mask-selected tokens
    prev = 0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const int token = traj->tokens[t];
      if (traj->response_mask[t]) {
        const double coeff = scale * res.token_grad_weights[j];
        ++j;
        if (coeff != 0.0) {
          double* prev_row = &eval.grad.prev_token[static_cast<std::size_t>(prev) * v];
          double* pos_row = &eval.grad.position[t * static_cast<std::size_t>(v)];
          double* prompt_row = &eval.grad.prompt[static_cast<std::size_t>(traj->prompt_id) * v];
          const std::vector<double>& lp = logps[t];
          for (int a = 0; a < v; ++a) {
            // grad(log pi) row = one_hot(action) - softmax(logits)
            double g = coeff * ((a == token ? 1.0 : 0.0) - std::exp(lp[static_cast<std::size_t>(a)]));
            prev_row[a] += g;
            pos_row[a] += g;
            prompt_row[a] += g;
          }
        }
      }
      prev = token;
    }
  }
  eval.loss *= inv_m;
  double esum = 0.0;
  for (double e : eval.entropies) esum += e;
  eval.mean_entropy = esum / static_cast<double>(eval.entropies.size());
  return eval;
}

struct TrainResult {
  PolicyParams params;
  std::vector<MetricsRecord> metrics;
  bool aborted = false;
  std::string abort_reason;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

/// Outer loop: snapshot the policy, roll out a batch of groups, then run
/// inner_epochs shuffled passes of minibatch updates, re-solving p for every
/// trajectory at every optimizer step. All randomness derives from the config
/// seed, so identical configs give bit-identical metric streams.
inline TrainResult train(const TrainConfig& cfg, const MetricsSink& sink = {}) {
  cfg.validate();
  TrainResult out;
  out.params = PolicyParams::zeros(cfg.task);
  if (cfg.total_steps == 0) return out;

  AdamOptimizer adam(out.params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  EmaTracker length_ema;
  EmaTracker entropy_ema;
  length_ema.decay = entropy_ema.decay = cfg.ema_decay;
  Rng shuffle_rng(child_seed(cfg.seed, 5));

  long step = 0;
  long round = 0;
  while (step < cfg.total_steps) {
    // Round-robin prompt schedule keeps coverage even across rounds.
    std::vector<int> prompt_ids(static_cast<std::size_t>(cfg.prompts_per_batch));
    for (int i = 0; i < cfg.prompts_per_batch; ++i)
      prompt_ids[static_cast<std::size_t>(i)] = static_cast<int>(
          (round * cfg.prompts_per_batch + i) % cfg.task.num_prompts);

    const PolicyParams params_old = out.params;
    std::vector<Group> groups =
        rollout(params_old, cfg.task, prompt_ids, cfg.group_size,
                child_seed(cfg.seed, static_cast<std::uint64_t>(1000 + round)),
                cfg.advantage_std_norm);

    std::vector<Trajectory*> all;
    double reward_sum = 0.0;
    for (Group& g : groups) {
      for (Trajectory& t : g.trajectories) {
        all.push_back(&t);
        reward_sum += t.reward;
      }
    }
    const double mean_reward = reward_sum / static_cast<double>(all.size());

    for (int epoch = 0; epoch < cfg.inner_epochs && step < cfg.total_steps; ++epoch) {
      std::vector<Trajectory*> order = all;
      shuffle_rng.shuffle(order);
      for (std::size_t begin = 0; begin < order.size() && step < cfg.total_steps;
           begin += static_cast<std::size_t>(cfg.minibatch_size)) {
        std::size_t end =
            std::min(order.size(), begin + static_cast<std::size_t>(cfg.minibatch_size));
        std::span<Trajectory* const> mb(order.data() + begin, end - begin);

        SelectorContext ctx;
        ctx.length_ema = length_ema;
        ctx.entropy_ema = entropy_ema;
        ctx.step = step;
        ctx.total_steps = cfg.total_steps;
        MinibatchEval eval = evaluate_minibatch(mb, out.params, cfg.aggregation, ctx);

        double grad_norm = eval.grad.l2_norm();
        if (grad_norm > cfg.grad_norm_clip) eval.grad.scale(cfg.grad_norm_clip / grad_norm);
        if (cfg.use_adam) {
          adam.step(out.params, eval.grad);
        } else {
          for (std::size_t i = 0; i < eval.grad.prev_token.size(); ++i)
            out.params.prev_token_table[i] -= cfg.learning_rate * eval.grad.prev_token[i];
          for (std::size_t i = 0; i < eval.grad.position.size(); ++i)
            out.params.position_table[i] -= cfg.learning_rate * eval.grad.position[i];
          for (std::size_t i = 0; i < eval.grad.prompt.size(); ++i)
            out.params.prompt_table[i] -= cfg.learning_rate * eval.grad.prompt[i];
        }

        // Trackers advance only after the whole minibatch was selected.
        for (std::size_t i = 0; i < mb.size(); ++i) {
          update_ema(length_ema, static_cast<double>(mb[i]->tokens.size()));
          update_ema(entropy_ema, eval.entropies[i]);
        }

        if (!std::isfinite(eval.loss) || !std::isfinite(grad_norm) ||
            !finite_params(out.params)) {
          out.aborted = true;
          out.abort_reason = "non-finite loss or parameter at step " + std::to_string(step) +
                             " (prompt " + std::to_string(mb[0]->prompt_id) + ")";
          return out;
        }

        const std::vector<TrajectoryDiagnostics>& stats =
            eval.counted.empty() ? eval.degenerate : eval.counted;
        MetricsRecord rec =
            record(step, mean_reward, eval.mean_entropy, grad_norm, eval.loss, stats);
        out.metrics.push_back(rec);
        if (sink) sink(rec);
        ++step;
      }
    }
    ++round;
  }
  return out;
}

}  // namespace pmpo
