#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "pmpo/errors.hpp"
#include "pmpo/train.hpp"

namespace pmpo {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw invalid_input("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long x = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw invalid_input("config key '" + key + "' expects an integer, got '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw invalid_input("config key '" + key + "' expects true/false, got '" + value + "'");
}

inline std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

/// Apply one key/value pair onto a TrainConfig. Unknown keys are an error and
/// name the offending key.
inline void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_long;
  if (key == "task") cfg.task.kind = task_from_string(value);
  else if (key == "vocab_size") cfg.task.vocab_size = static_cast<int>(parse_long(key, value));
  else if (key == "episode_length") cfg.task.episode_length = static_cast<int>(parse_long(key, value));
  else if (key == "num_prompts") cfg.task.num_prompts = static_cast<int>(parse_long(key, value));
  else if (key == "task_seed") cfg.task.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "group_size") cfg.group_size = static_cast<int>(parse_long(key, value));
  else if (key == "prompts_per_batch") cfg.prompts_per_batch = static_cast<int>(parse_long(key, value));
  else if (key == "inner_epochs") cfg.inner_epochs = static_cast<int>(parse_long(key, value));
  else if (key == "minibatch_size") cfg.minibatch_size = static_cast<int>(parse_long(key, value));
  else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
  else if (key == "adam_beta1") cfg.adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = parse_double(key, value);
  else if (key == "grad_norm_clip") cfg.grad_norm_clip = parse_double(key, value);
  else if (key == "total_steps") cfg.total_steps = parse_long(key, value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "optimizer") {
    if (value == "adam") cfg.use_adam = true;
    else if (value == "sgd") cfg.use_adam = false;
    else throw invalid_input("config key 'optimizer' expects adam or sgd, got '" + value + "'");
  }
  else if (key == "advantage_std_norm") cfg.advantage_std_norm = parse_bool(key, value);
  else if (key == "ema_decay") cfg.ema_decay = parse_double(key, value);
  else if (key == "geometry") cfg.aggregation.geometry.kind = geometry_from_string(value);
  else if (key == "p_fixed") cfg.aggregation.geometry.p_fixed = parse_double(key, value);
  else if (key == "clip_mode") cfg.aggregation.clip.mode = clip_mode_from_string(value);
  else if (key == "clip_c") cfg.aggregation.clip.c = parse_double(key, value);
  else if (key == "eps_ess") cfg.aggregation.clip.eps_ess = parse_double(key, value);
  else if (key == "p_min") cfg.aggregation.bounds.p_min = parse_double(key, value);
  else if (key == "p_max") cfg.aggregation.bounds.p_max = parse_double(key, value);
  else if (key == "solver_tol") cfg.aggregation.solver.tol = parse_double(key, value);
  else if (key == "solver_max_iter") cfg.aggregation.solver.max_iter = static_cast<int>(parse_long(key, value));
  else if (key == "length_normalized") cfg.aggregation.length_normalized = parse_bool(key, value);
  else if (key == "heuristic_alpha") cfg.aggregation.heuristic.alpha = parse_double(key, value);
  else if (key == "heuristic_warmup") cfg.aggregation.heuristic.warmup_steps = parse_long(key, value);
  else if (key == "variance_floor") cfg.aggregation.heuristic.variance_floor = parse_double(key, value);
  else throw invalid_input("unknown config key '" + key + "'");
}

/// Parse flat `key = value` text. '#' starts a comment; blank lines ignored.
inline TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw invalid_input("config line " + std::to_string(lineno) + " is not 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    apply_config_key(cfg, key, value);
  }
  return cfg;
}

inline TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical flat text of a resolved config, fixed key order.
inline std::string format_config(const TrainConfig& cfg) {
  using detail::fmt_num;
  std::ostringstream out;
  out << "task = " << to_string(cfg.task.kind) << '\n';
  out << "vocab_size = " << cfg.task.vocab_size << '\n';
  out << "episode_length = " << cfg.task.episode_length << '\n';
  out << "num_prompts = " << cfg.task.num_prompts << '\n';
  out << "task_seed = " << cfg.task.seed << '\n';
  out << "group_size = " << cfg.group_size << '\n';
  out << "prompts_per_batch = " << cfg.prompts_per_batch << '\n';
  out << "inner_epochs = " << cfg.inner_epochs << '\n';
  out << "minibatch_size = " << cfg.minibatch_size << '\n';
  out << "learning_rate = " << fmt_num(cfg.learning_rate) << '\n';
  out << "adam_beta1 = " << fmt_num(cfg.adam_beta1) << '\n';
  out << "adam_beta2 = " << fmt_num(cfg.adam_beta2) << '\n';
  out << "grad_norm_clip = " << fmt_num(cfg.grad_norm_clip) << '\n';
  out << "total_steps = " << cfg.total_steps << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "optimizer = " << (cfg.use_adam ? "adam" : "sgd") << '\n';
  out << "advantage_std_norm = " << (cfg.advantage_std_norm ? "true" : "false") << '\n';
  out << "ema_decay = " << fmt_num(cfg.ema_decay) << '\n';
  out << "geometry = " << to_string(cfg.aggregation.geometry.kind) << '\n';
  out << "p_fixed = " << fmt_num(cfg.aggregation.geometry.p_fixed) << '\n';
  out << "clip_mode = " << to_string(cfg.aggregation.clip.mode) << '\n';
  out << "clip_c = " << fmt_num(cfg.aggregation.clip.c) << '\n';
  out << "eps_ess = " << fmt_num(cfg.aggregation.clip.eps_ess) << '\n';
  out << "p_min = " << fmt_num(cfg.aggregation.bounds.p_min) << '\n';
  out << "p_max = " << fmt_num(cfg.aggregation.bounds.p_max) << '\n';
  out << "solver_tol = " << fmt_num(cfg.aggregation.solver.tol) << '\n';
  out << "solver_max_iter = " << cfg.aggregation.solver.max_iter << '\n';
  out << "length_normalized = " << (cfg.aggregation.length_normalized ? "true" : "false") << '\n';
  out << "heuristic_alpha = " << fmt_num(cfg.aggregation.heuristic.alpha) << '\n';
  out << "heuristic_warmup = " << cfg.aggregation.heuristic.warmup_steps << '\n';
  out << "variance_floor = " << fmt_num(cfg.aggregation.heuristic.variance_floor) << '\n';
  return out.str();
}

/// Git-style content hash: SHA-1 over "blob <len>\0<content>".
inline std::string git_blob_sha1(const std::string& content) {
  std::string framed = "blob " + std::to_string(content.size());
  framed.push_back('\0');
  framed += content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(framed.data(), framed.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw io_error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

/// Run manifest: resolved config, seed, content hash, and the CLI overrides
/// that were applied on top of the file.
inline void write_manifest(const TrainConfig& cfg,
                           const std::vector<std::pair<std::string, std::string>>& overrides,
                           const std::string& path, bool aborted = false,
                           const std::string& abort_reason = "") {
  std::string resolved = format_config(cfg);
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["config_hash"] = git_blob_sha1(resolved);
  nlohmann::ordered_json ov = nlohmann::ordered_json::object();
  for (const auto& [k, v] : overrides) ov[k] = v;
  j["overrides"] = ov;
  j["aborted"] = aborted;
  if (aborted) j["abort_reason"] = abort_reason;
  j["config"] = resolved;
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for write: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace pmpo
