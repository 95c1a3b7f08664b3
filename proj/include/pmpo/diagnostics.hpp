#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pmpo/errors.hpp"
#include "pmpo/surrogate.hpp"

namespace pmpo {

/// One training-step row. Field order here is the serialized column order.
struct MetricsRecord {
  long step = 0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  double grad_norm = 0.0;
  double p_mean = 0.0;
  double p_max = 0.0;
  double f_clip_mean = 0.0;
  double target_ess_mean = 0.0;
  double achieved_ess_mean = 0.0;
  double delta_abs_mean = 0.0;
  double ratio_max = 0.0;
  double loss = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

inline constexpr std::array<const char*, 12> kMetricsFields = {
    "step",           "mean_reward",     "mean_entropy",      "grad_norm",
    "p_mean",         "p_max",           "f_clip_mean",       "target_ess_mean",
    "achieved_ess_mean", "delta_abs_mean", "ratio_max",        "loss",
};

/// Aggregate per-trajectory diagnostics into one step row: arithmetic means,
/// except p_max and ratio_max which take the batch maximum.
inline MetricsRecord record(long step, double mean_reward, double mean_entropy, double grad_norm,
                            double loss, std::span<const TrajectoryDiagnostics> batch) {
  if (batch.empty()) throw invalid_input("metrics record needs a non-empty batch");
  MetricsRecord r;
  r.step = step;
  r.mean_reward = mean_reward;
  r.mean_entropy = mean_entropy;
  r.grad_norm = grad_norm;
  r.loss = loss;
  r.p_max = batch[0].selection.p;
  r.ratio_max = batch[0].ratio_max;
  for (const TrajectoryDiagnostics& d : batch) {
    r.p_mean += d.selection.p;
    r.p_max = std::max(r.p_max, d.selection.p);
    r.f_clip_mean += d.selection.f_clip;
    r.target_ess_mean += d.selection.target_ess;
    r.achieved_ess_mean += d.selection.achieved_ess;
    r.delta_abs_mean += d.delta_abs_mean;
    r.ratio_max = std::max(r.ratio_max, d.ratio_max);
  }
  const double k = static_cast<double>(batch.size());
  r.p_mean /= k;
  r.f_clip_mean /= k;
  r.target_ess_mean /= k;
  r.achieved_ess_mean /= k;
  r.delta_abs_mean /= k;
  return r;
}

namespace detail {

/// 17 significant digits: enough for exact double round-trips, so determinism
/// checks can compare files byte-wise.
inline std::string fmt_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::array<double, 11> metric_values(const MetricsRecord& r) {
  return {r.mean_reward,      r.mean_entropy,   r.grad_norm, r.p_mean,
          r.p_max,            r.f_clip_mean,    r.target_ess_mean,
          r.achieved_ess_mean, r.delta_abs_mean, r.ratio_max, r.loss};
}

}  // namespace detail

inline std::string metrics_csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kMetricsFields.size(); ++i) {
    if (i) h += ',';
    h += kMetricsFields[i];
  }
  return h;
}

inline void write_csv(std::span<const MetricsRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for write: " + path);
  out << metrics_csv_header() << '\n';
  for (const MetricsRecord& r : records) {
    out << r.step;
    for (double v : detail::metric_values(r)) out << ',' << detail::fmt_g17(v);
    out << '\n';
  }
  if (!out) throw io_error("write failed: " + path);
}

inline void write_jsonl(std::span<const MetricsRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for write: " + path);
  for (const MetricsRecord& r : records) {
    out << "{\"step\":" << r.step;
    auto vals = detail::metric_values(r);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      out << ",\"" << kMetricsFields[i + 1] << "\":";
      if (std::isfinite(vals[i])) {
        out << detail::fmt_g17(vals[i]);
      } else {
        out << "null";  // JSON has no NaN/inf literal
      }
    }
    out << "}\n";
  }
  if (!out) throw io_error("write failed: " + path);
}

inline void write_sink(std::span<const MetricsRecord> records, const std::string& format,
                       const std::string& path) {
  if (format == "csv") {
    write_csv(records, path);
  } else if (format == "jsonl") {
    write_jsonl(records, path);
  } else {
    throw invalid_input("unknown sink format '" + format + "'");
  }
}

inline std::vector<MetricsRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for read: " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty metrics file: " + path);
  if (line != metrics_csv_header()) throw io_error("unexpected CSV header in " + path);
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() != kMetricsFields.size()) throw io_error("bad CSV row in " + path);
    MetricsRecord r;
    r.step = static_cast<long>(vals[0]);
    r.mean_reward = vals[1];
    r.mean_entropy = vals[2];
    r.grad_norm = vals[3];
    r.p_mean = vals[4];
    r.p_max = vals[5];
    r.f_clip_mean = vals[6];
    r.target_ess_mean = vals[7];
    r.achieved_ess_mean = vals[8];
    r.delta_abs_mean = vals[9];
    r.ratio_max = vals[10];
    r.loss = vals[11];
    records.push_back(r);
  }
  return records;
}

inline std::vector<MetricsRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for read: " + path);
  std::vector<MetricsRecord> records;
  std::string line;
  auto get = [](const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::nan("") : v.get<double>();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    MetricsRecord r;
    r.step = j.at("step").get<long>();
    r.mean_reward = get(j, "mean_reward");
    r.mean_entropy = get(j, "mean_entropy");
    r.grad_norm = get(j, "grad_norm");
    r.p_mean = get(j, "p_mean");
    r.p_max = get(j, "p_max");
    r.f_clip_mean = get(j, "f_clip_mean");
    r.target_ess_mean = get(j, "target_ess_mean");
    r.achieved_ess_mean = get(j, "achieved_ess_mean");
    r.delta_abs_mean = get(j, "delta_abs_mean");
    r.ratio_max = get(j, "ratio_max");
    r.loss = get(j, "loss");
    records.push_back(r);
  }
  return records;
}

}  // namespace pmpo
