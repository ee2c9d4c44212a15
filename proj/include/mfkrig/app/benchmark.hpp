#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfkrig/metrics.hpp"

namespace mfkrig::app {

struct BenchmarkConfig {
  std::string benchmark = "analytic1d";  // analytic1d | park4d
  int n_lf = 100;
  int n_hf = 50;
  double noise_sd_lf = 0.0;
  double noise_sd_hf = 0.166;
  int n_test = 10000;
  int n_replications = 50;
  std::uint64_t seed = 0;
  std::vector<std::string> models{"mf", "hf_only"};  // subset of mf, hf_only, lf_only
  std::string output_path;                           // results CSV; empty skips writing
  std::string curves_path;                           // optional per-alpha coverage CSV
  int n_starts = 10;                                 // multi-start count for every fit
  int maximin_restarts = 100;                        // park4d designs
  double theta_lower_factor = 1e-3;                  // theta lower bound = factor x input range
  int threads = 0;                                   // 0: MFKRIG_THREADS or hardware concurrency

  void validate() const;
};

/// Reads a JSON object; absent keys keep their defaults. Throws InvalidConfig.
BenchmarkConfig benchmark_config_from_json(const std::string& text);

struct ResultsRow {
  int replication_index = 0;
  std::string model_name;
  double q2 = 0.0;
  double iae_ci = 0.0;
  double iae_pi = 0.0;
  double ciw_95 = 0.0;
  double piw_95 = 0.0;
  double noise_var_hat_lf = 0.0;  // NaN when the model has no LF level
  double noise_var_hat_hf = 0.0;  // NaN when the model has no HF level
  double fit_seconds = 0.0;
  bool failed = false;
  std::string error;

  // Kept in memory only.
  std::optional<metrics::CalibrationReport> report;
  std::vector<double> em_log;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  std::vector<ResultsRow> rows;  // replication-major, models in config order
};

/// Runs all replications on a worker pool; output order does not depend on scheduling.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

/// Worker count: config.threads, else MFKRIG_THREADS, else hardware concurrency.
int resolve_threads(int configured);

std::string format_results_csv(const BenchmarkResult& result);
std::string format_curves_csv(const BenchmarkResult& result);

/// Runs and writes output_path / curves_path when set.
BenchmarkResult run_benchmark_to_files(const BenchmarkConfig& config);

}  // namespace mfkrig::app
