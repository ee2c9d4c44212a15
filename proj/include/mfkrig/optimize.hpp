#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mfkrig::optimize {

struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index size() const { return lower.size(); }
  /// Throws InvalidConfig unless sizes agree, entries are finite and lower < upper.
  void validate() const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct MinimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  int memory = 10;
  /// Stop when (f_k - f_{k+1}) <= tol * max(|f_k|, |f_{k+1}|, 1).
  double relative_reduction_tolerance = 1e-15;
};

enum class StopReason { ProjectedGradient, RelativeReduction, LineSearchFailed, MaxIterations };

struct MinimizeResult {
  Eigen::VectorXd argmin;
  double value = 0.0;
  bool converged = false;
  StopReason reason = StopReason::MaxIterations;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  /// Objective value at the start and after every accepted step.
  std::vector<double> trace;
};

/// Infinity norm of P(x - g) - x.
double projected_gradient_norm(const BoxBounds& bounds, const Eigen::VectorXd& x, const Eigen::VectorXd& g);

/// Limited-memory BFGS with gradient projection onto the box and Armijo
/// backtracking along the projected path. `converged` is set only when the
/// projected-gradient test passes. Throws ObjectiveNonFinite when the
/// objective is not finite at the (projected) start.
MinimizeResult minimize_box(const Objective& objective, const BoxBounds& bounds, const Eigen::VectorXd& start,
                            const MinimizeOptions& options = {});

struct MultiStartConfig {
  int n_starts = 10;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct StartRecord {
  Eigen::VectorXd start;
  bool failed = false;
  std::string error;
  MinimizeResult result;
};

struct MultiStartResult {
  Eigen::VectorXd argmin;
  double value = 0.0;
  std::size_t best_index = 0;
  std::vector<StartRecord> log;
};

/// Runs minimize_box from every point in `extra_starts` (projected onto the
/// box) followed by `config.n_starts` points drawn uniformly in the box from
/// the seeded generator. Callers optimizing in log-space get log-uniform
/// starts in the original parameters. Ties go to the lowest start index.
/// Throws AllStartsFailed if every start raised ObjectiveNonFinite.
MultiStartResult multi_start_minimize(const Objective& objective, const BoxBounds& bounds,
                                      const MultiStartConfig& config,
                                      std::span<const Eigen::VectorXd> extra_starts = {});

}  // namespace mfkrig::optimize
