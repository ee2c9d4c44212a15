#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mfkrig::numerics {

/// Cholesky factor of (M + jitter_used * I).
struct SpdFactorization {
  Eigen::MatrixXd lower_factor;
  double jitter_used = 0.0;

  Eigen::Index size() const { return lower_factor.rows(); }
};

/// Multipliers of mean(diag(M)) tried, in order, after the bare factorization fails.
struct JitterPolicy {
  std::vector<double> relative_levels{1e-10, 1e-8, 1e-6};

  static JitterPolicy none() { return JitterPolicy{{}}; }
};

/// Throws NotSymmetric or NotPositiveDefinite (after the last jitter level).
SpdFactorization chol_factor(const Eigen::Ref<const Eigen::MatrixXd>& m,
                             const JitterPolicy& policy = JitterPolicy{});

/// Solves (M + jitter I) X = B.
Eigen::MatrixXd solve_spd(const SpdFactorization& f, const Eigen::MatrixXd& b);
Eigen::VectorXd solve_spd(const SpdFactorization& f, const Eigen::VectorXd& b);

/// Solves M x = b (without the jitter) by iterative refinement preconditioned
/// with the factor of M + jitter I. Returns the iterate with the smallest
/// residual; a plain solve when no jitter was needed.
Eigen::VectorXd refined_solve(const Eigen::Ref<const Eigen::MatrixXd>& m, const SpdFactorization& f,
                              const Eigen::VectorXd& b, int max_sweeps = 200);

/// L^{-1} B, the half solve used for quadratic forms and predictive variances.
Eigen::MatrixXd solve_lower(const SpdFactorization& f, const Eigen::Ref<const Eigen::MatrixXd>& b);

/// (M + jitter I)^{-1}, formed from the factor. Only for Hadamard-product terms
/// where the individual entries of the inverse are needed.
Eigen::MatrixXd inverse_spd(const SpdFactorization& f);

double logdet_spd(const SpdFactorization& f);

/// Records the largest matrix dimension passed to chol_factor on the current
/// thread while the tracker is alive. Trackers nest; each sees every
/// factorization made during its own lifetime.
class FactorizationTracker {
 public:
  FactorizationTracker();
  ~FactorizationTracker();
  FactorizationTracker(const FactorizationTracker&) = delete;
  FactorizationTracker& operator=(const FactorizationTracker&) = delete;

  Eigen::Index peak_dimension() const { return peak_; }
  long count() const { return count_; }

 private:
  friend void note_factorization(Eigen::Index n);
  FactorizationTracker* parent_;
  Eigen::Index peak_ = 0;
  long count_ = 0;
};

void note_factorization(Eigen::Index n);

}  // namespace mfkrig::numerics
