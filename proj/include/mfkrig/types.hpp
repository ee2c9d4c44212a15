#pragma once

#include <Eigen/Dense>

namespace mfkrig {

enum class Fidelity { LF, HF };
enum class NoiseMode { latent, noisy };
enum class CovMode { full, diagonal };

/// Inputs (N x D) paired with noisy outputs (N).
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd z;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
  /// Throws DimensionMismatch when row counts differ, DomainViolation on non-finite entries.
  void validate() const;
};

/// Posterior mean plus either the full covariance or only its diagonal.
struct PredictiveDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd cov;  // empty in diagonal mode

  bool has_full_cov() const { return cov.size() > 0; }
  Eigen::VectorXd sd() const { return variance.cwiseSqrt(); }
};

}  // namespace mfkrig
