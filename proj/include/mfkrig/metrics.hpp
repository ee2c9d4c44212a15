#pragma once

#include <Eigen/Dense>

namespace mfkrig::metrics {

struct CalibrationReport {
  Eigen::VectorXd alpha_grid;
  Eigen::VectorXd cicp;
  Eigen::VectorXd picp;
  Eigen::VectorXd ciw;
  Eigen::VectorXd piw;
  double iae_ci = 0.0;
  double iae_pi = 0.0;
  double q2 = 0.0;
};

/// 1 - SSE / SST with SST taken about the mean of y_true. Throws ConstantTruth.
double q2(const Eigen::Ref<const Eigen::VectorXd>& y_true, const Eigen::Ref<const Eigen::VectorXd>& mean_pred);

/// Standard normal CDF.
double gauss_cdf(double x);

/// Inverse standard normal CDF; throws DomainViolation outside (0, 1).
double gauss_quantile(double p);

/// 99 equispaced levels 0.01, 0.02, ..., 0.99.
Eigen::VectorXd default_alpha_grid();

/// Trapezoidal integral of |coverage - alpha| over the grid points only.
double integral_absolute_error(const Eigen::Ref<const Eigen::VectorXd>& alpha_grid,
                               const Eigen::Ref<const Eigen::VectorXd>& coverage);

/// Coverage probabilities and mean widths of the level-alpha confidence
/// intervals (on y_true) and prediction intervals (on z_noisy, widened by the
/// estimated noise variance). Intervals are closed. Throws EmptyGrid.
CalibrationReport coverage_report(const Eigen::Ref<const Eigen::VectorXd>& y_true,
                                  const Eigen::Ref<const Eigen::VectorXd>& z_noisy,
                                  const Eigen::Ref<const Eigen::VectorXd>& mean_pred,
                                  const Eigen::Ref<const Eigen::VectorXd>& latent_sd, double noise_variance_hat,
                                  const Eigen::Ref<const Eigen::VectorXd>& alpha_grid);

}  // namespace mfkrig::metrics
