#include "mfkrig/metrics.hpp"

#include <cmath>
#include <string>

#include "mfkrig/error.hpp"

namespace mfkrig::metrics {

double q2(const Eigen::Ref<const Eigen::VectorXd>& y_true, const Eigen::Ref<const Eigen::VectorXd>& mean_pred) {
  if (y_true.size() != mean_pred.size()) throw Error(ErrorCode::DimensionMismatch, "q2 inputs differ in length");
  if (y_true.size() < 2) throw Error(ErrorCode::ConstantTruth, "q2 needs at least two test points");
  const double sst = (y_true.array() - y_true.mean()).square().sum();
  if (!(sst > 0.0)) throw Error(ErrorCode::ConstantTruth, "test outputs are constant");
  const double sse = (y_true - mean_pred).squaredNorm();
  return 1.0 - sse / sst;
}

double gauss_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gauss_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::DomainViolation, "probability must lie in (0, 1)");
  // Acklam's rational approximation (relative error ~1e-9), then one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = gauss_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

Eigen::VectorXd default_alpha_grid() {
  Eigen::VectorXd g(99);
  for (int k = 0; k < 99; ++k) g[k] = (k + 1) / 100.0;
  return g;
}

double integral_absolute_error(const Eigen::Ref<const Eigen::VectorXd>& alpha_grid,
                               const Eigen::Ref<const Eigen::VectorXd>& coverage) {
  if (alpha_grid.size() == 0) throw Error(ErrorCode::EmptyGrid, "alpha grid is empty");
  if (coverage.size() != alpha_grid.size()) throw Error(ErrorCode::DimensionMismatch, "coverage/grid size mismatch");
  double total = 0.0;
  for (Eigen::Index k = 1; k < alpha_grid.size(); ++k) {
    const double left = std::abs(coverage[k - 1] - alpha_grid[k - 1]);
    const double right = std::abs(coverage[k] - alpha_grid[k]);
    total += 0.5 * (left + right) * (alpha_grid[k] - alpha_grid[k - 1]);
  }
  return total;
}

CalibrationReport coverage_report(const Eigen::Ref<const Eigen::VectorXd>& y_true,
                                  const Eigen::Ref<const Eigen::VectorXd>& z_noisy,
                                  const Eigen::Ref<const Eigen::VectorXd>& mean_pred,
                                  const Eigen::Ref<const Eigen::VectorXd>& latent_sd, double noise_variance_hat,
                                  const Eigen::Ref<const Eigen::VectorXd>& alpha_grid) {
  const Eigen::Index n = y_true.size();
  if (alpha_grid.size() == 0) throw Error(ErrorCode::EmptyGrid, "alpha grid is empty");
  if (z_noisy.size() != n || mean_pred.size() != n || latent_sd.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "coverage inputs differ in length");
  }
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "no test points");
  if ((latent_sd.array() < 0.0).any()) throw Error(ErrorCode::DomainViolation, "negative predictive sd");
  if (!(noise_variance_hat >= 0.0)) throw Error(ErrorCode::DomainViolation, "negative noise variance");
  for (Eigen::Index k = 0; k < alpha_grid.size(); ++k) {
    if (!(alpha_grid[k] > 0.0 && alpha_grid[k] < 1.0) || (k > 0 && !(alpha_grid[k] > alpha_grid[k - 1]))) {
      throw Error(ErrorCode::DomainViolation, "alpha grid must be strictly increasing inside (0, 1)");
    }
  }

  const Eigen::Index levels = alpha_grid.size();
  CalibrationReport rep;
  rep.alpha_grid = alpha_grid;
  rep.cicp.resize(levels);
  rep.picp.resize(levels);
  rep.ciw.resize(levels);
  rep.piw.resize(levels);

  const Eigen::ArrayXd ci_dev = (y_true - mean_pred).array().abs();
  const Eigen::ArrayXd pi_dev = (z_noisy - mean_pred).array().abs();
  const Eigen::ArrayXd ci_sd = latent_sd.array();
  const Eigen::ArrayXd pi_sd = (ci_sd.square() + noise_variance_hat).sqrt();
  const double nd = static_cast<double>(n);
  for (Eigen::Index k = 0; k < levels; ++k) {
    const double phi = gauss_quantile(0.5 * (1.0 + alpha_grid[k]));
    rep.cicp[k] = static_cast<double>((ci_dev <= phi * ci_sd).count()) / nd;
    rep.picp[k] = static_cast<double>((pi_dev <= phi * pi_sd).count()) / nd;
    rep.ciw[k] = 2.0 * phi * ci_sd.mean();
    rep.piw[k] = 2.0 * phi * pi_sd.mean();
  }
  rep.iae_ci = integral_absolute_error(alpha_grid, rep.cicp);
  rep.iae_pi = integral_absolute_error(alpha_grid, rep.picp);
  rep.q2 = n >= 2 && (y_true.array() != y_true[0]).any() ? q2(y_true, mean_pred) : std::nan("");
  return rep;
}

}  // namespace mfkrig::metrics
