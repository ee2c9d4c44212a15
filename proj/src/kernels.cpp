#include "mfkrig/kernels.hpp"

#include <cmath>
#include <string>

#include "mfkrig/error.hpp"

namespace mfkrig::kernels {

LengthScales::LengthScales(Eigen::VectorXd theta) : theta_(std::move(theta)) {
  if (theta_.size() == 0) throw Error(ErrorCode::DomainViolation, "length scales are empty");
  for (Eigen::Index d = 0; d < theta_.size(); ++d) {
    if (!(theta_[d] > 0.0) || !std::isfinite(theta_[d])) {
      throw Error(ErrorCode::DomainViolation, "length scale " + std::to_string(d) + " is not positive");
    }
  }
}

void KernelParams::validate() const {
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::DomainViolation, "sigma2 must be positive");
  if (!(eta >= 0.0)) throw Error(ErrorCode::DomainViolation, "eta must be non-negative");
}

namespace {

void check_dims(Eigen::Index a, Eigen::Index b, const LengthScales& theta) {
  if (a != b || a != theta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "input dimensions " + std::to_string(a) + ", " + std::to_string(b) +
                                                  " vs " + std::to_string(theta.size()) + " length scales");
  }
}

}  // namespace

double gauss_corr(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& x2,
                  const LengthScales& theta) {
  check_dims(x.size(), x2.size(), theta);
  double s = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double h = (x[d] - x2[d]) * (1.0 / theta[d]);
    s += h * h;
  }
  return std::exp(-0.5 * s);
}

Eigen::MatrixXd corr_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& x2,
                            const LengthScales& theta) {
  check_dims(x.cols(), x2.cols(), theta);
  const Eigen::Index n = x.rows();
  const Eigen::Index m = x2.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const double inv = 1.0 / theta[d];
    for (Eigen::Index j = 0; j < m; ++j) {
      const double b = x2(j, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double h = (x(i, d) - b) * inv;
        out(i, j) += h * h;
      }
    }
  }
  return (-0.5 * out.array()).exp().matrix();
}

Eigen::MatrixXd corr_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x, const LengthScales& theta) {
  check_dims(x.cols(), x.cols(), theta);
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < x.cols(); ++d) {
        const double h = (x(i, d) - x(j, d)) * (1.0 / theta[d]);
        s += h * h;
      }
      out(i, j) = out(j, i) = std::exp(-0.5 * s);
    }
  }
  return out;
}

Eigen::MatrixXd corr_matrix_grad(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                 const LengthScales& theta, Eigen::Index d) {
  if (d < 0 || d >= theta.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "dimension " + std::to_string(d) + " of " + std::to_string(theta.size()));
  }
  check_dims(x.cols(), x.cols(), theta);
  const Eigen::Index n = x.rows();
  const double inv_cube = 1.0 / (theta[d] * theta[d] * theta[d]);
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double h = x(i, d) - x(j, d);
      out(i, j) = out(j, i) = r(i, j) * h * h * inv_cube;
    }
  }
  return out;
}

Eigen::MatrixXd corr_matrix_grad(const Eigen::Ref<const Eigen::MatrixXd>& x, const LengthScales& theta, Eigen::Index d) {
  if (d < 0 || d >= theta.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "dimension " + std::to_string(d) + " of " + std::to_string(theta.size()));
  }
  return corr_matrix_grad(x, corr_matrix(x, theta), theta, d);
}

}  // namespace mfkrig::kernels
