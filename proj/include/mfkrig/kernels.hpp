#pragma once

#include <Eigen/Dense>

namespace mfkrig::kernels {

/// One strictly positive length scale per input dimension.
class LengthScales {
 public:
  LengthScales() = default;
  explicit LengthScales(Eigen::VectorXd theta);

  const Eigen::VectorXd& values() const { return theta_; }
  Eigen::Index size() const { return theta_.size(); }
  double operator[](Eigen::Index d) const { return theta_[d]; }

 private:
  Eigen::VectorXd theta_;
};

/// Kernel variance sigma2 and noise ratio eta = noise variance / sigma2.
struct KernelParams {
  LengthScales theta;
  double sigma2 = 1.0;
  double eta = 0.0;

  double noise_variance() const { return eta * sigma2; }
  void validate() const;
};

/// Gaussian (squared-exponential) ARD correlation, exp(-1/2 sum_d ((x_d - x2_d)/theta_d)^2).
double gauss_corr(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& x2,
                  const LengthScales& theta);

/// Cross-correlation matrix between the rows of x (N x D) and x2 (M x D).
Eigen::MatrixXd corr_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& x2,
                            const LengthScales& theta);

/// Symmetric correlation matrix of one design, exactly unit diagonal.
Eigen::MatrixXd corr_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x, const LengthScales& theta);

/// d R / d theta_d for the design x; entry (i,j) = R_ij (x_id - x_jd)^2 / theta_d^3.
Eigen::MatrixXd corr_matrix_grad(const Eigen::Ref<const Eigen::MatrixXd>& x, const LengthScales& theta, Eigen::Index d);

/// Same, reusing an already computed correlation matrix of x.
Eigen::MatrixXd corr_matrix_grad(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& r,
                                 const LengthScales& theta, Eigen::Index d);

}  // namespace mfkrig::kernels
