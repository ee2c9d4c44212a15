#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mfkrig/kernels.hpp"
#include "mfkrig/numerics.hpp"
#include "mfkrig/optimize.hpp"
#include "mfkrig/types.hpp"

namespace mfkrig::gp {

using FeatureMap = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

/// Ordered feature maps f_1..f_p of the linear prior mean f(x)^T beta.
struct BasisSpec {
  std::string name;
  std::vector<FeatureMap> functions;

  Eigen::Index size() const { return static_cast<Eigen::Index>(functions.size()); }
  Eigen::MatrixXd design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// The single constant-one function.
  static BasisSpec constant();
  /// (1, x_1, ..., x_dim).
  static BasisSpec linear(Eigen::Index dim);
  /// Rebuilds a named basis ("constant" or "linear"); throws InvalidConfig otherwise.
  static BasisSpec from_name(const std::string& name, Eigen::Index dim);
};

struct GpHyper {
  Eigen::VectorXd beta;
  kernels::KernelParams kernel;
};

/// Search box for (theta, eta) in their natural units. A parameter whose
/// lower and upper bounds coincide is pinned and not optimized; this is how a
/// noise-free fit sets eta = 0.
struct HyperBounds {
  Eigen::VectorXd theta_lower;
  Eigen::VectorXd theta_upper;
  double eta_lower = 1e-8;
  double eta_upper = 1e2;

  /// theta_d in [1e-3, 1e3] x range of column d (range 0 counts as 1), eta in [1e-8, 1e2].
  static HyperBounds defaults_for(const Eigen::Ref<const Eigen::MatrixXd>& x);
  void validate(Eigen::Index dim) const;
};

struct FitLog {
  optimize::MultiStartResult search;
  double final_nll = 0.0;
};

struct TrainedGp {
  Dataset data;
  BasisSpec basis;
  GpHyper hyper;
  numerics::SpdFactorization factorization;  // of R(theta) + eta I
  Eigen::VectorXd residual_solve;            // (R + eta I)^{-1} (z - F beta)
  FitLog fit_log;

  double noise_variance() const { return hyper.kernel.noise_variance(); }
};

struct ProfiledEstimates {
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
};

/// Closed-form GLS beta and sigma2 at fixed (theta, eta).
/// Throws RankDeficientBasis or FactorizationFailure.
ProfiledEstimates profiled_estimates(const Dataset& data, const BasisSpec& basis, const kernels::LengthScales& theta,
                                     double eta);

struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd gradient;  // over (theta_1..theta_D, eta), natural units
};

/// Negated profiled log-likelihood and its gradient. Returns +inf (with a zero
/// gradient) when the profiled sigma2 underflows below 1e-300.
ObjectiveValue profiled_nll_and_grad(const Dataset& data, const BasisSpec& basis, const kernels::LengthScales& theta,
                                     double eta);

/// Multi-start maximum likelihood over (theta, eta) in log-space.
TrainedGp fit_gp(const Dataset& data, const BasisSpec& basis, const HyperBounds& bounds,
                 const optimize::MultiStartConfig& config);

/// Builds the cached factorization and residual solve for fixed hyperparameters.
TrainedGp make_trained_gp(Dataset data, BasisSpec basis, GpHyper hyper);

/// Kriging equations at x_star. Noisy mode adds eta * sigma2 to the diagonal.
PredictiveDistribution predict_gp(const TrainedGp& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star,
                                  NoiseMode mode = NoiseMode::latent, CovMode cov = CovMode::diagonal);

/// Posterior mean of the latent process at the rows of x.
Eigen::VectorXd posterior_mean(const TrainedGp& model, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// Posterior latent covariance v(a_i, b_j) between two sets of points.
Eigen::MatrixXd posterior_cross_cov(const TrainedGp& model, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                    const Eigen::Ref<const Eigen::MatrixXd>& b);

}  // namespace mfkrig::gp
