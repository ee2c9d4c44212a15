#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mfkrig/gp.hpp"
#include "mfkrig/kernels.hpp"
#include "mfkrig/numerics.hpp"
#include "mfkrig/optimize.hpp"
#include "mfkrig/types.hpp"

namespace mfkrig::mfgp {

struct MfData {
  Dataset lf;
  Dataset hf;

  Eigen::Index dim() const { return lf.dim(); }
  void validate() const;
};

// HF parameters of the AR(1) recursion: rho(x) = g(x)^T beta_rho and the
// discrepancy GP with mean f_H(x)^T beta_h.
struct HfParams {
  Eigen::VectorXd beta_rho;
  Eigen::VectorXd beta_h;
  double sigma2_h = 1.0;
  kernels::LengthScales theta_h;
  double eta_h = 0.0;

  double noise_variance() const { return eta_h * sigma2_h; }
};

struct EStepState {
  Eigen::MatrixXd sigma_yz;
  Eigen::MatrixXd sigma_zz;
  Eigen::VectorXd mu_y_given_z;
  Eigen::MatrixXd sigma_y_given_z;
  Eigen::MatrixXd h_matrix;  // [G scaled row-wise by mu_y_given_z, F_H]
  Eigen::MatrixXd g_matrix;
  Eigen::VectorXd lf_mean_at_hf;
  Eigen::MatrixXd lf_cov_at_hf;
};

struct MfModel {
  gp::TrainedGp lf_model;
  Dataset hf_data;
  HfParams hf_params;
  gp::BasisSpec hf_basis;
  gp::BasisSpec rho_basis;
  std::vector<double> em_log;

  numerics::SpdFactorization sigma_factorization;  // of K_AR + sigma2_eps_H I at the HF inputs
  Eigen::VectorXd residual_solve;                  // (K_AR + sigma2_eps_H I)^{-1} (z_H - m_AR)
  Eigen::Index fit_peak_factorization = 0;         // largest factorization seen while fitting
};

/// LF latent posterior mean and full covariance at x.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> lf_posterior_moments(const gp::TrainedGp& lf_model,
                                                                  const Eigen::Ref<const Eigen::MatrixXd>& x);

struct ArMoments {
  Eigen::VectorXd m_ar;      // at x_star
  Eigen::MatrixXd k_cross;   // M x N_H
  Eigen::MatrixXd k_train;   // N_H x N_H, without noise
};

ArMoments ar_moments(const MfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star);

EStepState e_step(const MfData& data, const gp::TrainedGp& lf_model, const HfParams& params,
                  const gp::BasisSpec& hf_basis, const gp::BasisSpec& rho_basis);

struct MStepEstimates {
  Eigen::VectorXd beta_rho_h;  // (beta_rho, beta_h) stacked
  double sigma2_h = 0.0;
};

/// Closed-form beta and sigma2 updates at fixed (theta_h, eta_h).
/// Throws SingularNormalEquations.
MStepEstimates m_step_closed_forms(const EStepState& state, const MfData& data, const kernels::LengthScales& theta_h,
                                   double eta_h);

/// Negated profiled EM surrogate and its gradient over (theta_h, eta_h) in natural units.
gp::ObjectiveValue q_tilde_and_grad(const EStepState& state, const MfData& data, const kernels::LengthScales& theta_h,
                                    double eta_h);

/// Exact log-density of z_H under the AR(1) marginal. Throws FactorizationFailure.
double hf_observed_loglik(const MfData& data, const gp::TrainedGp& lf_model, const HfParams& params,
                          const gp::BasisSpec& hf_basis, const gp::BasisSpec& rho_basis);

struct EmConfig {
  int max_em_iterations = 100;
  double loglik_rel_tolerance = 1e-8;
  int inner_starts = 5;  // per M-step after the first, which uses the full count

  void validate() const;
};

struct EmResult {
  HfParams params;
  std::vector<double> em_log;         // log-likelihood of the initial point, then one per iteration
  std::vector<HfParams> iterates;     // same length as em_log
  bool converged = false;
};

/// Initial HF parameters used by em_fit_hf.
HfParams initial_hf_params(const MfData& data, const gp::TrainedGp& lf_model, const gp::BasisSpec& hf_basis,
                           const gp::BasisSpec& rho_basis, const gp::HyperBounds& bounds);

EmResult em_fit_hf(const MfData& data, const gp::TrainedGp& lf_model, const gp::BasisSpec& hf_basis,
                   const gp::BasisSpec& rho_basis, const gp::HyperBounds& bounds,
                   const optimize::MultiStartConfig& config, const EmConfig& em_config = {});

struct MfFitConfig {
  gp::BasisSpec lf_basis = gp::BasisSpec::constant();
  gp::BasisSpec hf_basis = gp::BasisSpec::constant();
  gp::BasisSpec rho_basis = gp::BasisSpec::constant();
  std::optional<gp::HyperBounds> lf_bounds;  // defaults from the LF inputs
  std::optional<gp::HyperBounds> hf_bounds;  // defaults from the HF inputs
  optimize::MultiStartConfig lf_search;
  optimize::MultiStartConfig hf_search;
  EmConfig em;
};

MfModel fit_mf(const MfData& data, const MfFitConfig& config);

/// Assembles the prediction caches for given LF model and HF parameters.
MfModel make_mf_model(gp::TrainedGp lf_model, Dataset hf_data, HfParams hf_params, gp::BasisSpec hf_basis,
                      gp::BasisSpec rho_basis, std::vector<double> em_log = {});

PredictiveDistribution predict_mf(const MfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star,
                                  Fidelity level = Fidelity::HF, NoiseMode mode = NoiseMode::latent,
                                  CovMode cov = CovMode::diagonal);

}  // namespace mfkrig::mfgp
