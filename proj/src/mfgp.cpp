#include "mfkrig/mfgp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mfkrig/detail/log_parametrization.hpp"
#include "mfkrig/error.hpp"
#include "mfkrig/random.hpp"

namespace mfkrig::mfgp {

void MfData::validate() const {
  lf.validate();
  hf.validate();
  if (lf.dim() != hf.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "LF inputs have " + std::to_string(lf.dim()) + " columns, HF inputs " +
                                                  std::to_string(hf.dim()));
  }
}

void EmConfig::validate() const {
  if (max_em_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_em_iterations must be >= 1");
  if (!(loglik_rel_tolerance >= 0.0)) throw Error(ErrorCode::InvalidConfig, "loglik_rel_tolerance must be >= 0");
  if (inner_starts < 1) throw Error(ErrorCode::InvalidConfig, "inner_starts must be >= 1");
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> lf_posterior_moments(const gp::TrainedGp& lf_model,
                                                                  const Eigen::Ref<const Eigen::MatrixXd>& x) {
  PredictiveDistribution p = gp::predict_gp(lf_model, x, NoiseMode::latent, CovMode::full);
  return {std::move(p.mean), std::move(p.cov)};
}

namespace {

void check_dim(Eigen::Index got, Eigen::Index want) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                "inputs have " + std::to_string(got) + " columns, model expects " + std::to_string(want));
  }
}

void check_params(const HfParams& p, Eigen::Index q, Eigen::Index p_h, Eigen::Index dim) {
  if (p.beta_rho.size() != q) throw Error(ErrorCode::DimensionMismatch, "beta_rho does not match rho basis");
  if (p.beta_h.size() != p_h) throw Error(ErrorCode::DimensionMismatch, "beta_h does not match HF basis");
  if (p.theta_h.size() != dim) throw Error(ErrorCode::DimensionMismatch, "theta_h does not match input dimension");
  if (!(p.sigma2_h > 0.0) || !(p.eta_h >= 0.0)) {
    throw Error(ErrorCode::DomainViolation, "HF parameters need sigma2_h > 0 and eta_h >= 0");
  }
}

numerics::SpdFactorization factor_or_fail(const Eigen::MatrixXd& m) {
  try {
    return numerics::chol_factor(m);
  } catch (const Error& e) {
    throw Error(ErrorCode::FactorizationFailure, e.what());
  }
}

// Everything fixed by the LF model and HF inputs.
struct HfContext {
  Eigen::MatrixXd g;
  Eigen::MatrixXd f;
  Eigen::VectorXd lf_mean;
  Eigen::MatrixXd lf_cov;
};

HfContext make_context(const MfData& data, const gp::TrainedGp& lf_model, const gp::BasisSpec& hf_basis,
                       const gp::BasisSpec& rho_basis) {
  data.validate();
  check_dim(data.dim(), lf_model.data.dim());
  HfContext c;
  c.g = rho_basis.design_matrix(data.hf.x);
  c.f = hf_basis.design_matrix(data.hf.x);
  std::tie(c.lf_mean, c.lf_cov) = lf_posterior_moments(lf_model, data.hf.x);
  return c;
}

// (rho rho^T) o V + sigma2 (R + eta I)
Eigen::MatrixXd marginal_cov(const HfContext& c, const Eigen::MatrixXd& x_h, const HfParams& p) {
  const Eigen::VectorXd rho = c.g * p.beta_rho;
  Eigen::MatrixXd k = (rho * rho.transpose()).cwiseProduct(c.lf_cov);
  Eigen::MatrixXd r = kernels::corr_matrix(x_h, p.theta_h);
  r.diagonal().array() += p.eta_h;
  k += p.sigma2_h * r;
  return k;
}

EStepState e_step_impl(const HfContext& c, const MfData& data, const HfParams& p) {
  check_params(p, c.g.cols(), c.f.cols(), data.dim());
  EStepState s;
  s.g_matrix = c.g;
  s.lf_mean_at_hf = c.lf_mean;
  s.lf_cov_at_hf = c.lf_cov;
  const Eigen::VectorXd rho = c.g * p.beta_rho;
  s.sigma_yz = c.lf_cov * rho.asDiagonal();
  s.sigma_zz = marginal_cov(c, data.hf.x, p);
  const numerics::SpdFactorization zz = factor_or_fail(s.sigma_zz);

  const Eigen::VectorXd resid = data.hf.z - rho.cwiseProduct(c.lf_mean) - c.f * p.beta_h;
  s.mu_y_given_z = c.lf_mean + s.sigma_yz * numerics::solve_spd(zz, resid);
  const Eigen::MatrixXd w = numerics::solve_lower(zz, Eigen::MatrixXd(s.sigma_yz.transpose()));
  s.sigma_y_given_z = c.lf_cov - w.transpose() * w;
  s.sigma_y_given_z = 0.5 * (s.sigma_y_given_z + s.sigma_y_given_z.transpose()).eval();

  const Eigen::Index q = c.g.cols();
  s.h_matrix.resize(c.g.rows(), q + c.f.cols());
  s.h_matrix.leftCols(q) = s.mu_y_given_z.asDiagonal() * c.g;
  s.h_matrix.rightCols(c.f.cols()) = c.f;
  return s;
}

double loglik_impl(const HfContext& c, const MfData& data, const HfParams& p) {
  check_params(p, c.g.cols(), c.f.cols(), data.dim());
  const numerics::SpdFactorization f = factor_or_fail(marginal_cov(c, data.hf.x, p));
  const Eigen::VectorXd rho = c.g * p.beta_rho;
  const Eigen::VectorXd resid = data.hf.z - rho.cwiseProduct(c.lf_mean) - c.f * p.beta_h;
  const double n = static_cast<double>(resid.size());
  return -0.5 * numerics::solve_lower(f, resid).squaredNorm() - 0.5 * numerics::logdet_spd(f) -
         0.5 * n * std::log(2.0 * M_PI);
}

// Closed-form M-step quantities at fixed (theta, eta).
struct MStepProfile {
  numerics::SpdFactorization factorization;
  Eigen::MatrixXd r_inv;
  Eigen::MatrixXd r;  // correlation matrix without the nugget
  Eigen::VectorXd beta;
  Eigen::VectorXd residual;
  double sigma2 = 0.0;
};

MStepProfile m_step_profile(const EStepState& s, const MfData& data, const kernels::LengthScales& theta, double eta) {
  const Eigen::Index n = data.hf.size();
  if (s.h_matrix.rows() != n || s.sigma_y_given_z.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "E-step state does not match HF data");
  }
  check_dim(theta.size(), data.dim());
  if (!(eta >= 0.0)) throw Error(ErrorCode::DomainViolation, "eta_h must be >= 0");

  MStepProfile m;
  m.r = kernels::corr_matrix(data.hf.x, theta);
  Eigen::MatrixXd rt = m.r;
  rt.diagonal().array() += eta;
  m.factorization = factor_or_fail(rt);
  m.r_inv = numerics::inverse_spd(m.factorization);

  const Eigen::Index q = s.g_matrix.cols();
  const Eigen::Index k = s.h_matrix.cols();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  t.topLeftCorner(q, q) = s.g_matrix.transpose() * m.r_inv.cwiseProduct(s.sigma_y_given_z) * s.g_matrix;
  t.topLeftCorner(q, q) = 0.5 * (t.topLeftCorner(q, q) + t.topLeftCorner(q, q).transpose()).eval();

  const Eigen::MatrixXd ht = numerics::solve_lower(m.factorization, s.h_matrix);
  const Eigen::VectorXd zt = numerics::solve_lower(m.factorization, data.hf.z);
  const Eigen::MatrixXd a = ht.transpose() * ht + t;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
    throw Error(ErrorCode::SingularNormalEquations, "M-step normal equations are singular");
  }
  m.beta = llt.solve(ht.transpose() * zt);
  m.residual = data.hf.z - s.h_matrix * m.beta;
  const double s_res = (zt - ht * m.beta).squaredNorm();
  m.sigma2 = std::max(0.0, (s_res + m.beta.dot(t * m.beta)) / static_cast<double>(n));
  return m;
}

constexpr double kMinSigma2 = 1e-300;

}  // namespace

EStepState e_step(const MfData& data, const gp::TrainedGp& lf_model, const HfParams& params,
                  const gp::BasisSpec& hf_basis, const gp::BasisSpec& rho_basis) {
  return e_step_impl(make_context(data, lf_model, hf_basis, rho_basis), data, params);
}

double hf_observed_loglik(const MfData& data, const gp::TrainedGp& lf_model, const HfParams& params,
                          const gp::BasisSpec& hf_basis, const gp::BasisSpec& rho_basis) {
  return loglik_impl(make_context(data, lf_model, hf_basis, rho_basis), data, params);
}

MStepEstimates m_step_closed_forms(const EStepState& state, const MfData& data, const kernels::LengthScales& theta_h,
                                   double eta_h) {
  MStepProfile m = m_step_profile(state, data, theta_h, eta_h);
  return {std::move(m.beta), m.sigma2};
}

gp::ObjectiveValue q_tilde_and_grad(const EStepState& state, const MfData& data, const kernels::LengthScales& theta_h,
                                    double eta_h) {
  const MStepProfile m = m_step_profile(state, data, theta_h, eta_h);
  const Eigen::Index n = data.hf.size();
  const Eigen::Index dim = data.dim();
  gp::ObjectiveValue out;
  out.gradient = Eigen::VectorXd::Zero(dim + 1);
  if (!(m.sigma2 >= kMinSigma2)) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const double nd = static_cast<double>(n);
  out.value = 0.5 * nd * std::log(m.sigma2) + 0.5 * numerics::logdet_spd(m.factorization) +
              0.5 * nd * (1.0 + std::log(2.0 * M_PI));

  // dQ/d omega = 1/2 tr((kappa kappa^T - Rt^{-1} + B / sigma2) dRt/d omega),
  // B = Rt^{-1} Diag(rho) Sigma_{Y|Z} Diag(rho) Rt^{-1}.
  const Eigen::Index q = state.g_matrix.cols();
  const Eigen::VectorXd rho = state.g_matrix * m.beta.head(q);
  const Eigen::VectorXd kappa = numerics::solve_spd(m.factorization, m.residual) / std::sqrt(m.sigma2);
  const Eigen::MatrixXd w = rho.asDiagonal() * state.sigma_y_given_z * rho.asDiagonal();
  Eigen::MatrixXd core = kappa * kappa.transpose() - m.r_inv + (m.r_inv * w * m.r_inv) / m.sigma2;
  for (Eigen::Index d = 0; d < dim; ++d) {
    const Eigen::MatrixXd dr = kernels::corr_matrix_grad(data.hf.x, m.r, theta_h, d);
    out.gradient[d] = -0.5 * core.cwiseProduct(dr).sum();
  }
  out.gradient[dim] = -0.5 * core.trace();
  return out;
}

HfParams initial_hf_params(const MfData& data, const gp::TrainedGp& lf_model, const gp::BasisSpec& hf_basis,
                           const gp::BasisSpec& rho_basis, const gp::HyperBounds& bounds) {
  const HfContext c = make_context(data, lf_model, hf_basis, rho_basis);
  bounds.validate(data.dim());
  HfParams p;
  // identity scaling rho = 1 in the least-squares sense of the rho basis
  p.beta_rho = c.g.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(c.g.rows()));
  const Eigen::VectorXd rho = c.g * p.beta_rho;
  const Eigen::VectorXd resid = data.hf.z - rho.cwiseProduct(c.lf_mean);
  p.beta_h = c.f.colPivHouseholderQr().solve(resid);
  const Eigen::VectorXd e = resid - c.f * p.beta_h;
  const double n = static_cast<double>(e.size());
  const double var = n > 1 ? (e.array() - e.mean()).square().sum() / (n - 1.0) : 0.0;
  p.sigma2_h = var > 0.0 && std::isfinite(var) ? var : 1.0;

  Eigen::VectorXd theta(data.dim());
  for (Eigen::Index d = 0; d < data.dim(); ++d) {
    double range = data.hf.x.col(d).maxCoeff() - data.hf.x.col(d).minCoeff();
    if (!(range > 0.0)) range = 1.0;
    theta[d] = std::clamp(range, bounds.theta_lower[d], bounds.theta_upper[d]);
  }
  p.theta_h = kernels::LengthScales(theta);
  p.eta_h = std::clamp(0.1, bounds.eta_lower, bounds.eta_upper);
  return p;
}

EmResult em_fit_hf(const MfData& data, const gp::TrainedGp& lf_model, const gp::BasisSpec& hf_basis,
                   const gp::BasisSpec& rho_basis, const gp::HyperBounds& bounds,
                   const optimize::MultiStartConfig& config, const EmConfig& em_config) {
  data.validate();
  bounds.validate(data.dim());
  config.validate();
  em_config.validate();
  const Eigen::Index q = rho_basis.size();
  const Eigen::Index min_n = q + hf_basis.size() + 1;
  if (data.hf.size() < min_n) {
    throw Error(ErrorCode::InvalidConfig, "need at least " + std::to_string(min_n) + " HF training points");
  }

  const HfContext ctx = make_context(data, lf_model, hf_basis, rho_basis);
  const detail::LogParametrization param(bounds);
  const optimize::BoxBounds box = param.box(bounds);
  const Eigen::Index dim = data.dim();

  EmResult res;
  res.params = initial_hf_params(data, lf_model, hf_basis, rho_basis, bounds);
  res.em_log.push_back(loglik_impl(ctx, data, res.params));
  res.iterates.push_back(res.params);

  for (int t = 0; t < em_config.max_em_iterations; ++t) {
    const EStepState state = e_step_impl(ctx, data, res.params);

    Eigen::VectorXd best(dim + 1);
    if (param.free.empty()) {
      best = param.pinned_values;
    } else {
      const optimize::Objective objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
        const Eigen::VectorXd p = param.natural(u);
        gp::ObjectiveValue v;
        try {
          v = q_tilde_and_grad(state, data, kernels::LengthScales(p.head(dim)), p[dim]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::FactorizationFailure && e.code() != ErrorCode::SingularNormalEquations) throw;
          return std::numeric_limits<double>::infinity();
        }
        param.chain(p, v.gradient, grad);
        return v.value;
      };
      Eigen::VectorXd current(dim + 1);
      current << res.params.theta_h.values(), res.params.eta_h;
      const std::vector<Eigen::VectorXd> warm{box.project(param.log_coordinates(current))};
      optimize::MultiStartConfig inner = config;
      inner.n_starts = t == 0 ? config.n_starts : em_config.inner_starts;
      inner.rng_seed = derive_seed(config.rng_seed, static_cast<std::uint64_t>(t));
      const optimize::MultiStartResult search = optimize::multi_start_minimize(objective, box, inner, warm);
      best = param.natural(search.argmin);
    }

    const kernels::LengthScales theta(best.head(dim));
    const MStepEstimates m = m_step_closed_forms(state, data, theta, best[dim]);
    if (!(m.sigma2_h > 0.0)) throw Error(ErrorCode::DegenerateResidual, "M-step sigma2_h is zero");
    HfParams next;
    next.beta_rho = m.beta_rho_h.head(q);
    next.beta_h = m.beta_rho_h.tail(hf_basis.size());
    next.sigma2_h = m.sigma2_h;
    next.theta_h = theta;
    next.eta_h = best[dim];

    const double ll = loglik_impl(ctx, data, next);
    const double prev = res.em_log.back();
    if (ll < prev - 1e-6) {
      throw Error(ErrorCode::NonMonotoneEM,
                  "observed log-likelihood fell from " + std::to_string(prev) + " to " + std::to_string(ll));
    }
    res.params = std::move(next);
    res.em_log.push_back(ll);
    res.iterates.push_back(res.params);
    if (std::abs(ll - prev) / std::max(std::abs(prev), 1.0) < em_config.loglik_rel_tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

MfModel make_mf_model(gp::TrainedGp lf_model, Dataset hf_data, HfParams hf_params, gp::BasisSpec hf_basis,
                      gp::BasisSpec rho_basis, std::vector<double> em_log) {
  MfData data{lf_model.data, hf_data};
  const HfContext ctx = make_context(data, lf_model, hf_basis, rho_basis);
  check_params(hf_params, rho_basis.size(), hf_basis.size(), data.dim());
  MfModel m;
  const Eigen::MatrixXd sigma = marginal_cov(ctx, hf_data.x, hf_params);
  m.sigma_factorization = factor_or_fail(sigma);
  const Eigen::VectorXd rho = ctx.g * hf_params.beta_rho;
  m.residual_solve = numerics::refined_solve(
      sigma, m.sigma_factorization, Eigen::VectorXd(hf_data.z - rho.cwiseProduct(ctx.lf_mean) - ctx.f * hf_params.beta_h));
  m.lf_model = std::move(lf_model);
  m.hf_data = std::move(hf_data);
  m.hf_params = std::move(hf_params);
  m.hf_basis = std::move(hf_basis);
  m.rho_basis = std::move(rho_basis);
  m.em_log = std::move(em_log);
  return m;
}

MfModel fit_mf(const MfData& data, const MfFitConfig& config) {
  data.validate();
  numerics::FactorizationTracker tracker;
  const gp::HyperBounds lf_bounds = config.lf_bounds.value_or(gp::HyperBounds::defaults_for(data.lf.x));
  const gp::HyperBounds hf_bounds = config.hf_bounds.value_or(gp::HyperBounds::defaults_for(data.hf.x));
  gp::TrainedGp lf = gp::fit_gp(data.lf, config.lf_basis, lf_bounds, config.lf_search);
  EmResult em = em_fit_hf(data, lf, config.hf_basis, config.rho_basis, hf_bounds, config.hf_search, config.em);
  MfModel m = make_mf_model(std::move(lf), data.hf, std::move(em.params), config.hf_basis, config.rho_basis,
                            std::move(em.em_log));
  m.fit_peak_factorization = tracker.peak_dimension();
  return m;
}

namespace {

// Pieces of the HF prediction shared by ar_moments and predict_mf.
struct ArPieces {
  Eigen::VectorXd m_ar;
  Eigen::VectorXd rho_star;
  Eigen::MatrixXd v_star;     // L_L^{-1} r_L(X_L, x_star)
  Eigen::MatrixXd k_cross;    // M x N_H
};

ArPieces ar_pieces(const MfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star) {
  const gp::TrainedGp& lf = model.lf_model;
  check_dim(x_star.cols(), lf.data.dim());
  const auto& kl = lf.hyper.kernel;
  const HfParams& p = model.hf_params;
  ArPieces a;
  a.rho_star = model.rho_basis.design_matrix(x_star) * p.beta_rho;
  const Eigen::MatrixXd r_star = kernels::corr_matrix(lf.data.x, x_star, kl.theta);
  const Eigen::VectorXd lf_mean = lf.basis.design_matrix(x_star) * lf.hyper.beta + r_star.transpose() * lf.residual_solve;
  a.m_ar = a.rho_star.cwiseProduct(lf_mean) + model.hf_basis.design_matrix(x_star) * p.beta_h;

  a.v_star = numerics::solve_lower(lf.factorization, r_star);
  const Eigen::MatrixXd& x_h = model.hf_data.x;
  const Eigen::MatrixXd v_h = numerics::solve_lower(lf.factorization, kernels::corr_matrix(lf.data.x, x_h, kl.theta));
  const Eigen::MatrixXd lf_cross = kl.sigma2 * (kernels::corr_matrix(x_star, x_h, kl.theta) - a.v_star.transpose() * v_h);
  const Eigen::VectorXd rho_h = model.rho_basis.design_matrix(x_h) * p.beta_rho;
  a.k_cross = a.rho_star.asDiagonal() * lf_cross * rho_h.asDiagonal();
  a.k_cross += p.sigma2_h * kernels::corr_matrix(x_star, x_h, p.theta_h);
  return a;
}

}  // namespace

ArMoments ar_moments(const MfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star) {
  ArPieces a = ar_pieces(model, x_star);
  MfData data{model.lf_model.data, model.hf_data};
  const HfContext ctx = make_context(data, model.lf_model, model.hf_basis, model.rho_basis);
  HfParams noiseless = model.hf_params;
  noiseless.eta_h = 0.0;
  return {std::move(a.m_ar), std::move(a.k_cross), marginal_cov(ctx, model.hf_data.x, noiseless)};
}

PredictiveDistribution predict_mf(const MfModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star,
                                  Fidelity level, NoiseMode mode, CovMode cov) {
  if (level == Fidelity::LF) return gp::predict_gp(model.lf_model, x_star, mode, cov);

  const ArPieces a = ar_pieces(model, x_star);
  const HfParams& p = model.hf_params;
  const auto& kl = model.lf_model.hyper.kernel;
  PredictiveDistribution out;
  out.mean = a.m_ar + a.k_cross * model.residual_solve;
  const Eigen::MatrixXd w = numerics::solve_lower(model.sigma_factorization, Eigen::MatrixXd(a.k_cross.transpose()));
  const double added = mode == NoiseMode::noisy ? p.noise_variance() : 0.0;
  if (cov == CovMode::full) {
    const Eigen::MatrixXd lf_cov =
        kl.sigma2 * (kernels::corr_matrix(x_star, kl.theta) - a.v_star.transpose() * a.v_star);
    out.cov = a.rho_star.asDiagonal() * lf_cov * a.rho_star.asDiagonal();
    out.cov += p.sigma2_h * kernels::corr_matrix(x_star, p.theta_h);
    out.cov -= w.transpose() * w;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    out.cov.diagonal() = out.cov.diagonal().cwiseMax(0.0).array() + added;
    out.variance = out.cov.diagonal();
  } else {
    const Eigen::ArrayXd lf_var = kl.sigma2 * (1.0 - a.v_star.colwise().squaredNorm().array()).transpose();
    out.variance = (a.rho_star.array().square() * lf_var + p.sigma2_h - w.colwise().squaredNorm().array().transpose())
                       .matrix();
    out.variance = out.variance.cwiseMax(0.0).array() + added;
  }
  return out;
}

}  // namespace mfkrig::mfgp
