#include "mfkrig/gp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mfkrig/detail/log_parametrization.hpp"
#include "mfkrig/error.hpp"

namespace mfkrig {

void Dataset::validate() const {
  if (x.rows() != z.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(x.rows()) + " input rows but " + std::to_string(z.size()) + " outputs");
  }
  if (!x.allFinite() || !z.allFinite()) throw Error(ErrorCode::DomainViolation, "dataset has non-finite entries");
}

}  // namespace mfkrig

namespace mfkrig::gp {

Eigen::MatrixXd BasisSpec::design_matrix(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::MatrixXd f(x.rows(), size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    for (Eigen::Index j = 0; j < size(); ++j) f(i, j) = functions[static_cast<std::size_t>(j)](xi);
  }
  return f;
}

BasisSpec BasisSpec::constant() {
  return BasisSpec{"constant", {[](const Eigen::Ref<const Eigen::VectorXd>&) { return 1.0; }}};
}

BasisSpec BasisSpec::linear(Eigen::Index dim) {
  BasisSpec b = constant();
  b.name = "linear";
  for (Eigen::Index d = 0; d < dim; ++d) {
    b.functions.push_back([d](const Eigen::Ref<const Eigen::VectorXd>& x) { return x[d]; });
  }
  return b;
}

BasisSpec BasisSpec::from_name(const std::string& name, Eigen::Index dim) {
  if (name == "constant") return constant();
  if (name == "linear") return linear(dim);
  throw Error(ErrorCode::InvalidConfig, "unknown basis '" + name + "'");
}

HyperBounds HyperBounds::defaults_for(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  HyperBounds b;
  const Eigen::Index dim = x.cols();
  b.theta_lower.resize(dim);
  b.theta_upper.resize(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    double range = x.rows() > 0 ? x.col(d).maxCoeff() - x.col(d).minCoeff() : 0.0;
    if (!(range > 0.0)) range = 1.0;
    b.theta_lower[d] = 1e-3 * range;
    b.theta_upper[d] = 1e3 * range;
  }
  return b;
}

void HyperBounds::validate(Eigen::Index dim) const {
  if (theta_lower.size() != dim || theta_upper.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "theta bounds do not match input dimension " + std::to_string(dim));
  }
  for (Eigen::Index d = 0; d < dim; ++d) {
    if (!(theta_lower[d] > 0.0) || !(theta_lower[d] <= theta_upper[d]) || !std::isfinite(theta_upper[d])) {
      throw Error(ErrorCode::InvalidConfig, "invalid theta bounds in dimension " + std::to_string(d));
    }
  }
  if (!(eta_lower >= 0.0) || !(eta_lower <= eta_upper) || !std::isfinite(eta_upper)) {
    throw Error(ErrorCode::InvalidConfig, "invalid eta bounds");
  }
  if (eta_lower == 0.0 && eta_upper > 0.0) {
    throw Error(ErrorCode::InvalidConfig, "eta lower bound must be positive unless eta is pinned at 0");
  }
}

namespace {

struct Profile {
  numerics::SpdFactorization factorization;
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  Eigen::VectorXd residual_solve;
};

Profile profile(const Dataset& data, const BasisSpec& basis, const kernels::LengthScales& theta, double eta) {
  data.validate();
  if (theta.size() != data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "length scales do not match input dimension");
  }
  const Eigen::MatrixXd f = basis.design_matrix(data.x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> f_qr(f);
  if (f.rows() < f.cols() || f_qr.rank() < f.cols()) {
    throw Error(ErrorCode::RankDeficientBasis, "design matrix of basis '" + basis.name + "' is rank deficient");
  }

  Eigen::MatrixXd r = kernels::corr_matrix(data.x, theta);
  r.diagonal().array() += eta;
  Profile p;
  try {
    p.factorization = numerics::chol_factor(r);
  } catch (const Error& e) {
    throw Error(ErrorCode::FactorizationFailure, e.what());
  }

  // GLS through the whitened least-squares problem L^{-1} F beta ~ L^{-1} z.
  const Eigen::MatrixXd ft = numerics::solve_lower(p.factorization, f);
  const Eigen::VectorXd zt = numerics::solve_lower(p.factorization, data.z);
  p.beta = ft.colPivHouseholderQr().solve(zt);
  const Eigen::VectorXd rt = zt - ft * p.beta;
  p.sigma2 = rt.squaredNorm() / static_cast<double>(data.size());
  p.residual_solve = numerics::solve_spd(p.factorization, Eigen::VectorXd(data.z - f * p.beta));
  return p;
}

constexpr double kMinSigma2 = 1e-300;

}  // namespace

ProfiledEstimates profiled_estimates(const Dataset& data, const BasisSpec& basis, const kernels::LengthScales& theta,
                                     double eta) {
  Profile p = profile(data, basis, theta, eta);
  return {std::move(p.beta), p.sigma2};
}

ObjectiveValue profiled_nll_and_grad(const Dataset& data, const BasisSpec& basis, const kernels::LengthScales& theta,
                                     double eta) {
  const Profile p = profile(data, basis, theta, eta);
  const Eigen::Index n = data.size();
  const Eigen::Index dim = data.dim();
  ObjectiveValue out;
  out.gradient = Eigen::VectorXd::Zero(dim + 1);
  if (!(p.sigma2 >= kMinSigma2)) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const double nd = static_cast<double>(n);
  out.value = 0.5 * nd * std::log(p.sigma2) + 0.5 * numerics::logdet_spd(p.factorization) +
              0.5 * nd * (1.0 + std::log(2.0 * M_PI));

  // d(-log L)/d omega = -1/2 tr((kappa kappa^T - Rt^{-1}) dRt/d omega)
  const Eigen::VectorXd kappa = p.residual_solve / std::sqrt(p.sigma2);
  const Eigen::MatrixXd r_inv = numerics::inverse_spd(p.factorization);
  const Eigen::MatrixXd r = kernels::corr_matrix(data.x, theta);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const Eigen::MatrixXd dr = kernels::corr_matrix_grad(data.x, r, theta, d);
    out.gradient[d] = -0.5 * (kappa.dot(dr * kappa) - r_inv.cwiseProduct(dr).sum());
  }
  out.gradient[dim] = -0.5 * (kappa.squaredNorm() - r_inv.trace());
  return out;
}

TrainedGp make_trained_gp(Dataset data, BasisSpec basis, GpHyper hyper) {
  data.validate();
  hyper.kernel.validate();
  if (hyper.kernel.theta.size() != data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "length scales do not match input dimension");
  }
  if (hyper.beta.size() != basis.size()) {
    throw Error(ErrorCode::DimensionMismatch, "beta does not match basis size");
  }
  TrainedGp m;
  Eigen::MatrixXd r = kernels::corr_matrix(data.x, hyper.kernel.theta);
  r.diagonal().array() += hyper.kernel.eta;
  try {
    m.factorization = numerics::chol_factor(r);
  } catch (const Error& e) {
    throw Error(ErrorCode::FactorizationFailure, e.what());
  }
  const Eigen::MatrixXd f = basis.design_matrix(data.x);
  m.residual_solve = numerics::refined_solve(r, m.factorization, Eigen::VectorXd(data.z - f * hyper.beta));
  m.data = std::move(data);
  m.basis = std::move(basis);
  m.hyper = std::move(hyper);
  return m;
}

TrainedGp fit_gp(const Dataset& data, const BasisSpec& basis, const HyperBounds& bounds,
                 const optimize::MultiStartConfig& config) {
  data.validate();
  bounds.validate(data.dim());
  if (data.size() < basis.size() + 1) {
    throw Error(ErrorCode::InvalidConfig, "need at least " + std::to_string(basis.size() + 1) + " training points");
  }
  const detail::LogParametrization param(bounds);
  const Eigen::Index dim = data.dim();

  auto split = [dim](const Eigen::VectorXd& p) {
    return std::pair{kernels::LengthScales(p.head(dim)), p[dim]};
  };

  FitLog log;
  Eigen::VectorXd best(dim + 1);
  if (param.free.empty()) {
    best = param.pinned_values;
    const auto [theta, eta] = split(best);
    log.final_nll = profiled_nll_and_grad(data, basis, theta, eta).value;
  } else {
    const optimize::Objective objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
      const Eigen::VectorXd p = param.natural(u);
      const auto [theta, eta] = split(p);
      ObjectiveValue v;
      try {
        v = profiled_nll_and_grad(data, basis, theta, eta);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::FactorizationFailure) throw;
        return std::numeric_limits<double>::infinity();
      }
      param.chain(p, v.gradient, grad);
      return v.value;
    };
    log.search = optimize::multi_start_minimize(objective, param.box(bounds), config);
    best = param.natural(log.search.argmin);
    log.final_nll = log.search.value;
  }

  const auto [theta, eta] = split(best);
  ProfiledEstimates est = profiled_estimates(data, basis, theta, eta);
  GpHyper hyper{std::move(est.beta), kernels::KernelParams{theta, est.sigma2, eta}};
  if (!(hyper.kernel.sigma2 > 0.0)) {
    throw Error(ErrorCode::DegenerateResidual, "profiled sigma2 is zero at the optimum");
  }
  TrainedGp model = make_trained_gp(data, basis, std::move(hyper));
  model.fit_log = std::move(log);
  return model;
}

Eigen::VectorXd posterior_mean(const TrainedGp& model, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != model.data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction inputs have " + std::to_string(x.cols()) +
                                                  " columns, model expects " + std::to_string(model.data.dim()));
  }
  const Eigen::MatrixXd r = kernels::corr_matrix(model.data.x, x, model.hyper.kernel.theta);
  return model.basis.design_matrix(x) * model.hyper.beta + r.transpose() * model.residual_solve;
}

Eigen::MatrixXd posterior_cross_cov(const TrainedGp& model, const Eigen::Ref<const Eigen::MatrixXd>& a,
                                    const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.cols() != model.data.dim() || b.cols() != model.data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "covariance inputs do not match model dimension");
  }
  const auto& theta = model.hyper.kernel.theta;
  const Eigen::MatrixXd va = numerics::solve_lower(model.factorization, kernels::corr_matrix(model.data.x, a, theta));
  const Eigen::MatrixXd vb = numerics::solve_lower(model.factorization, kernels::corr_matrix(model.data.x, b, theta));
  return model.hyper.kernel.sigma2 * (kernels::corr_matrix(a, b, theta) - va.transpose() * vb);
}

PredictiveDistribution predict_gp(const TrainedGp& model, const Eigen::Ref<const Eigen::MatrixXd>& x_star,
                                  NoiseMode mode, CovMode cov) {
  if (x_star.cols() != model.data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction inputs have " + std::to_string(x_star.cols()) +
                                                  " columns, model expects " + std::to_string(model.data.dim()));
  }
  const auto& k = model.hyper.kernel;
  const Eigen::MatrixXd r = kernels::corr_matrix(model.data.x, x_star, k.theta);
  PredictiveDistribution out;
  out.mean = model.basis.design_matrix(x_star) * model.hyper.beta + r.transpose() * model.residual_solve;

  const Eigen::MatrixXd v = numerics::solve_lower(model.factorization, r);
  const double added = mode == NoiseMode::noisy ? k.noise_variance() : 0.0;
  if (cov == CovMode::full) {
    out.cov = k.sigma2 * (kernels::corr_matrix(x_star, k.theta) - v.transpose() * v);
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    out.cov.diagonal() = out.cov.diagonal().cwiseMax(0.0).array() + added;
    out.variance = out.cov.diagonal();
  } else {
    out.variance = (k.sigma2 * (1.0 - v.colwise().squaredNorm().array())).matrix().transpose();
    out.variance = out.variance.cwiseMax(0.0).array() + added;
  }
  return out;
}

}  // namespace mfkrig::gp
