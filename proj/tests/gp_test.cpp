#include "mfkrig/gp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mfkrig/design.hpp"
#include "mfkrig/error.hpp"
#include "mfkrig/metrics.hpp"
#include "test_util.hpp"

using namespace mfkrig;
using namespace mfkrig::gp;
using mfkrig::testing::rel_err;

namespace {

kernels::LengthScales ls(const Eigen::VectorXd& v) { return kernels::LengthScales(v); }

Dataset smooth_data(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  Dataset data;
  data.x = mfkrig::testing::random_matrix(n, d, rng, 0.0, 1.0);
  data.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) data.z[i] = std::sin(3.0 * data.x.row(i).sum()) + 0.3 * data.x(i, 0);
  data.z += 0.05 * mfkrig::testing::random_vector(n, rng);
  return data;
}

HyperBounds noise_free_bounds(const Eigen::MatrixXd& x) {
  HyperBounds b = HyperBounds::defaults_for(x);
  b.eta_lower = b.eta_upper = 0.0;
  return b;
}

}  // namespace

TEST(BasisSpec, ConstantAndLinear) {
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  EXPECT_EQ(BasisSpec::constant().design_matrix(x), Eigen::MatrixXd::Ones(2, 1));
  const Eigen::MatrixXd f = BasisSpec::linear(2).design_matrix(x);
  ASSERT_EQ(f.cols(), 3);
  EXPECT_EQ(f(1, 0), 1.0);
  EXPECT_EQ(f(1, 2), 4.0);
  EXPECT_EQ(BasisSpec::from_name("linear", 2).size(), 3);
  EXPECT_THROW(BasisSpec::from_name("quadratic", 2), Error);
}

TEST(HyperBounds, DefaultsScaleWithRange) {
  Eigen::MatrixXd x(3, 2);
  x << 0, 5, 2, 5, 1, 5;
  const HyperBounds b = HyperBounds::defaults_for(x);
  EXPECT_DOUBLE_EQ(b.theta_lower[0], 2e-3);
  EXPECT_DOUBLE_EQ(b.theta_upper[0], 2e3);
  EXPECT_DOUBLE_EQ(b.theta_lower[1], 1e-3);  // zero range counts as 1
  EXPECT_EQ(b.eta_lower, 1e-8);
  EXPECT_EQ(b.eta_upper, 1e2);
  EXPECT_NO_THROW(b.validate(2));
  EXPECT_THROW(b.validate(3), Error);
  HyperBounds bad = b;
  bad.eta_lower = 0.0;
  EXPECT_THROW(bad.validate(2), Error);
  EXPECT_NO_THROW(noise_free_bounds(x).validate(2));
}

TEST(ProfiledEstimates, LargeEtaGivesSampleMean) {
  std::mt19937_64 rng(1);
  const Dataset d = smooth_data(15, 2, rng);
  const ProfiledEstimates e = profiled_estimates(d, BasisSpec::constant(), ls(Eigen::Vector2d(0.2, 0.2)), 1e8);
  EXPECT_NEAR(e.beta[0], d.z.mean(), 1e-7);
}

TEST(ProfiledEstimates, OrthogonalTwoPointCase) {
  Dataset d;
  d.x.resize(2, 1);
  d.x << 0.0, 100.0;  // correlation underflows to 0, so R = I
  d.z = Eigen::Vector2d(1.0, 4.0);
  const ProfiledEstimates e = profiled_estimates(d, BasisSpec::constant(), ls(Eigen::VectorXd::Ones(1)), 0.0);
  EXPECT_DOUBLE_EQ(e.beta[0], 2.5);
  EXPECT_DOUBLE_EQ(e.sigma2, (1.5 * 1.5 + 1.5 * 1.5) / 2.0);
}

TEST(ProfiledEstimates, ExactLinearDataHasZeroResidual) {
  std::mt19937_64 rng(2);
  Dataset d;
  d.x = mfkrig::testing::random_matrix(10, 2, rng);
  const Eigen::Vector3d c(0.5, -1.0, 2.0);
  d.z = BasisSpec::linear(2).design_matrix(d.x) * c;
  const ProfiledEstimates e = profiled_estimates(d, BasisSpec::linear(2), ls(Eigen::Vector2d(0.5, 0.5)), 0.1);
  EXPECT_LT((e.beta - c).norm(), 1e-10);
  EXPECT_LT(e.sigma2, 1e-20);
}

TEST(ProfiledEstimates, RankDeficientBasis) {
  Dataset d;
  d.x = Eigen::MatrixXd::Constant(4, 1, 0.3);
  d.x(3, 0) = 0.3;
  d.z = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  try {
    profiled_estimates(d, BasisSpec::linear(1), ls(Eigen::VectorXd::Ones(1)), 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficientBasis);
  }
}

TEST(ProfiledNll, MatchesDenseOracle) {
  std::mt19937_64 rng(3);
  for (Eigen::Index dim = 1; dim <= 4; ++dim) {
    const Dataset d = smooth_data(12, dim, rng);
    const Eigen::VectorXd theta = mfkrig::testing::random_vector(dim, rng, 0.2, 1.5);
    const double eta = 0.03;
    const double got = profiled_nll_and_grad(d, BasisSpec::constant(), ls(theta), eta).value;
    const double want = mfkrig::testing::dense_profiled_nll(d.x, d.z, Eigen::MatrixXd::Ones(12, 1), theta, eta);
    EXPECT_NEAR(got, want, 1e-8 * std::max(1.0, std::abs(want)));
  }
}

TEST(ProfiledNll, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index dim = 1 + rep % 4;
    const Dataset d = smooth_data(14, dim, rng);
    const Eigen::VectorXd theta = mfkrig::testing::random_vector(dim, rng, 0.2, 1.5);
    const double eta = std::exp(mfkrig::testing::random_vector(1, rng, std::log(1e-3), std::log(1.0))[0]);
    const ObjectiveValue v = profiled_nll_and_grad(d, BasisSpec::constant(), ls(theta), eta);
    Eigen::VectorXd p(dim + 1);
    p << theta, eta;
    for (Eigen::Index k = 0; k <= dim; ++k) {
      const double h = 1e-6 * p[k];
      Eigen::VectorXd pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      auto val = [&](const Eigen::VectorXd& q) {
        return profiled_nll_and_grad(d, BasisSpec::constant(), ls(q.head(dim)), q[dim]).value;
      };
      const double fd = (val(pp) - val(pm)) / (2.0 * h);
      EXPECT_LT(rel_err(v.gradient[k], fd), 1e-5) << "rep " << rep << " component " << k;
    }
  }
}

TEST(ProfiledNll, ScalingOutputsShiftsValueOnly) {
  std::mt19937_64 rng(5);
  Dataset d = smooth_data(10, 2, rng);
  const auto theta = ls(Eigen::Vector2d(0.4, 0.7));
  const ObjectiveValue a = profiled_nll_and_grad(d, BasisSpec::constant(), theta, 0.05);
  const ProfiledEstimates ea = profiled_estimates(d, BasisSpec::constant(), theta, 0.05);
  d.z *= 2.0;
  const ObjectiveValue b = profiled_nll_and_grad(d, BasisSpec::constant(), theta, 0.05);
  const ProfiledEstimates eb = profiled_estimates(d, BasisSpec::constant(), theta, 0.05);
  EXPECT_NEAR(eb.sigma2, 4.0 * ea.sigma2, 1e-12 * eb.sigma2);
  EXPECT_NEAR(b.value - a.value, 10.0 * std::log(2.0), 1e-10);
  EXPECT_LT((a.gradient - b.gradient).norm(), 1e-9 * (1.0 + a.gradient.norm()));
}

TEST(ProfiledNll, DegenerateResidualIsInfinite) {
  Dataset d;
  d.x = Eigen::MatrixXd::Zero(1, 1);
  d.z = Eigen::VectorXd::Constant(1, 3.0);
  const ObjectiveValue v = profiled_nll_and_grad(d, BasisSpec::constant(), ls(Eigen::VectorXd::Ones(1)), 0.1);
  EXPECT_TRUE(std::isinf(v.value));
  EXPECT_GT(v.value, 0.0);
}

TEST(FitGp, NoiseFreeInterpolates) {
  std::mt19937_64 rng(6);
  Dataset d = smooth_data(20, 2, rng);
  optimize::MultiStartConfig cfg;
  cfg.rng_seed = 6;
  const TrainedGp m = fit_gp(d, BasisSpec::constant(), noise_free_bounds(d.x), cfg);
  EXPECT_EQ(m.hyper.kernel.eta, 0.0);
  const PredictiveDistribution p = predict_gp(m, d.x, NoiseMode::latent, CovMode::full);
  EXPECT_LT((p.mean - d.z).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_LT(p.variance.maxCoeff(), 1e-8);
}

TEST(FitGp, NoiseFreeGpDrawInterpolates) {
  std::mt19937_64 rng(16);
  for (Eigen::Index dim = 1; dim <= 3; ++dim) {
    Dataset d;
    d.x = mfkrig::testing::random_matrix(10 + 5 * dim, dim, rng, 0.0, 1.0);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(dim, 0.25);
    // noise-free draw through the PSD square root; a jittered Cholesky would add noise
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(2.0 * mfkrig::testing::dense_corr(d.x, d.x, theta));
    std::normal_distribution<double> n01;
    Eigen::VectorXd e = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] *= n01(rng);
    d.z = (eig.eigenvectors() * e).array() + 0.5;
    optimize::MultiStartConfig cfg;
    cfg.rng_seed = static_cast<std::uint64_t>(dim);
    const TrainedGp m = fit_gp(d, BasisSpec::constant(), noise_free_bounds(d.x), cfg);
    const PredictiveDistribution p = predict_gp(m, d.x);
    EXPECT_LT((p.mean - d.z).lpNorm<Eigen::Infinity>(), 1e-6) << dim;
    EXPECT_LT(p.variance.maxCoeff(), 1e-8) << dim;
  }
}

TEST(FitGp, Analytic1dLowFidelityQuality) {
  const auto f = design::analytic1d();
  Dataset d;
  d.x = design::scale_to_box(design::lhs(100, 1, 3).points, 0.0, 2.0);
  d.z = design::eval_testfn(f, Fidelity::LF, d.x);
  const TrainedGp m = fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), {});
  const Eigen::MatrixXd grid = Eigen::VectorXd::LinSpaced(5000, 0.0, 2.0);
  EXPECT_GT(metrics::q2(design::eval_testfn(f, Fidelity::LF, grid), predict_gp(m, grid).mean), 0.999);
}

TEST(FitGp, DeterministicAndOptimumBelowStarts) {
  std::mt19937_64 rng(7);
  const Dataset d = smooth_data(25, 3, rng);
  optimize::MultiStartConfig cfg;
  cfg.rng_seed = 123;
  const TrainedGp a = fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), cfg);
  const TrainedGp b = fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), cfg);
  EXPECT_EQ(a.hyper.kernel.theta.values(), b.hyper.kernel.theta.values());
  EXPECT_EQ(a.hyper.kernel.eta, b.hyper.kernel.eta);
  EXPECT_EQ(a.hyper.beta, b.hyper.beta);
  for (const auto& s : a.fit_log.search.log) {
    if (!s.failed) EXPECT_LE(a.fit_log.final_nll, s.result.trace.front());
  }
  // residual_solve invariant
  Eigen::MatrixXd r = kernels::corr_matrix(d.x, a.hyper.kernel.theta);
  r.diagonal().array() += a.hyper.kernel.eta;
  const Eigen::VectorXd e = d.z - Eigen::VectorXd::Constant(d.size(), a.hyper.beta[0]);
  EXPECT_LT((r * a.residual_solve - e).norm() / e.norm(), 1e-8);
}

TEST(FitGp, Preconditions) {
  Dataset d;
  d.x = Eigen::MatrixXd::Zero(1, 1);
  d.z = Eigen::VectorXd::Zero(1);
  try {
    fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  Dataset bad;
  bad.x = Eigen::MatrixXd::Zero(3, 1);
  bad.z = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(fit_gp(bad, BasisSpec::constant(), HyperBounds::defaults_for(bad.x), {}), Error);
}

TEST(PredictGp, PriorReversionFarAway) {
  std::mt19937_64 rng(8);
  const Dataset d = smooth_data(10, 1, rng);
  const TrainedGp m = make_trained_gp(d, BasisSpec::constant(),
                                      GpHyper{Eigen::VectorXd::Constant(1, 0.3),
                                              kernels::KernelParams{ls(Eigen::VectorXd::Constant(1, 0.1)), 2.0, 0.01}});
  const PredictiveDistribution p = predict_gp(m, Eigen::MatrixXd::Constant(1, 1, 50.0));
  EXPECT_NEAR(p.mean[0], 0.3, 1e-12);
  EXPECT_NEAR(p.variance[0], 2.0, 1e-12);
  const PredictiveDistribution pn = predict_gp(m, Eigen::MatrixXd::Constant(1, 1, 50.0), NoiseMode::noisy);
  EXPECT_NEAR(pn.variance[0], 2.0 + 0.02, 1e-12);
}

TEST(PredictGp, FullCovariancePsdAndConsistentWithDiagonal) {
  std::mt19937_64 rng(9);
  const Dataset d = smooth_data(15, 2, rng);
  const TrainedGp m = fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), {});
  const Eigen::MatrixXd xs = mfkrig::testing::random_matrix(5, 2, rng, 0.0, 1.0);
  const PredictiveDistribution full = predict_gp(m, xs, NoiseMode::latent, CovMode::full);
  const PredictiveDistribution diag = predict_gp(m, xs, NoiseMode::latent, CovMode::diagonal);
  EXPECT_EQ(full.cov, full.cov.transpose());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(full.cov).eigenvalues().minCoeff(), -1e-8);
  EXPECT_FALSE(diag.has_full_cov());
  EXPECT_LT((full.variance - diag.variance).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LE(diag.variance.maxCoeff(), m.hyper.kernel.sigma2 + 1e-10);
  EXPECT_THROW(predict_gp(m, Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST(PredictGp, NoisyModeAddsNoiseOnDiagonalOnly) {
  std::mt19937_64 rng(10);
  const Dataset d = smooth_data(12, 1, rng);
  const TrainedGp m = fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), {});
  const Eigen::MatrixXd xs = mfkrig::testing::random_matrix(4, 1, rng, 0.0, 1.0);
  const auto a = predict_gp(m, xs, NoiseMode::latent, CovMode::full);
  const auto b = predict_gp(m, xs, NoiseMode::noisy, CovMode::full);
  Eigen::MatrixXd diff = b.cov - a.cov;
  EXPECT_NEAR(diff.diagonal().minCoeff(), m.noise_variance(), 1e-14);
  diff.diagonal().setZero();
  EXPECT_TRUE(diff.isZero(0.0));
}

TEST(PosteriorCrossCov, MatchesFullCovariance) {
  std::mt19937_64 rng(11);
  const Dataset d = smooth_data(12, 2, rng);
  const TrainedGp m = fit_gp(d, BasisSpec::constant(), HyperBounds::defaults_for(d.x), {});
  const Eigen::MatrixXd xs = mfkrig::testing::random_matrix(4, 2, rng, 0.0, 1.0);
  const auto full = predict_gp(m, xs, NoiseMode::latent, CovMode::full);
  const Eigen::MatrixXd c = posterior_cross_cov(m, xs, xs);
  EXPECT_LT((c - full.cov).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((posterior_mean(m, xs) - full.mean).cwiseAbs().maxCoeff(), 1e-14);
}
