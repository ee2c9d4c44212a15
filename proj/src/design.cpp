#include "mfkrig/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mfkrig/error.hpp"
#include "mfkrig/random.hpp"

namespace mfkrig::design {

Design lhs(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw Error(ErrorCode::InvalidConfig, "lhs needs n >= 1 and d >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Design out{Eigen::MatrixXd(n, d), seed};
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double k = static_cast<double>(perm[static_cast<std::size_t>(i)]);
      const double lo = k * inv_n;
      const double hi = (k + 1.0) * inv_n;
      const double v = (k + unit(rng)) * inv_n;
      // rounding can land exactly on the upper stratum edge
      out.points(i, j) = std::clamp(v, lo, std::nextafter(hi, lo));
    }
  }
  return out;
}

namespace {

// Min pairwise squared distance; gives up early once it drops below `floor`.
double min_sq_distance(const Eigen::Ref<const Eigen::MatrixXd>& p, double floor) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < p.rows(); ++j) {
      const double s = (p.row(i) - p.row(j)).squaredNorm();
      if (s < best) {
        best = s;
        if (best <= floor) return best;
      }
    }
  }
  return best;
}

}  // namespace

double min_pairwise_distance(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  return std::sqrt(min_sq_distance(points, -1.0));
}

Design maximin_lhs(Eigen::Index n, Eigen::Index d, int restarts, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InvalidConfig, "maximin_lhs needs n >= 2");
  if (restarts < 1) throw Error(ErrorCode::InvalidConfig, "maximin_lhs needs restarts >= 1");
  Design best = lhs(n, d, derive_seed(seed, 0));
  double best_sq = min_sq_distance(best.points, -1.0);
  for (int k = 1; k < restarts; ++k) {
    Design cand = lhs(n, d, derive_seed(seed, static_cast<std::uint64_t>(k)));
    const double s = min_sq_distance(cand.points, best_sq);
    if (s > best_sq) {
      best_sq = s;
      best = std::move(cand);
    }
  }
  return best;
}

Eigen::MatrixXd scale_to_box(const Eigen::Ref<const Eigen::MatrixXd>& unit_points, double lo, double hi) {
  return (lo + (hi - lo) * unit_points.array()).matrix();
}

TestFunctionPair analytic1d() {
  TestFunctionPair p;
  p.name = "analytic1d";
  p.input_dim = 1;
  p.lower = 0.0;
  p.upper = 2.0;
  p.lf = [](const Eigen::Ref<const Eigen::VectorXd>& x) { return std::sin(2.0 * M_PI * x[0]); };
  p.hf = [](const Eigen::Ref<const Eigen::VectorXd>& x) {
    return (x[0] / 4.0 - std::sqrt(2.0)) * std::sin(2.0 * M_PI * x[0] + M_PI);
  };
  return p;
}

namespace {

double park_hf(const Eigen::Ref<const Eigen::VectorXd>& x) {
  // x1 -> 0 makes x4 / x1^2 undefined; the clamp keeps the limit finite.
  const double x1 = std::max(x[0], 1e-6);
  const double x2 = x[1];
  const double x3 = x[2];
  const double x4 = x[3];
  return 0.5 * x1 * (std::sqrt(1.0 + (x2 + x3 * x3) * x4 / (x1 * x1)) - 1.0) +
         (x1 + 3.0 * x4) * std::exp(1.0 + std::sin(x3));
}

}  // namespace

TestFunctionPair park4d() {
  TestFunctionPair p;
  p.name = "park4d";
  p.input_dim = 4;
  p.lower = 0.0;
  p.upper = 1.0;
  p.hf = park_hf;
  p.lf = [](const Eigen::Ref<const Eigen::VectorXd>& x) {
    return (1.0 + std::sin(x[0]) / 10.0) * park_hf(x) - 2.0 * x[0] + x[1] * x[1] + x[2] * x[2] + 0.5;
  };
  return p;
}

TestFunctionPair test_function(const std::string& name) {
  if (name == "analytic1d") return analytic1d();
  if (name == "park4d") return park4d();
  throw Error(ErrorCode::InvalidConfig, "unknown test function '" + name + "'");
}

Eigen::VectorXd eval_testfn(const TestFunctionPair& pair, Fidelity level, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != pair.input_dim) {
    throw Error(ErrorCode::DimensionMismatch, pair.name + " takes " + std::to_string(pair.input_dim) + " inputs");
  }
  if (x.size() > 0 && (x.minCoeff() < pair.lower || x.maxCoeff() > pair.upper || !x.allFinite())) {
    throw Error(ErrorCode::DomainViolation, "inputs outside the " + pair.name + " domain");
  }
  const auto& fn = level == Fidelity::LF ? pair.lf : pair.hf;
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = fn(x.row(i).transpose());
  return out;
}

Eigen::VectorXd add_noise(const Eigen::Ref<const Eigen::VectorXd>& y, double noise_variance, std::uint64_t seed) {
  if (!(noise_variance >= 0.0)) throw Error(ErrorCode::DomainViolation, "noise variance must be non-negative");
  Eigen::VectorXd out = y;
  if (noise_variance == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(noise_variance));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += normal(rng);
  return out;
}

}  // namespace mfkrig::design
