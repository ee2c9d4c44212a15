#include "mfkrig/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <random>

#include "mfkrig/error.hpp"

namespace mfkrig::optimize {

void BoxBounds::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw Error(ErrorCode::InvalidConfig, "bounds must be non-empty and of equal size");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw Error(ErrorCode::InvalidConfig, "bound " + std::to_string(i) + " is not a finite interval");
    }
  }
}

bool BoxBounds::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Eigen::VectorXd BoxBounds::project(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double projected_gradient_norm(const BoxBounds& bounds, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  return (bounds.project(x - g) - x).lpNorm<Eigen::Infinity>();
}

namespace {

struct CorrectionPair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

// Free variables are those not held at a bound by a gradient pointing outward.
Eigen::VectorXd free_mask(const BoxBounds& bounds, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0)) mask[i] = 0.0;
  }
  return mask;
}

Eigen::VectorXd two_loop(const std::deque<CorrectionPair>& memory, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& mask) {
  Eigen::VectorXd q = g.cwiseProduct(mask);
  std::vector<double> alpha(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    const auto& p = memory[k];
    alpha[k] = p.rho * p.s.cwiseProduct(mask).dot(q);
    q -= alpha[k] * p.y.cwiseProduct(mask);
  }
  double gamma = 1.0;
  if (!memory.empty()) {
    const auto& last = memory.back();
    gamma = last.s.dot(last.y) / last.y.squaredNorm();
  }
  q *= gamma;
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const auto& p = memory[k];
    const double beta = p.rho * p.y.cwiseProduct(mask).dot(q);
    q += (alpha[k] - beta) * p.s.cwiseProduct(mask);
  }
  return -q.cwiseProduct(mask);
}

}  // namespace

MinimizeResult minimize_box(const Objective& objective, const BoxBounds& bounds, const Eigen::VectorXd& start,
                            const MinimizeOptions& options) {
  bounds.validate();
  if (start.size() != bounds.size()) {
    throw Error(ErrorCode::DimensionMismatch, "start point has wrong dimension");
  }
  constexpr double armijo_c1 = 1e-4;
  constexpr int max_backtracks = 60;

  MinimizeResult res;
  Eigen::VectorXd x = bounds.project(start);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  double f = objective(x, g);
  res.evaluations = 1;
  if (!std::isfinite(f) || !g.allFinite()) {
    throw Error(ErrorCode::ObjectiveNonFinite, "objective is not finite at the start point");
  }
  res.trace.push_back(f);

  std::deque<CorrectionPair> memory;
  Eigen::VectorXd g_new(x.size());

  for (;;) {
    res.projected_gradient_norm = projected_gradient_norm(bounds, x, g);
    if (res.projected_gradient_norm <= options.gradient_tolerance) {
      res.converged = true;
      res.reason = StopReason::ProjectedGradient;
      break;
    }
    if (res.iterations >= options.max_iterations) {
      res.reason = StopReason::MaxIterations;
      break;
    }

    const Eigen::VectorXd mask = free_mask(bounds, x, g);
    Eigen::VectorXd d = two_loop(memory, g, mask);
    double slope = g.dot(d);
    if (!(slope < -1e-12 * g.cwiseProduct(mask).norm() * d.norm()) || !d.allFinite()) {
      memory.clear();
      d = -g.cwiseProduct(mask);
      slope = g.dot(d);
    }

    double step = 1.0;
    if (memory.empty()) {
      const double dn = d.lpNorm<Eigen::Infinity>();
      if (dn > 0.0) step = std::min(1.0, 1.0 / dn);
    }

    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = f;
    for (int bt = 0; bt < max_backtracks; ++bt, step *= 0.5) {
      x_new = bounds.project(x + step * d);
      if ((x_new - x).lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = objective(x_new, g_new);
      ++res.evaluations;
      if (!std::isfinite(f_new) || !g_new.allFinite()) continue;
      if (f_new <= f + armijo_c1 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.reason = StopReason::LineSearchFailed;
      break;
    }

    ++res.iterations;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm()) {
      memory.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }

    const double reduction = f - f_new;
    const double scale = std::max({std::abs(f), std::abs(f_new), 1.0});
    x = x_new;
    g = g_new;
    f = f_new;
    res.trace.push_back(f);

    if (reduction <= options.relative_reduction_tolerance * scale) {
      res.projected_gradient_norm = projected_gradient_norm(bounds, x, g);
      res.converged = res.projected_gradient_norm <= options.gradient_tolerance;
      res.reason = res.converged ? StopReason::ProjectedGradient : StopReason::RelativeReduction;
      break;
    }
  }

  res.argmin = x;
  res.value = f;
  return res;
}

void MultiStartConfig::validate() const {
  if (n_starts < 1) throw Error(ErrorCode::InvalidConfig, "n_starts must be at least 1");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidConfig, "max_iterations must be positive");
  if (!(gradient_tolerance > 0.0)) throw Error(ErrorCode::InvalidConfig, "gradient_tolerance must be positive");
}

MultiStartResult multi_start_minimize(const Objective& objective, const BoxBounds& bounds,
                                      const MultiStartConfig& config,
                                      std::span<const Eigen::VectorXd> extra_starts) {
  bounds.validate();
  config.validate();

  std::vector<Eigen::VectorXd> starts;
  starts.reserve(extra_starts.size() + static_cast<std::size_t>(config.n_starts));
  for (const auto& s : extra_starts) {
    if (s.size() != bounds.size()) throw Error(ErrorCode::DimensionMismatch, "extra start has wrong dimension");
    starts.push_back(bounds.project(s));
  }
  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < config.n_starts; ++k) {
    Eigen::VectorXd s(bounds.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      s[i] = bounds.lower[i] + unit(rng) * (bounds.upper[i] - bounds.lower[i]);
    }
    starts.push_back(std::move(s));
  }

  MinimizeOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;

  MultiStartResult out;
  out.log.reserve(starts.size());
  bool found = false;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    StartRecord rec;
    rec.start = starts[k];
    try {
      rec.result = minimize_box(objective, bounds, starts[k], options);
      if (!found || rec.result.value < out.value) {
        found = true;
        out.value = rec.result.value;
        out.argmin = rec.result.argmin;
        out.best_index = k;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ObjectiveNonFinite) throw;
      rec.failed = true;
      rec.error = e.what();
    }
    out.log.push_back(std::move(rec));
  }
  if (!found) {
    throw Error(ErrorCode::AllStartsFailed, std::to_string(starts.size()) + " starts, all non-finite");
  }
  return out;
}

}  // namespace mfkrig::optimize
