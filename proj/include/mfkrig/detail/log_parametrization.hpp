#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mfkrig/gp.hpp"
#include "mfkrig/optimize.hpp"

namespace mfkrig::detail {

// Maps the free (non-pinned) entries of (theta_1..theta_D, eta) to log-space
// optimizer coordinates. Pinned entries keep their lower-bound value.
struct LogParametrization {
  Eigen::Index dim = 0;
  Eigen::VectorXd pinned_values;
  std::vector<Eigen::Index> free;

  explicit LogParametrization(const gp::HyperBounds& b) : dim(b.theta_lower.size()) {
    pinned_values.resize(dim + 1);
    for (Eigen::Index d = 0; d < dim; ++d) {
      pinned_values[d] = b.theta_lower[d];
      if (b.theta_lower[d] < b.theta_upper[d]) free.push_back(d);
    }
    pinned_values[dim] = b.eta_lower;
    if (b.eta_lower < b.eta_upper) free.push_back(dim);
  }

  optimize::BoxBounds box(const gp::HyperBounds& b) const {
    const auto k_free = static_cast<Eigen::Index>(free.size());
    optimize::BoxBounds box{Eigen::VectorXd(k_free), Eigen::VectorXd(k_free)};
    for (Eigen::Index k = 0; k < k_free; ++k) {
      const Eigen::Index i = free[static_cast<std::size_t>(k)];
      box.lower[k] = std::log(i < dim ? b.theta_lower[i] : b.eta_lower);
      box.upper[k] = std::log(i < dim ? b.theta_upper[i] : b.eta_upper);
    }
    return box;
  }

  Eigen::VectorXd natural(const Eigen::VectorXd& u) const {
    Eigen::VectorXd p = pinned_values;
    for (std::size_t k = 0; k < free.size(); ++k) p[free[k]] = std::exp(u[static_cast<Eigen::Index>(k)]);
    return p;
  }

  Eigen::VectorXd log_coordinates(const Eigen::VectorXd& p) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) u[static_cast<Eigen::Index>(k)] = std::log(p[free[k]]);
    return u;
  }

  // Chain rule from natural-unit gradient to log coordinates.
  void chain(const Eigen::VectorXd& p, const Eigen::VectorXd& grad_natural, Eigen::VectorXd& grad_log) const {
    for (std::size_t k = 0; k < free.size(); ++k) {
      const Eigen::Index i = free[k];
      grad_log[static_cast<Eigen::Index>(k)] = grad_natural[i] * p[i];
    }
  }
};

}  // namespace mfkrig::detail
