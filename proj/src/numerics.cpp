#include "mfkrig/numerics.hpp"

#include <cmath>
#include <string>

#include "mfkrig/error.hpp"

namespace mfkrig::numerics {

namespace {

thread_local FactorizationTracker* active_tracker = nullptr;

void check_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix is " + std::to_string(m.rows()) + "x" +
                                                  std::to_string(m.cols()) + ", expected square");
  }
  const Eigen::Index n = m.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double a = m(i, j);
      const double b = m(j, i);
      const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
      if (!(std::abs(a - b) <= 1e-9 * scale)) {
        throw Error(ErrorCode::NotSymmetric, "entries (" + std::to_string(i) + "," +
                                                 std::to_string(j) + ") differ");
      }
    }
  }
}

bool try_factor(const Eigen::Ref<const Eigen::MatrixXd>& m, double jitter, Eigen::MatrixXd& out) {
  Eigen::MatrixXd shifted = m;
  if (jitter > 0.0) shifted.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!(out(i, i) > 0.0) || !std::isfinite(out(i, i))) return false;
  }
  return true;
}

}  // namespace

SpdFactorization chol_factor(const Eigen::Ref<const Eigen::MatrixXd>& m, const JitterPolicy& policy) {
  check_symmetric(m);
  note_factorization(m.rows());

  SpdFactorization f;
  if (try_factor(m, 0.0, f.lower_factor)) return f;

  const double mean_diag = m.rows() > 0 ? m.diagonal().mean() : 0.0;
  for (double level : policy.relative_levels) {
    const double jitter = level * mean_diag;
    if (!(jitter > 0.0)) continue;
    if (try_factor(m, jitter, f.lower_factor)) {
      f.jitter_used = jitter;
      return f;
    }
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "Cholesky failed for " + std::to_string(m.rows()) + "x" + std::to_string(m.rows()) +
                  " matrix after jitter escalation");
}

Eigen::MatrixXd solve_spd(const SpdFactorization& f, const Eigen::MatrixXd& b) {
  if (b.rows() != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "right-hand side has " + std::to_string(b.rows()) +
                                                  " rows, factor has " + std::to_string(f.size()));
  }
  Eigen::MatrixXd x = b;
  const auto lower = f.lower_factor.triangularView<Eigen::Lower>();
  lower.solveInPlace(x);
  lower.transpose().solveInPlace(x);
  return x;
}

Eigen::VectorXd solve_spd(const SpdFactorization& f, const Eigen::VectorXd& b) {
  if (b.size() != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "right-hand side has " + std::to_string(b.size()) +
                                                  " rows, factor has " + std::to_string(f.size()));
  }
  Eigen::VectorXd x = b;
  const auto lower = f.lower_factor.triangularView<Eigen::Lower>();
  lower.solveInPlace(x);
  lower.transpose().solveInPlace(x);
  return x;
}

Eigen::VectorXd refined_solve(const Eigen::Ref<const Eigen::MatrixXd>& m, const SpdFactorization& f,
                              const Eigen::VectorXd& b, int max_sweeps) {
  Eigen::VectorXd x = solve_spd(f, b);
  if (f.jitter_used == 0.0) return x;
  if (m.rows() != f.size() || m.cols() != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "matrix does not match factor");
  }
  Eigen::VectorXd r = b - m * x;
  Eigen::VectorXd best = x;
  double best_norm = r.norm();
  const double target = 1e-14 * b.norm();
  int stalled = 0;
  for (int k = 0; k < max_sweeps && best_norm > target && stalled < 10; ++k) {
    x += solve_spd(f, r);
    r = b - m * x;
    const double norm = r.norm();
    if (norm < 0.999 * best_norm) {
      best = x;
      best_norm = norm;
      stalled = 0;
    } else {
      ++stalled;
    }
  }
  return best;
}

Eigen::MatrixXd solve_lower(const SpdFactorization& f, const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (b.rows() != f.size()) {
    throw Error(ErrorCode::DimensionMismatch, "right-hand side has " + std::to_string(b.rows()) +
                                                  " rows, factor has " + std::to_string(f.size()));
  }
  Eigen::MatrixXd x = b;
  f.lower_factor.triangularView<Eigen::Lower>().solveInPlace(x);
  return x;
}

Eigen::MatrixXd inverse_spd(const SpdFactorization& f) {
  Eigen::MatrixXd inv = solve_spd(f, Eigen::MatrixXd(Eigen::MatrixXd::Identity(f.size(), f.size())));
  return 0.5 * (inv + inv.transpose());
}

double logdet_spd(const SpdFactorization& f) {
  return 2.0 * f.lower_factor.diagonal().array().log().sum();
}

FactorizationTracker::FactorizationTracker() : parent_(active_tracker) { active_tracker = this; }

FactorizationTracker::~FactorizationTracker() { active_tracker = parent_; }

void note_factorization(Eigen::Index n) {
  for (FactorizationTracker* t = active_tracker; t != nullptr; t = t->parent_) {
    t->peak_ = std::max(t->peak_, n);
    ++t->count_;
  }
}

}  // namespace mfkrig::numerics
