#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>

#include "mfkrig/types.hpp"

namespace mfkrig::design {

/// Points in [0,1]^D and the seed that produced them.
struct Design {
  Eigen::MatrixXd points;
  std::uint64_t seed = 0;
};

/// Seeded Latin hypercube: each column has exactly one point per stratum [k/n, (k+1)/n).
Design lhs(Eigen::Index n, Eigen::Index d, std::uint64_t seed);

/// Smallest pairwise Euclidean distance between the rows of `points`.
double min_pairwise_distance(const Eigen::Ref<const Eigen::MatrixXd>& points);

/// Best of `restarts` LHS candidates under the maximin criterion. Candidate k
/// is lhs(n, d, derive_seed(seed, k)); ties keep the first candidate.
Design maximin_lhs(Eigen::Index n, Eigen::Index d, int restarts, std::uint64_t seed);

/// Affine map of unit-cube points onto [lo, hi] in every dimension.
Eigen::MatrixXd scale_to_box(const Eigen::Ref<const Eigen::MatrixXd>& unit_points, double lo, double hi);

/// Analytical LF/HF pair on the box [lower, upper]^input_dim.
struct TestFunctionPair {
  std::string name;
  Eigen::Index input_dim = 1;
  double lower = 0.0;
  double upper = 1.0;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> lf;
  std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)> hf;
};

/// y_L = sin(2 pi x), y_H = (x/4 - sqrt 2) sin(2 pi x + pi), on [0, 2].
TestFunctionPair analytic1d();
/// Park function and its low-fidelity companion on [0, 1]^4.
TestFunctionPair park4d();
/// Lookup by name; throws InvalidConfig for unknown names.
TestFunctionPair test_function(const std::string& name);

/// Evaluates one level at every row of x. Throws DomainViolation outside the box.
Eigen::VectorXd eval_testfn(const TestFunctionPair& pair, Fidelity level, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// y + eps with eps iid N(0, noise_variance).
Eigen::VectorXd add_noise(const Eigen::Ref<const Eigen::VectorXd>& y, double noise_variance, std::uint64_t seed);

}  // namespace mfkrig::design
