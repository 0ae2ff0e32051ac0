#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lrd {

// d -> d' coordinate reduction of a positive semidefinite zero-lag
// covariance: X'_j = sum_l forward(j,l) X_l are orthonormal and
// X_j = sum_l reconstruct(j,l) X'_l reproduces the originals in mean square.
struct OrthonormalReduction {
  int d_prime = 0;
  Eigen::MatrixXd forward;      // d' x d, forward C0 forward^T = I
  Eigen::MatrixXd reconstruct;  // d x d', reconstruct forward C0 = C0
  std::vector<int> pivots;      // greedy pivot order (diagnostic)
};

// Greedy max-diagonal pivoted Cholesky with the rank cutoff at
// 1e-10 * trace(C0).  Deterministic: ties pick the smallest index.
OrthonormalReduction orthonormal_reduction(const Eigen::MatrixXd& c0);

}  // namespace lrd
