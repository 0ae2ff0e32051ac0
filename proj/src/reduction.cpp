#include "lrdlab/reduction.hpp"

#include <cmath>

#include "lrdlab/common.hpp"

namespace lrd {

OrthonormalReduction orthonormal_reduction(const Eigen::MatrixXd& c0) {
  const int d = int(c0.rows());
  if (c0.cols() != d) throw InvalidInput("covariance matrix must be square");
  if ((c0 - c0.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + c0.cwiseAbs().maxCoeff()))
    throw InvalidInput("covariance matrix must be symmetric");

  Eigen::MatrixXd resid = 0.5 * (c0 + c0.transpose());
  const double cutoff = 1e-10 * std::max(resid.trace(), 0.0) + 1e-300;

  Eigen::MatrixXd cols(d, d);  // columns of the low-rank factor, pivot order
  OrthonormalReduction out;
  for (int step = 0; step < d; ++step) {
    int piv = 0;
    for (int j = 1; j < d; ++j)
      if (resid(j, j) > resid(piv, piv)) piv = j;
    if (resid(piv, piv) <= cutoff) break;
    double s = std::sqrt(resid(piv, piv));
    cols.col(step) = resid.col(piv) / s;
    resid -= cols.col(step) * cols.col(step).transpose();
    out.pivots.push_back(piv);
  }
  if (resid.diagonal().minCoeff() < -1e4 * cutoff)
    throw InvalidInput("covariance matrix is not positive semidefinite");

  const int dp = int(out.pivots.size());
  out.d_prime = dp;
  out.reconstruct = cols.leftCols(dp);

  // rows of the factor at the pivot coordinates form a lower-triangular
  // square block in pivot order; its inverse gives the forward map
  Eigen::MatrixXd lp(dp, dp);
  for (int i = 0; i < dp; ++i)
    for (int j = 0; j < dp; ++j) lp(i, j) = out.reconstruct(out.pivots[i], j);
  Eigen::MatrixXd lp_inv =
      lp.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dp, dp));
  out.forward = Eigen::MatrixXd::Zero(dp, d);
  for (int i = 0; i < dp; ++i)
    for (int j = 0; j < dp; ++j) out.forward(j, out.pivots[i]) = lp_inv(j, i);
  return out;
}

}  // namespace lrd
