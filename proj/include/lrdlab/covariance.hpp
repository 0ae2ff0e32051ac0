#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "lrdlab/common.hpp"
#include "lrdlab/density.hpp"

namespace lrd {

struct CovarianceQuadratureOptions {
  int grid = 0;          // FFT points per axis; 0 picks 2^20 (nu=1) / 1024 (nu=2)
  int window_cells = 0;  // cutout half-width around 0 in cells; 0 picks 512 / 24
  bool self_check = true;
  double self_check_tol = 1e-6;
};

// Covariance table r(p) on the lag box [-max_lag, max_lag]^nu with the
// reflection symmetry r_{j',j}(-p) = r_{j,j'}(p) enforced exactly.
class CovarianceTable {
 public:
  // r(p) = int_{[-pi,pi)^nu} exp(i p.x) g(x) dx for the singular power-law
  // density: smooth-windowed split with an FFT for the part away from 0,
  // dyadic-shell panel quadrature near 0 and a closed-form radial core.
  static CovarianceTable from_model(const SpectralDensityModel& m, int max_lag,
                                    const CovarianceQuadratureOptions& opt = {});
  // Plain midpoint-FFT transform for bounded densities (no singularity).
  static CovarianceTable from_bounded_density(
      const LatticeDims& dims,
      const std::function<Eigen::MatrixXcd(const double*)>& g, int max_lag,
      int grid = 4096);
  // Exact table from a closed-form covariance (for synthetic models).
  // nu=1 stores r({p}) for p >= 0, negative lags read the transpose.
  static CovarianceTable from_values(
      const LatticeDims& dims, int max_lag,
      const std::function<Eigen::MatrixXd(const std::vector<int>&)>& r);

  int nu() const { return nu_; }
  int d() const { return d_; }
  int max_lag() const { return max_lag_; }

  // r(p); |p_i| <= max_lag required
  Eigen::MatrixXd at(const std::vector<int>& p) const;
  double entry(int j, int jp, const std::vector<int>& p) const;
  // contiguous r_{j,j}(p), p = 0..max_lag (nu = 1 only)
  std::vector<double> diagonal_profile(int j) const;

  // largest |imaginary part| seen before the real projection
  double imag_residue() const { return imag_residue_; }
  // relative change of r at probe lags when the grid is doubled
  double self_check_defect() const { return self_check_defect_; }

  // coordinate rescale to r_{j,j}(0) = 1; pre_diag receives the original
  // r_{j,j}(0) values
  CovarianceTable normalized(Eigen::VectorXd* pre_diag = nullptr) const;

  // for each threshold T: sup over table lags |p| >= T and all (j,j') of
  // |r_{j,j'}(p) - a_{j,j'}(p/|p|) |p|^-alpha L(|p|)| / (|p|^-alpha L(|p|))
  std::vector<std::pair<double, double>> verify_lrd(
      const LongRangeParams& params, const SlowVarying& L,
      const AngularKernel& a, const std::vector<double>& thresholds) const;

  // fit a_{j,j'}(theta) ~ r(p) |p|^alpha / L(|p|) averaged over ray lags;
  // throws NumericFailure when per-lag estimates disagree beyond
  // instability_tol (relative)
  AngularKernel estimate_angular(const LongRangeParams& params,
                                 const SlowVarying& L,
                                 const std::vector<int>& ray_lags,
                                 double instability_tol = 0.25) const;

  // columns p1..p_nu, j, jprime, r
  void write_csv(std::ostream& os) const;

 private:
  CovarianceTable() = default;

  int nu_ = 1;
  int d_ = 1;
  int max_lag_ = 0;
  double imag_residue_ = 0.0;
  double self_check_defect_ = 0.0;
  // nu=1: index p in 0..max_lag.  nu=2: row-major over the full box with
  // index ((p1+max_lag)*(2*max_lag+1) + (p2+max_lag)).
  std::vector<Eigen::MatrixXd> store_;
};

}  // namespace lrd
