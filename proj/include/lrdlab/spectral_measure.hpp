#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <iosfwd>
#include <utility>
#include <vector>

#include "lrdlab/common.hpp"
#include "lrdlab/covariance.hpp"
#include "lrdlab/density.hpp"

namespace lrd {

// Uniform cell partition of the box [-half_width, half_width)^nu.  Cells are
// half-open rectangles enumerated row-major; negation maps cell i on each
// axis to cells[axis]-1-i, so the partition is symmetric under x -> -x.
struct CellGrid {
  int nu = 1;
  double half_width = M_PI;
  std::vector<int> cells;  // per-axis counts

  static CellGrid uniform(int nu, double half_width, int cells_per_axis);
  void validate() const;

  long total_cells() const;
  double width(int axis) const;
  std::vector<int> unpack(long index) const;
  long pack(const std::vector<int>& ix) const;
  void cell_bounds(long index, std::vector<double>* lo,
                   std::vector<double>* hi) const;
  std::vector<double> cell_center(long index) const;
  long negation(long index) const;
  long origin_cell() const;
  // true when x sits on a grid edge of the axis (within 1e-9 cell widths)
  bool aligned(double x, int axis) const;
};

// Per-cell d x d matrix masses G(cell) on a CellGrid.
struct MatrixSpectralMeasureOnGrid {
  CellGrid grid;
  int d = 1;
  std::vector<Eigen::MatrixXcd> mass;

  // Hermitian PSD per cell, evenness G(-cell) = conj G(cell), Cauchy-Schwarz
  // on the cross entries; throws NumericFailure with a diagnostic message
  void validate(double tol = 1e-10) const;

  Eigen::MatrixXcd total() const;
  // sum of cell masses inside an edge-aligned box; parts of the box outside
  // the grid contribute zero; misaligned edges throw InvalidInput
  Eigen::MatrixXcd box_mass(const std::vector<double>& lo,
                            const std::vector<double>& hi) const;
  // real part of the per-cell (j,j) masses in cell enumeration order
  std::vector<double> diagonal(int j) const;
  // sum of f(center) * G_{j,j'}(cell) over all cells
  std::complex<double> integral(int j, int jp,
                                const std::function<double(const double*)>& f)
      const;
  // columns: per-axis lo/hi, j, jprime, re, im
  void write_csv(std::ostream& os) const;
};

// Homogeneous density g0(x) = h0 |x|^(alpha-nu) b(x/|x|): the scaling limit
// of a SpectralDensityModel near the origin.
struct LimitSpectralModel {
  LatticeDims dims;
  LongRangeParams params;
  double h0 = 1.0;
  std::function<Eigen::MatrixXcd(const double*)> b;

  static LimitSpectralModel from_model(const SpectralDensityModel& m);

  // exact rectangle mass via the radial closed form: signed
  // inclusion-exclusion of corner masses, angular quadrature only
  Eigen::MatrixXcd cell_mass(const std::vector<double>& lo,
                             const std::vector<double>& hi) const;
  // max entrywise |G0(A) - t^-alpha G0(tA)|
  double homogeneity_residual(const std::vector<double>& lo,
                              const std::vector<double>& hi, double t) const;
};

// Cell-by-cell integrals of the model density over [-pi,pi)^nu.  Cells whose
// closest corner is the origin get a dyadic-shell treatment with an exact
// radial core; everything else uses smooth panel quadrature.
MatrixSpectralMeasureOnGrid measure_from_model(const SpectralDensityModel& m,
                                               int cells_per_axis);

// Exact masses of the homogeneous limit density on a grid.
MatrixSpectralMeasureOnGrid limit_measure_on_grid(const LimitSpectralModel& m,
                                                  const CellGrid& grid);

// Spectral rescaling: target grid on [-N half_width, N half_width)^nu with
// G_N(cell) = (N^alpha / L(N)) * G(cell / N).  Source cell counts must be a
// multiple of the target counts so that cell/N aligns with source cells.
MatrixSpectralMeasureOnGrid rescale_measure(
    const MatrixSpectralMeasureOnGrid& src, int N, const SlowVarying& L,
    double alpha, int target_cells_per_axis);

// Set-level rescaling arithmetic, bypassing grids: N^alpha/L(N) times the
// source mass of box/N for a bounded matrix density on [-pi,pi)^nu ...
Eigen::MatrixXcd rescaled_density_mass(
    const LatticeDims& dims,
    const std::function<Eigen::MatrixXcd(const double*)>& density, int N,
    const SlowVarying& L, double alpha, const std::vector<double>& lo,
    const std::vector<double>& hi);
// ... and for the homogeneous power-law density (exact).
Eigen::MatrixXcd rescaled_limit_mass(const LimitSpectralModel& m, int N,
                                     const SlowVarying& L,
                                     const std::vector<double>& lo,
                                     const std::vector<double>& hi);

// Per-cell values of R = G_jj + G_j'j' + G_jj' + G_j'j and
// S = G_jj + G_j'j' - i (G_jj' - G_j'j); both nonnegative for a valid
// measure, below -1e-12 throws NumericFailure.
std::pair<std::vector<double>, std::vector<double>> quadratic_form_measures(
    const MatrixSpectralMeasureOnGrid& g, int j, int jp);

// weight w(s) on the coordinate-sum vector s = x_1 + ... + x_k
using SumWeight = std::function<double(const double*)>;

// |h_N(s)|^2 = prod_l (sin(s_l/2) / (N sin(s_l/(2N))))^2 with the removable
// singularities filled in (equals 1 where s_l/N is a multiple of 2 pi)
SumWeight fejer_weight(int N, int nu);

// mass of the k-fold product of the diagonal measures G_{j_l,j_l} weighted
// by w(x_1+...+x_k), midpoint rule at cell centers; k*nu <= 3
double mu_product_total(const MatrixSpectralMeasureOnGrid& gN,
                        const std::vector<int>& indices, const SumWeight& w);
// same mass restricted to tuples with at least one center outside [-T,T]^nu
double mu_tail_mass(const SumWeight& w, const MatrixSpectralMeasureOnGrid& gN,
                    const std::vector<int>& indices, double T);
// Fourier transform of the |h_N|^2-weighted product measure at the lattice
// frequencies t_l = p_l / N
std::complex<double> mu_fourier_lattice(const MatrixSpectralMeasureOnGrid& gN,
                                        const std::vector<int>& indices, int N,
                                        const std::vector<std::vector<int>>& p);

// N^-(2 nu - k alpha) L(N)^-k sum over u,v in {0..N-1}^nu of
// prod_l r_{j_l,j_l}(u - v + p_l), grouped over y = u - v with the
// triangular pair counts; the table must cover |y + p_l|
std::complex<double> phi_lattice(const CovarianceTable& cov,
                                 const std::vector<int>& indices,
                                 const std::vector<std::vector<int>>& p, int N,
                                 double alpha, const SlowVarying& L);

}  // namespace lrd
