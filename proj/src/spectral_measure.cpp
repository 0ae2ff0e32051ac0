#include "lrdlab/spectral_measure.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>

#include "lrdlab/fft.hpp"
#include "lrdlab/quadrature.hpp"

namespace lrd {

using cd = std::complex<double>;

// ---------------------------------------------------------------- CellGrid

CellGrid CellGrid::uniform(int nu, double half_width, int cells_per_axis) {
  CellGrid g;
  g.nu = nu;
  g.half_width = half_width;
  g.cells.assign(nu, cells_per_axis);
  g.validate();
  return g;
}

void CellGrid::validate() const {
  if (nu < 1 || nu > 3) throw InvalidInput("grid dimension must be 1..3");
  if (!(half_width > 0.0)) throw InvalidInput("grid half width must be positive");
  if (int(cells.size()) != nu) throw InvalidInput("per-axis cell count mismatch");
  long total = 1;
  for (int c : cells) {
    if (c < 1) throw InvalidInput("cell counts must be positive");
    total *= c;
    if (total > (1L << 28)) throw InvalidInput("grid too large");
  }
}

long CellGrid::total_cells() const {
  long t = 1;
  for (int c : cells) t *= c;
  return t;
}

double CellGrid::width(int axis) const {
  return 2.0 * half_width / cells[axis];
}

std::vector<int> CellGrid::unpack(long index) const {
  if (index < 0 || index >= total_cells())
    throw InvalidInput("cell index out of range");
  std::vector<int> ix(nu);
  for (int a = nu - 1; a >= 0; --a) {
    ix[a] = int(index % cells[a]);
    index /= cells[a];
  }
  return ix;
}

long CellGrid::pack(const std::vector<int>& ix) const {
  if (int(ix.size()) != nu) throw InvalidInput("cell index dimension mismatch");
  long index = 0;
  for (int a = 0; a < nu; ++a) {
    if (ix[a] < 0 || ix[a] >= cells[a])
      throw InvalidInput("cell index out of range");
    index = index * cells[a] + ix[a];
  }
  return index;
}

void CellGrid::cell_bounds(long index, std::vector<double>* lo,
                           std::vector<double>* hi) const {
  std::vector<int> ix = unpack(index);
  lo->resize(nu);
  hi->resize(nu);
  for (int a = 0; a < nu; ++a) {
    double w = width(a);
    (*lo)[a] = -half_width + ix[a] * w;
    (*hi)[a] = -half_width + (ix[a] + 1) * w;
  }
}

std::vector<double> CellGrid::cell_center(long index) const {
  std::vector<int> ix = unpack(index);
  std::vector<double> c(nu);
  for (int a = 0; a < nu; ++a)
    c[a] = -half_width + (ix[a] + 0.5) * width(a);
  return c;
}

long CellGrid::negation(long index) const {
  std::vector<int> ix = unpack(index);
  for (int a = 0; a < nu; ++a) ix[a] = cells[a] - 1 - ix[a];
  return pack(ix);
}

long CellGrid::origin_cell() const {
  std::vector<int> ix(nu);
  for (int a = 0; a < nu; ++a) {
    ix[a] = int(std::floor(half_width / width(a)));
    ix[a] = std::min(std::max(ix[a], 0), cells[a] - 1);
  }
  return pack(ix);
}

bool CellGrid::aligned(double x, int axis) const {
  double pos = (x + half_width) / width(axis);
  return std::abs(pos - std::round(pos)) <= 1e-9;
}

// ------------------------------------------- MatrixSpectralMeasureOnGrid

void MatrixSpectralMeasureOnGrid::validate(double tol) const {
  grid.validate();
  if (long(mass.size()) != grid.total_cells())
    throw NumericFailure("measure cell count does not match the grid");
  double scale = 1.0;
  for (const auto& m : mass) {
    if (m.rows() != d || m.cols() != d)
      throw NumericFailure("measure mass matrix has a wrong size");
    scale = std::max(scale, m.cwiseAbs().maxCoeff());
  }
  for (long i = 0; i < long(mass.size()); ++i) {
    const Eigen::MatrixXcd& m = mass[i];
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
      throw NumericFailure("measure mass is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
    if (es.eigenvalues().minCoeff() < -tol * scale)
      throw NumericFailure("measure mass is not positive semidefinite");
    if ((mass[grid.negation(i)] - m.conjugate()).cwiseAbs().maxCoeff() >
        tol * scale)
      throw NumericFailure("measure is not even under cell negation");
    for (int j = 0; j < d; ++j) {
      if (std::abs(m(j, j).imag()) > tol * scale ||
          m(j, j).real() < -tol * scale)
        throw NumericFailure("diagonal mass entries must be real nonnegative");
      for (int jp = 0; jp < d; ++jp)
        if (std::norm(m(j, jp)) >
            m(j, j).real() * m(jp, jp).real() + tol * scale * scale)
          throw NumericFailure("cross mass violates the Cauchy-Schwarz bound");
    }
  }
}

Eigen::MatrixXcd MatrixSpectralMeasureOnGrid::total() const {
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& m : mass) t += m;
  return t;
}

Eigen::MatrixXcd MatrixSpectralMeasureOnGrid::box_mass(
    const std::vector<double>& lo, const std::vector<double>& hi) const {
  if (int(lo.size()) != grid.nu || int(hi.size()) != grid.nu)
    throw InvalidInput("box dimension mismatch");
  std::vector<int> first(grid.nu), last(grid.nu);  // half-open cell ranges
  for (int a = 0; a < grid.nu; ++a) {
    if (hi[a] < lo[a]) throw InvalidInput("box bounds are reversed");
    double cl = std::max(lo[a], -grid.half_width);
    double ch = std::min(hi[a], grid.half_width);
    if (ch <= cl) return Eigen::MatrixXcd::Zero(d, d);
    if (!grid.aligned(cl, a) || !grid.aligned(ch, a))
      throw InvalidInput("box edges must align with the grid");
    first[a] = int(std::round((cl + grid.half_width) / grid.width(a)));
    last[a] = int(std::round((ch + grid.half_width) / grid.width(a)));
  }
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(d, d);
  std::vector<int> ix(first);
  while (true) {
    t += mass[grid.pack(ix)];
    int a = grid.nu - 1;
    while (a >= 0 && ++ix[a] >= last[a]) ix[a--] = first[a];
    if (a < 0) break;
  }
  return t;
}

std::vector<double> MatrixSpectralMeasureOnGrid::diagonal(int j) const {
  if (j < 0 || j >= d) throw InvalidInput("coordinate index out of range");
  std::vector<double> v(mass.size());
  for (size_t i = 0; i < mass.size(); ++i) v[i] = mass[i](j, j).real();
  return v;
}

std::complex<double> MatrixSpectralMeasureOnGrid::integral(
    int j, int jp, const std::function<double(const double*)>& f) const {
  if (j < 0 || j >= d || jp < 0 || jp >= d)
    throw InvalidInput("coordinate index out of range");
  cd s(0, 0);
  for (long i = 0; i < long(mass.size()); ++i) {
    std::vector<double> c = grid.cell_center(i);
    s += f(c.data()) * mass[i](j, jp);
  }
  return s;
}

void MatrixSpectralMeasureOnGrid::write_csv(std::ostream& os) const {
  for (int a = 0; a < grid.nu; ++a)
    os << "lo" << (a + 1) << ",hi" << (a + 1) << ",";
  os << "j,jprime,re,im\n";
  os.precision(17);
  std::vector<double> lo, hi;
  for (long i = 0; i < long(mass.size()); ++i) {
    grid.cell_bounds(i, &lo, &hi);
    for (int j = 0; j < d; ++j)
      for (int jp = 0; jp < d; ++jp) {
        for (int a = 0; a < grid.nu; ++a) os << lo[a] << "," << hi[a] << ",";
        os << (j + 1) << "," << (jp + 1) << "," << mass[i](j, jp).real() << ","
           << mass[i](j, jp).imag() << "\n";
      }
  }
}

// ---------------------------------------------------- LimitSpectralModel

LimitSpectralModel LimitSpectralModel::from_model(const SpectralDensityModel& m) {
  LimitSpectralModel g0;
  g0.dims = m.dims;
  g0.params = m.params;
  g0.h0 = m.h0();
  g0.b = m.b;
  return g0;
}

namespace {

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

// signed mass of the rectangle spanned by 0 and the extent vector for the
// density |x|^(alpha-nu) q(x/|x|)
double signed_corner(int nu, double alpha,
                     const std::function<double(const double*)>& q,
                     const std::vector<double>& extent) {
  int s = 1;
  for (double e : extent) {
    int se = sign_of(e);
    if (se == 0) return 0.0;
    s *= se;
  }
  return s * power_corner_mass(nu, alpha, q, extent);
}

// inclusion-exclusion over the rectangle corners
double homogeneous_rect_mass(int nu, double alpha,
                             const std::function<double(const double*)>& q,
                             const std::vector<double>& lo,
                             const std::vector<double>& hi) {
  double total = 0.0;
  for (int mask = 0; mask < (1 << nu); ++mask) {
    std::vector<double> corner(nu);
    int lowers = 0;
    for (int a = 0; a < nu; ++a) {
      bool low = mask & (1 << a);
      corner[a] = low ? lo[a] : hi[a];
      lowers += low;
    }
    total += (lowers % 2 ? -1.0 : 1.0) * signed_corner(nu, alpha, q, corner);
  }
  return total;
}

}  // namespace

Eigen::MatrixXcd LimitSpectralModel::cell_mass(
    const std::vector<double>& lo, const std::vector<double>& hi) const {
  if (int(lo.size()) != dims.nu || int(hi.size()) != dims.nu)
    throw InvalidInput("cell dimension mismatch");
  for (int a = 0; a < dims.nu; ++a)
    if (hi[a] < lo[a]) throw InvalidInput("cell bounds are reversed");
  const int d = dims.d;
  Eigen::MatrixXcd g(d, d);
  for (int j = 0; j < d; ++j)
    for (int jp = j; jp < d; ++jp) {
      auto re = [&](const double* dir) { return b(dir)(j, jp).real(); };
      auto im = [&](const double* dir) { return b(dir)(j, jp).imag(); };
      cd v(homogeneous_rect_mass(dims.nu, params.alpha, re, lo, hi),
           homogeneous_rect_mass(dims.nu, params.alpha, im, lo, hi));
      g(j, jp) = h0 * v;
      g(jp, j) = std::conj(g(j, jp));
    }
  return g;
}

double LimitSpectralModel::homogeneity_residual(const std::vector<double>& lo,
                                                const std::vector<double>& hi,
                                                double t) const {
  if (!(t > 0.0)) throw InvalidInput("scale factor must be positive");
  std::vector<double> tlo(lo), thi(hi);
  for (auto& x : tlo) x *= t;
  for (auto& x : thi) x *= t;
  Eigen::MatrixXcd a = cell_mass(lo, hi);
  Eigen::MatrixXcd b2 = std::pow(t, -params.alpha) * cell_mass(tlo, thi);
  return (a - b2).cwiseAbs().maxCoeff();
}

// --------------------------------------------------- measure construction

namespace {

constexpr int kShellLevels = 40;

// int_lo^hi x^(alpha-1) h(x) dx on 0 <= lo < hi; lo == 0 goes through dyadic
// shells with the closed-form core
double radial_profile_mass(double alpha, const std::function<double(double)>& h,
                           double lo, double hi) {
  if (hi <= lo) return 0.0;
  auto f = [&](double x) { return std::pow(x, alpha - 1.0) * h(x); };
  if (lo > 0.0) return integrate_adaptive(f, lo, hi, 1e-12, 1e-15);
  double total = 0.0;
  double edge = hi;
  for (int s = 0; s < kShellLevels; ++s) {
    total += integrate_gl(f, edge / 2.0, edge, 12);
    edge /= 2.0;
  }
  total += h(0.0) * std::pow(edge, alpha) / alpha;
  return total;
}

// tensor Gauss-Legendre over an axis-sorted rectangle
Eigen::MatrixXcd rect_gl(const SpectralDensityModel& m,
                         const std::vector<double>& lo,
                         const std::vector<double>& hi, int n) {
  const GaussRule& rule = gauss_legendre(n);
  const int d = m.dims.d;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d, d);
  double jac = 0.25 * (hi[0] - lo[0]) * (hi[1] - lo[1]);
  for (int i = 0; i < n; ++i) {
    double x = 0.5 * (lo[0] + hi[0]) + 0.5 * (hi[0] - lo[0]) * rule.nodes[i];
    for (int k = 0; k < n; ++k) {
      double y = 0.5 * (lo[1] + hi[1]) + 0.5 * (hi[1] - lo[1]) * rule.nodes[k];
      double rho = std::hypot(x, y);
      double dir[2] = {x / rho, y / rho};
      double u[2] = {x, y};
      acc += (rule.weights[i] * rule.weights[k] * jac *
              std::pow(rho, m.params.alpha - 2.0) * m.h(u)) *
             m.b(dir);
    }
  }
  return acc;
}

// rectangle with the origin at one corner: dyadic L-shaped shells toward the
// corner plus the exact radial core
Eigen::MatrixXcd corner_cell_mass(const SpectralDensityModel& m,
                                  const std::vector<double>& ext) {
  const int d = m.dims.d;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d, d);
  auto sorted = [](double a, double b) {
    return a <= b ? std::vector<double>{a, b} : std::vector<double>{b, a};
  };
  double e1 = ext[0], e2 = ext[1];
  for (int s = 0; s < kShellLevels; ++s) {
    double f1 = e1 / 2.0, f2 = e2 / 2.0;
    std::vector<double> alo = sorted(f1, e1), ahi = sorted(0.0, e2);
    acc += rect_gl(m, {alo[0], ahi[0]}, {alo[1], ahi[1]}, 12);
    std::vector<double> blo = sorted(0.0, f1), bhi = sorted(f2, e2);
    acc += rect_gl(m, {blo[0], bhi[0]}, {blo[1], bhi[1]}, 12);
    e1 = f1;
    e2 = f2;
  }
  double h00 = m.h0();
  for (int j = 0; j < d; ++j)
    for (int jp = 0; jp < d; ++jp) {
      auto re = [&](const double* dir) { return m.b(dir)(j, jp).real(); };
      auto im = [&](const double* dir) { return m.b(dir)(j, jp).imag(); };
      acc(j, jp) += h00 * cd(power_corner_mass(2, m.params.alpha, re, {e1, e2}),
                             power_corner_mass(2, m.params.alpha, im, {e1, e2}));
    }
  return acc;
}

// general cell integral with per-axis splits at zero
Eigen::MatrixXcd cell_mass_2d(const SpectralDensityModel& m,
                              const std::vector<double>& lo,
                              const std::vector<double>& hi) {
  const int d = m.dims.d;
  std::vector<std::pair<double, double>> ax0, ax1;
  auto split = [](double l, double h) {
    std::vector<std::pair<double, double>> parts;
    if (l < 0.0 && h > 0.0) {
      parts.emplace_back(l, 0.0);
      parts.emplace_back(0.0, h);
    } else {
      parts.emplace_back(l, h);
    }
    return parts;
  };
  ax0 = split(lo[0], hi[0]);
  ax1 = split(lo[1], hi[1]);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d, d);
  for (auto& p0 : ax0)
    for (auto& p1 : ax1) {
      // per-axis bound closest to zero
      double n0 = std::abs(p0.first) <= std::abs(p0.second) ? p0.first
                                                            : p0.second;
      double n1 = std::abs(p1.first) <= std::abs(p1.second) ? p1.first
                                                            : p1.second;
      if (n0 == 0.0 && n1 == 0.0) {
        double f0 = p0.first == 0.0 ? p0.second : p0.first;
        double f1 = p1.first == 0.0 ? p1.second : p1.first;
        acc += corner_cell_mass(m, {f0, f1});
      } else {
        acc += rect_gl(m, {p0.first, p1.first}, {p0.second, p1.second}, 12);
      }
    }
  return acc;
}

}  // namespace

MatrixSpectralMeasureOnGrid measure_from_model(const SpectralDensityModel& m,
                                               int cells_per_axis) {
  if (cells_per_axis < 2) throw InvalidInput("need at least two cells per axis");
  MatrixSpectralMeasureOnGrid out;
  out.grid = CellGrid::uniform(m.dims.nu, M_PI, cells_per_axis);
  out.d = m.dims.d;
  const int d = m.dims.d;
  const long total = out.grid.total_cells();
  out.mass.resize(total);

  if (m.dims.nu == 1) {
    const double dir_plus[1] = {1.0}, dir_minus[1] = {-1.0};
    Eigen::MatrixXcd bp = m.b(dir_plus), bm = m.b(dir_minus);
    auto h1 = [&](double x) { return m.h(&x); };
    std::vector<double> lo, hi;
    for (long i = 0; i < total; ++i) {
      out.grid.cell_bounds(i, &lo, &hi);
      double pos = 0.0, neg = 0.0;
      if (lo[0] >= 0.0) {
        pos = radial_profile_mass(m.params.alpha, h1, lo[0], hi[0]);
      } else if (hi[0] <= 0.0) {
        neg = radial_profile_mass(m.params.alpha, h1, -hi[0], -lo[0]);
      } else {
        neg = radial_profile_mass(m.params.alpha, h1, 0.0, -lo[0]);
        pos = radial_profile_mass(m.params.alpha, h1, 0.0, hi[0]);
      }
      out.mass[i] = pos * bp + neg * bm;
    }
    return out;
  }

  if (m.dims.nu == 2) {
    if (cells_per_axis > 1024)
      throw InvalidInput("two dimensional grids are capped at 1024 cells");
    std::vector<double> lo, hi;
    for (long i = 0; i < total; ++i) {
      out.grid.cell_bounds(i, &lo, &hi);
      out.mass[i] = cell_mass_2d(m, lo, hi);
    }
    return out;
  }

  throw InvalidInput("measures support nu in {1,2}");
}

MatrixSpectralMeasureOnGrid limit_measure_on_grid(const LimitSpectralModel& m,
                                                  const CellGrid& grid) {
  grid.validate();
  if (grid.nu != m.dims.nu) throw InvalidInput("grid dimension mismatch");
  MatrixSpectralMeasureOnGrid out;
  out.grid = grid;
  out.d = m.dims.d;
  out.mass.resize(grid.total_cells());
  std::vector<double> lo, hi;
  for (long i = 0; i < grid.total_cells(); ++i) {
    grid.cell_bounds(i, &lo, &hi);
    out.mass[i] = m.cell_mass(lo, hi);
  }
  return out;
}

MatrixSpectralMeasureOnGrid rescale_measure(
    const MatrixSpectralMeasureOnGrid& src, int N, const SlowVarying& L,
    double alpha, int target_cells_per_axis) {
  src.grid.validate();
  if (N < 1) throw InvalidInput("scale N must be a positive integer");
  if (target_cells_per_axis < 1)
    throw InvalidInput("target cell count must be positive");
  for (int a = 0; a < src.grid.nu; ++a)
    if (src.grid.cells[a] % target_cells_per_axis != 0)
      throw InvalidInput(
          "target cells must divide the source cells for grid alignment");
  const int q = src.grid.cells[0] / target_cells_per_axis;
  MatrixSpectralMeasureOnGrid out;
  out.grid = CellGrid::uniform(src.grid.nu, N * src.grid.half_width,
                               target_cells_per_axis);
  out.d = src.d;
  out.mass.assign(out.grid.total_cells(), Eigen::MatrixXcd::Zero(src.d, src.d));
  double factor = std::pow(double(N), alpha) / L(double(N));
  for (long i = 0; i < out.grid.total_cells(); ++i) {
    std::vector<int> tix = out.grid.unpack(i);
    std::vector<int> six(src.grid.nu);
    std::vector<int> off(src.grid.nu, 0);
    while (true) {
      for (int a = 0; a < src.grid.nu; ++a) six[a] = tix[a] * q + off[a];
      out.mass[i] += factor * src.mass[src.grid.pack(six)];
      int a = src.grid.nu - 1;
      while (a >= 0 && ++off[a] >= q) off[a--] = 0;
      if (a < 0) break;
    }
  }
  return out;
}

Eigen::MatrixXcd rescaled_density_mass(
    const LatticeDims& dims,
    const std::function<Eigen::MatrixXcd(const double*)>& density, int N,
    const SlowVarying& L, double alpha, const std::vector<double>& lo,
    const std::vector<double>& hi) {
  dims.validate();
  if (N < 1) throw InvalidInput("scale N must be a positive integer");
  if (int(lo.size()) != dims.nu || int(hi.size()) != dims.nu)
    throw InvalidInput("box dimension mismatch");
  std::vector<double> a(dims.nu), b(dims.nu);
  for (int i = 0; i < dims.nu; ++i) {
    a[i] = std::max(lo[i] / N, -M_PI);
    b[i] = std::min(hi[i] / N, M_PI);
    if (b[i] <= a[i]) return Eigen::MatrixXcd::Zero(dims.d, dims.d);
  }
  double factor = std::pow(double(N), alpha) / L(double(N));
  const int d = dims.d;
  Eigen::MatrixXcd g(d, d);
  if (dims.nu == 1) {
    for (int j = 0; j < d; ++j)
      for (int jp = 0; jp < d; ++jp) {
        auto re = [&](double x) { return density(&x)(j, jp).real(); };
        auto im = [&](double x) { return density(&x)(j, jp).imag(); };
        g(j, jp) = cd(integrate_adaptive(re, a[0], b[0], 1e-12, 1e-15),
                      integrate_adaptive(im, a[0], b[0], 1e-12, 1e-15));
      }
    return factor * g;
  }
  if (dims.nu == 2) {
    g.setZero();
    const GaussRule& rule = gauss_legendre(12);
    int p0 = std::max(1, int(std::ceil((b[0] - a[0]) / 0.5)));
    int p1 = std::max(1, int(std::ceil((b[1] - a[1]) / 0.5)));
    double w0 = (b[0] - a[0]) / p0, w1 = (b[1] - a[1]) / p1;
    for (int i0 = 0; i0 < p0; ++i0)
      for (int i1 = 0; i1 < p1; ++i1)
        for (int n0 = 0; n0 < 12; ++n0)
          for (int n1 = 0; n1 < 12; ++n1) {
            double u[2] = {
                a[0] + (i0 + 0.5 + 0.5 * rule.nodes[n0]) * w0,
                a[1] + (i1 + 0.5 + 0.5 * rule.nodes[n1]) * w1};
            g += (0.25 * w0 * w1 * rule.weights[n0] * rule.weights[n1]) *
                 density(u);
          }
    return factor * g;
  }
  throw InvalidInput("rescaled masses support nu in {1,2}");
}

Eigen::MatrixXcd rescaled_limit_mass(const LimitSpectralModel& m, int N,
                                     const SlowVarying& L,
                                     const std::vector<double>& lo,
                                     const std::vector<double>& hi) {
  if (N < 1) throw InvalidInput("scale N must be a positive integer");
  std::vector<double> a(lo), b(hi);
  for (int i = 0; i < m.dims.nu; ++i) {
    a[i] = std::max(lo[i] / N, -M_PI);
    b[i] = std::min(hi[i] / N, M_PI);
    if (b[i] <= a[i]) return Eigen::MatrixXcd::Zero(m.dims.d, m.dims.d);
  }
  return (std::pow(double(N), m.params.alpha) / L(double(N))) *
         m.cell_mass(a, b);
}

// ------------------------------------------------------- quadratic forms

std::pair<std::vector<double>, std::vector<double>> quadratic_form_measures(
    const MatrixSpectralMeasureOnGrid& g, int j, int jp) {
  if (j == jp) throw InvalidInput("quadratic form measures need j != j'");
  if (j < 0 || j >= g.d || jp < 0 || jp >= g.d)
    throw InvalidInput("coordinate index out of range");
  double scale = 1.0;
  for (const auto& m : g.mass)
    scale = std::max(scale, m.cwiseAbs().maxCoeff());
  std::vector<double> r(g.mass.size()), s(g.mass.size());
  for (size_t i = 0; i < g.mass.size(); ++i) {
    const Eigen::MatrixXcd& m = g.mass[i];
    cd rv = m(j, j) + m(jp, jp) + m(j, jp) + m(jp, j);
    cd sv = m(j, j) + m(jp, jp) - cd(0, 1) * (m(j, jp) - m(jp, j));
    r[i] = rv.real();
    s[i] = sv.real();
    if (r[i] < -1e-12 * scale || s[i] < -1e-12 * scale)
      throw NumericFailure("quadratic form measure went negative");
  }
  return {r, s};
}

// --------------------------------------------------- product diagnostics

SumWeight fejer_weight(int N, int nu) {
  if (N < 1) throw InvalidInput("block size N must be positive");
  return [N, nu](const double* s) {
    double w = 1.0;
    for (int a = 0; a < nu; ++a) {
      double phi = s[a] / (2.0 * N);
      double den = std::sin(phi);
      double ratio;
      // near the removable points the direct quotient loses accuracy, the
      // flat limit form sin(N delta)/(N delta) does not
      if (std::abs(den) < 1e-6) {
        double nd = N * std::remainder(phi, M_PI);
        ratio = std::abs(nd) < 1e-9 ? 1.0 : std::sin(nd) / nd;
      } else {
        ratio = std::sin(N * phi) / (N * den);
      }
      w *= ratio * ratio;
    }
    return w;
  };
}

namespace {

// sum over all index tuples of F(sum of centers) * prod masses, for
// per-factor complex vectors on a shared one dimensional grid
cd convolution_dot(const std::vector<std::vector<cd>>& factors,
                   const std::function<double(double)>& f_of_sum, double x0,
                   double w) {
  const int k = int(factors.size());
  const long m = long(factors[0].size());
  long need = k * (m - 1) + 1;
  long n = 1;
  while (n < need) n <<= 1;
  std::vector<cd> acc(factors[0]);
  acc.resize(n, cd(0, 0));
  fft_inplace(acc, false);
  std::vector<cd> tmp;
  for (int l = 1; l < k; ++l) {
    tmp = factors[l];
    tmp.resize(n, cd(0, 0));
    fft_inplace(tmp, false);
    for (long i = 0; i < n; ++i) acc[i] *= tmp[i];
  }
  fft_inplace(acc, true);
  cd total(0, 0);
  for (long i = 0; i < need; ++i)
    total += f_of_sum(k * x0 + i * w) * acc[i] / double(n);
  return total;
}

void check_product_dims(const MatrixSpectralMeasureOnGrid& g,
                        const std::vector<int>& indices) {
  if (indices.empty()) throw InvalidInput("need at least one index");
  for (int j : indices)
    if (j < 0 || j >= g.d) throw InvalidInput("coordinate index out of range");
  if (int(indices.size()) * g.grid.nu > 3)
    throw InvalidInput("product measure dimension exceeds the quadrature limit");
}

// generic product-measure sum with an optional per-axis box restriction
double product_sum(const MatrixSpectralMeasureOnGrid& g,
                   const std::vector<int>& indices, const SumWeight& w,
                   double box_T) {
  const int k = int(indices.size());
  const int nu = g.grid.nu;
  if (nu == 1) {
    double x0 = -g.grid.half_width + 0.5 * g.grid.width(0);
    double wd = g.grid.width(0);
    std::vector<std::vector<cd>> factors(k);
    for (int l = 0; l < k; ++l) {
      std::vector<double> diag = g.diagonal(indices[l]);
      factors[l].resize(diag.size());
      for (size_t i = 0; i < diag.size(); ++i) {
        double c = x0 + i * wd;
        bool keep = !(box_T >= 0.0) || std::abs(c) <= box_T;
        factors[l][i] = keep ? cd(diag[i], 0) : cd(0, 0);
      }
    }
    auto f = [&](double s) { return w(&s); };
    return convolution_dot(factors, f, x0, wd).real();
  }
  // direct tuple walk (k * nu <= 3 leaves only small cases here)
  const long total = g.grid.total_cells();
  std::vector<long> tuple(k, 0);
  double acc = 0.0;
  while (true) {
    double prod = 1.0;
    std::vector<double> s(nu, 0.0);
    bool keep = true;
    for (int l = 0; l < k && prod != 0.0; ++l) {
      std::vector<double> c = g.grid.cell_center(tuple[l]);
      for (int a = 0; a < nu; ++a) {
        s[a] += c[a];
        if (box_T >= 0.0 && std::abs(c[a]) > box_T) keep = false;
      }
      prod *= g.mass[tuple[l]](indices[l], indices[l]).real();
    }
    if (keep) acc += prod * w(s.data());
    int l = k - 1;
    while (l >= 0 && ++tuple[l] >= total) tuple[l--] = 0;
    if (l < 0) break;
  }
  return acc;
}

}  // namespace

double mu_product_total(const MatrixSpectralMeasureOnGrid& gN,
                        const std::vector<int>& indices, const SumWeight& w) {
  check_product_dims(gN, indices);
  return product_sum(gN, indices, w, -1.0);
}

double mu_tail_mass(const SumWeight& w, const MatrixSpectralMeasureOnGrid& gN,
                    const std::vector<int>& indices, double T) {
  check_product_dims(gN, indices);
  if (!(T >= 0.0)) throw InvalidInput("tail threshold must be nonnegative");
  return product_sum(gN, indices, w, -1.0) - product_sum(gN, indices, w, T);
}

std::complex<double> mu_fourier_lattice(
    const MatrixSpectralMeasureOnGrid& gN, const std::vector<int>& indices,
    int N, const std::vector<std::vector<int>>& p) {
  check_product_dims(gN, indices);
  const int k = int(indices.size());
  const int nu = gN.grid.nu;
  if (int(p.size()) != k) throw InvalidInput("need one lattice point per factor");
  for (const auto& pl : p)
    if (int(pl.size()) != nu) throw InvalidInput("lattice point dimension mismatch");
  SumWeight w = fejer_weight(N, nu);
  if (nu == 1) {
    double x0 = -gN.grid.half_width + 0.5 * gN.grid.width(0);
    double wd = gN.grid.width(0);
    std::vector<std::vector<cd>> factors(k);
    for (int l = 0; l < k; ++l) {
      std::vector<double> diag = gN.diagonal(indices[l]);
      double t = double(p[l][0]) / N;
      factors[l].resize(diag.size());
      for (size_t i = 0; i < diag.size(); ++i)
        factors[l][i] = diag[i] * std::exp(cd(0.0, t * (x0 + i * wd)));
    }
    auto f = [&](double s) { return w(&s); };
    return convolution_dot(factors, f, x0, wd);
  }
  // direct walk for the small multi dimensional cases
  const long total = gN.grid.total_cells();
  std::vector<long> tuple(k, 0);
  cd acc(0, 0);
  while (true) {
    cd prod(1, 0);
    std::vector<double> s(nu, 0.0);
    for (int l = 0; l < k; ++l) {
      std::vector<double> c = gN.grid.cell_center(tuple[l]);
      double phase = 0.0;
      for (int a = 0; a < nu; ++a) {
        s[a] += c[a];
        phase += double(p[l][a]) / N * c[a];
      }
      prod *= gN.mass[tuple[l]](indices[l], indices[l]).real() *
              std::exp(cd(0.0, phase));
    }
    acc += prod * w(s.data());
    int l = k - 1;
    while (l >= 0 && ++tuple[l] >= total) tuple[l--] = 0;
    if (l < 0) break;
  }
  return acc;
}

std::complex<double> phi_lattice(const CovarianceTable& cov,
                                 const std::vector<int>& indices,
                                 const std::vector<std::vector<int>>& p, int N,
                                 double alpha, const SlowVarying& L) {
  const int k = int(indices.size());
  const int nu = cov.nu();
  if (k < 1) throw InvalidInput("need at least one index");
  if (N < 1) throw InvalidInput("block size N must be positive");
  if (int(p.size()) != k) throw InvalidInput("need one lattice point per factor");
  int pmax = 0;
  for (const auto& pl : p) {
    if (int(pl.size()) != nu)
      throw InvalidInput("lattice point dimension mismatch");
    for (int c : pl) pmax = std::max(pmax, std::abs(c));
  }
  if (N - 1 + pmax > cov.max_lag())
    throw InvalidInput("covariance table too small for the requested block");

  double sum = 0.0;
  std::vector<int> arg(nu);
  if (nu == 1) {
    for (int y = -(N - 1); y <= N - 1; ++y) {
      double prod = double(N - std::abs(y));
      for (int l = 0; l < k && prod != 0.0; ++l) {
        arg[0] = y + p[l][0];
        prod *= cov.entry(indices[l], indices[l], arg);
      }
      sum += prod;
    }
  } else if (nu == 2) {
    for (int y1 = -(N - 1); y1 <= N - 1; ++y1)
      for (int y2 = -(N - 1); y2 <= N - 1; ++y2) {
        double prod = double(N - std::abs(y1)) * double(N - std::abs(y2));
        for (int l = 0; l < k && prod != 0.0; ++l) {
          arg[0] = y1 + p[l][0];
          arg[1] = y2 + p[l][1];
          prod *= cov.entry(indices[l], indices[l], arg);
        }
        sum += prod;
      }
  } else {
    throw InvalidInput("lattice transform supports nu in {1,2}");
  }
  double norm =
      std::pow(double(N), k * alpha - 2.0 * nu) / std::pow(L(double(N)), k);
  return cd(norm * sum, 0.0);
}

}  // namespace lrd
