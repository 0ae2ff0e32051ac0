#include "lrdlab/spectral_measure.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include "doctest.h"
#include "lrdlab/density.hpp"
#include "lrdlab/quadrature.hpp"

using namespace lrd;
using cd = std::complex<double>;

namespace {

SpectralDensityModel power_law_scalar() {
  return make_model(LatticeDims{1, 1}, LongRangeParams{0.4, 1},
                    SlowVarying::constant(), "one", {}, "raised_cosine_sq", {});
}

LimitSpectralModel plain_limit(int nu, double alpha) {
  LimitSpectralModel m;
  m.dims = LatticeDims{nu, 1};
  m.params = LongRangeParams{alpha, 1};
  m.h0 = 1.0;
  Eigen::MatrixXcd one = Eigen::MatrixXcd::Identity(1, 1);
  m.b = [one](const double*) { return one; };
  return m;
}

}  // namespace

TEST_CASE("cell grid enumeration and symmetry") {
  CellGrid g = CellGrid::uniform(2, M_PI, 6);
  CHECK(g.total_cells() == 36);
  CHECK(g.width(0) == doctest::Approx(M_PI / 3.0));
  for (long i = 0; i < g.total_cells(); ++i) {
    CHECK(g.pack(g.unpack(i)) == i);
    // negation is an involution pairing centers to their mirrors
    long n = g.negation(i);
    CHECK(g.negation(n) == i);
    auto c = g.cell_center(i);
    auto cn = g.cell_center(n);
    CHECK(cn[0] == doctest::Approx(-c[0]).epsilon(1e-14));
    CHECK(cn[1] == doctest::Approx(-c[1]).epsilon(1e-14));
  }
  std::vector<double> lo, hi;
  g.cell_bounds(g.origin_cell(), &lo, &hi);
  CHECK(lo[0] == doctest::Approx(0.0));
  CHECK(lo[1] == doctest::Approx(0.0));
  CHECK(g.aligned(0.0, 0));
  CHECK(g.aligned(-M_PI, 0));
  CHECK(!g.aligned(0.1, 0));
  CHECK_THROWS_AS(CellGrid::uniform(1, -1.0, 4), InvalidInput);
  CHECK_THROWS_AS(CellGrid::uniform(4, 1.0, 4), InvalidInput);
}

TEST_CASE("odd cell counts center the origin cell") {
  CellGrid g = CellGrid::uniform(1, 1.0, 5);
  long mid = g.origin_cell();
  CHECK(mid == 2);
  CHECK(g.negation(mid) == mid);
  auto c = g.cell_center(mid);
  CHECK(c[0] == doctest::Approx(0.0));
}

TEST_CASE("model measure total mass matches the covariance at lag zero") {
  SpectralDensityModel m = power_law_scalar();
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, 4096);
  g.validate();
  // two independent pipelines: cell quadrature vs covariance quadrature
  CHECK(g.total()(0, 0).real() ==
        doctest::Approx(5.1688663713029668).epsilon(1e-9));
  CHECK(std::abs(g.total()(0, 0).imag()) <= 1e-12);
}

TEST_CASE("pair model measure passes all per-cell invariants") {
  nlohmann::json bp = {{"rho", 0.6}, {"phase", 0.9}};
  SpectralDensityModel m =
      make_model(LatticeDims{1, 2}, LongRangeParams{0.4, 2},
                 SlowVarying::constant(), "pair_phase", bp, "raised_cosine_sq",
                 {});
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, 512);
  g.validate();
  auto [r, s] = quadratic_form_measures(g, 0, 1);
  for (size_t i = 0; i < r.size(); ++i) {
    CHECK(r[i] >= -1e-12);
    CHECK(s[i] >= -1e-12);
    // eigenvalue oracle on each 2x2 block
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g.mass[i]);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("two dimensional model measure validates") {
  SpectralDensityModel m =
      make_model(LatticeDims{2, 1}, LongRangeParams{0.7, 1},
                 SlowVarying::constant(), "one", {}, "raised_cosine", {});
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, 16);
  g.validate();
  // independent total: covariance r(0,0) of the same model
  CHECK(g.total()(0, 0).real() ==
        doctest::Approx(12.243660458039).epsilon(2e-6));
}

TEST_CASE("quadratic form substitution examples") {
  MatrixSpectralMeasureOnGrid g;
  g.grid = CellGrid::uniform(1, 1.0, 2);
  g.d = 2;
  Eigen::MatrixXcd a(2, 2);
  a << 2.0, 0.0, 0.0, 3.0;
  g.mass = {a, a};
  auto [r, s] = quadratic_form_measures(g, 0, 1);
  CHECK(r[0] == doctest::Approx(5.0));
  CHECK(s[0] == doctest::Approx(5.0));

  double c = 0.4;
  Eigen::MatrixXcd b(2, 2);
  b << 1.0, cd(0, c), cd(0, -c), 1.0;
  g.mass = {b, b};
  auto [r2, s2] = quadratic_form_measures(g, 0, 1);
  CHECK(r2[0] == doctest::Approx(2.0));
  CHECK(s2[0] == doctest::Approx(2.0 + 2.0 * c));

  CHECK_THROWS_AS(quadratic_form_measures(g, 1, 1), InvalidInput);

  Eigen::MatrixXcd bad(2, 2);
  bad << 1.0, -2.0, -2.0, 1.0;
  g.mass = {bad, bad};
  CHECK_THROWS_AS(quadratic_form_measures(g, 0, 1), NumericFailure);
}

TEST_CASE("limit cell masses follow the radial closed forms") {
  LimitSpectralModel m = plain_limit(1, 0.5);
  CHECK(m.cell_mass({1.0}, {2.0})(0, 0).real() ==
        doctest::Approx((std::pow(2.0, 0.5) - 1.0) / 0.5).epsilon(1e-13));
  // origin cell stays finite
  CHECK(m.cell_mass({-0.25}, {0.25})(0, 0).real() ==
        doctest::Approx(2.0 * std::pow(0.25, 0.5) / 0.5).epsilon(1e-13));

  LimitSpectralModel md = plain_limit(1, 0.5);
  md.dims.d = 2;
  Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2, 2);
  md.b = [id](const double*) { return id; };
  Eigen::MatrixXcd g = md.cell_mass({0.5}, {1.5});
  CHECK(std::abs(g(0, 1)) == 0.0);
  CHECK(g(0, 0).real() == doctest::Approx(g(1, 1).real()));
}

TEST_CASE("two dimensional limit mass agrees with a tensor quadrature oracle") {
  LimitSpectralModel m = plain_limit(2, 0.7);
  // rectangle away from the origin: plain tensor Gauss-Legendre oracle
  auto oracle = [&](double l1, double u1, double l2, double u2) {
    const GaussRule& rule = gauss_legendre(24);
    double acc = 0.0;
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j) {
        double x = 0.5 * (l1 + u1) + 0.5 * (u1 - l1) * rule.nodes[i];
        double y = 0.5 * (l2 + u2) + 0.5 * (u2 - l2) * rule.nodes[j];
        acc += rule.weights[i] * rule.weights[j] *
               std::pow(std::hypot(x, y), -1.3);
      }
    return acc * 0.25 * (u1 - l1) * (u2 - l2);
  };
  CHECK(m.cell_mass({0.5, 0.25}, {1.5, 1.0})(0, 0).real() ==
        doctest::Approx(oracle(0.5, 1.5, 0.25, 1.0)).epsilon(1e-10));
  CHECK(m.cell_mass({-1.5, 0.25}, {-0.5, 1.0})(0, 0).real() ==
        doctest::Approx(oracle(0.5, 1.5, 0.25, 1.0)).epsilon(1e-10));
  // straddling rectangle equals the sum of its four sign pieces
  double whole = m.cell_mass({-0.3, -0.2}, {0.5, 0.9})(0, 0).real();
  double parts = m.cell_mass({-0.3, -0.2}, {0.0, 0.0})(0, 0).real() +
                 m.cell_mass({0.0, 0.0}, {0.5, 0.9})(0, 0).real() +
                 m.cell_mass({-0.3, 0.0}, {0.0, 0.9})(0, 0).real() +
                 m.cell_mass({0.0, -0.2}, {0.5, 0.0})(0, 0).real();
  CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
}

TEST_CASE("homogeneity holds exactly for the limit measure") {
  LimitSpectralModel m1 = plain_limit(1, 0.4);
  CHECK(m1.homogeneity_residual({1.0}, {2.0}, 3.0) <= 1e-14);
  CHECK(m1.homogeneity_residual({1.0}, {2.0}, 1.0) == 0.0);
  LimitSpectralModel m2 = plain_limit(2, 0.7);
  for (double t : {0.5, 2.0, 3.0, 10.0}) {
    CHECK(m1.homogeneity_residual({-0.5}, {1.5}, t) <= 1e-8);
    CHECK(m2.homogeneity_residual({-0.5, 0.25}, {1.5, 2.0}, t) <= 1e-8);
    CHECK(m2.homogeneity_residual({-1.0, -1.0}, {1.0, 1.0}, t) <= 1e-8);
  }
}

TEST_CASE("rescaling arithmetic on boxes") {
  // Lebesgue/(2 pi) source density, N=4, alpha=0.5: [0,1) gets 1/(4 pi)
  auto lebesgue = [](const double*) {
    return Eigen::MatrixXcd::Constant(1, 1, 1.0 / (2.0 * M_PI));
  };
  Eigen::MatrixXcd v = rescaled_density_mass(
      LatticeDims{1, 1}, lebesgue, 4, SlowVarying::constant(), 0.5, {0.0},
      {1.0});
  CHECK(v(0, 0).real() == doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-12));

  // power-law source density: [0,1) maps to 1/alpha for every N
  LimitSpectralModel pl = plain_limit(1, 0.5);
  for (int N : {2, 3, 10, 64}) {
    Eigen::MatrixXcd w =
        rescaled_limit_mass(pl, N, SlowVarying::constant(), {0.0}, {1.0});
    CHECK(w(0, 0).real() == doctest::Approx(2.0).epsilon(1e-13));
  }

  // boxes outside the rescaled torus carry no mass
  Eigen::MatrixXcd z = rescaled_density_mass(
      LatticeDims{1, 1}, lebesgue, 4, SlowVarying::constant(), 0.5,
      {5.0 * M_PI * 4.0}, {6.0 * M_PI * 4.0});
  CHECK(z(0, 0) == cd(0, 0));
}

TEST_CASE("grid rescaling preserves the total mass scaling") {
  SpectralDensityModel m = power_law_scalar();
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, 1024);
  int N = 8;
  MatrixSpectralMeasureOnGrid gn =
      rescale_measure(g, N, m.L, m.params.alpha, 256);
  gn.validate();
  CHECK(gn.grid.half_width == doctest::Approx(N * M_PI));
  double want = std::pow(double(N), m.params.alpha) * g.total()(0, 0).real();
  CHECK(gn.total()(0, 0).real() == doctest::Approx(want).epsilon(1e-13));

  // per-cell blocks: each target cell is the scaled q-block sum
  Eigen::MatrixXcd first = gn.mass[0];
  Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(1, 1);
  for (int i = 0; i < 4; ++i) block += g.mass[i];
  CHECK(first(0, 0).real() ==
        doctest::Approx(std::pow(8.0, 0.4) * block(0, 0).real()).epsilon(1e-13));

  CHECK_THROWS_AS(rescale_measure(g, N, m.L, m.params.alpha, 300),
                  InvalidInput);
}

TEST_CASE("aligned box masses and out of range boxes") {
  SpectralDensityModel m = power_law_scalar();
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, 64);
  double w = g.grid.width(0);
  Eigen::MatrixXcd a = g.box_mass({0.0}, {4.0 * w});
  Eigen::MatrixXcd b = g.mass[32] + g.mass[33] + g.mass[34] + g.mass[35];
  CHECK(a(0, 0).real() == doctest::Approx(b(0, 0).real()).epsilon(1e-15));
  // boxes beyond the grid truncate to zero contribution
  CHECK(g.box_mass({10.0}, {20.0})(0, 0) == cd(0, 0));
  CHECK_THROWS_AS(g.box_mass({0.05}, {1.0}), InvalidInput);
}

TEST_CASE("fejer weight matches the direct exponential sum") {
  int N = 5;
  SumWeight w = fejer_weight(N, 1);
  for (double s : {0.0, 0.3, 2.0, -7.77, 31.4159}) {
    cd direct(0, 0);
    for (int u = 0; u < N; ++u) direct += std::exp(cd(0.0, u * s / N));
    double want = std::norm(direct) / double(N * N);
    CHECK(w(&s) == doctest::Approx(want).epsilon(1e-9));
  }
  // near-removable points reach the flat limit branch
  for (double s : {2.0 * M_PI * N, 4.0 * M_PI * N - 1e-7}) {
    CHECK(w(&s) == doctest::Approx(1.0).epsilon(1e-7));
  }
  double zero = 0.0;
  CHECK(w(&zero) == doctest::Approx(1.0));
  double removable = 2.0 * M_PI * N;
  CHECK(w(&removable) == doctest::Approx(1.0).epsilon(1e-9));
}

namespace {

MatrixSpectralMeasureOnGrid synthetic_measure() {
  MatrixSpectralMeasureOnGrid g;
  g.grid = CellGrid::uniform(1, 2.0 * M_PI, 8);
  g.d = 1;
  for (double v : {0.3, 0.5, 0.7, 1.1, 1.1, 0.7, 0.5, 0.3})
    g.mass.push_back(Eigen::MatrixXcd::Constant(1, 1, v));
  return g;
}

}  // namespace

TEST_CASE("product measure masses against frozen reference sums") {
  MatrixSpectralMeasureOnGrid g = synthetic_measure();
  g.validate();
  int N = 2;
  SumWeight w = fejer_weight(N, 1);

  CHECK(mu_product_total(g, {0, 0}, w) ==
        doctest::Approx(14.85053823869162).epsilon(1e-12));
  CHECK(mu_tail_mass(w, g, {0, 0}, M_PI) ==
        doctest::Approx(5.072476913210021).epsilon(1e-12));
  CHECK(mu_product_total(g, {0}, w) ==
        doctest::Approx(3.4156403124820485).epsilon(1e-12));
  CHECK(mu_tail_mass(w, g, {0}, M_PI) ==
        doctest::Approx(0.33149442406406937).epsilon(1e-12));
  CHECK(mu_product_total(g, {0, 0, 0}, w) ==
        doctest::Approx(72.47448124955137).epsilon(1e-12));

  cd four = mu_fourier_lattice(g, {0, 0}, N, {{1}, {3}});
  CHECK(four.real() == doctest::Approx(0.5656854249492391).epsilon(1e-12));
  CHECK(std::abs(four.imag()) <= 1e-12);

  // empty tail once the box covers the support
  CHECK(mu_tail_mass(w, g, {0, 0}, 2.0 * 2.0 * M_PI) == 0.0);
  // zero kernel kills the mass
  SumWeight zero = [](const double*) { return 0.0; };
  CHECK(mu_product_total(g, {0, 0}, zero) == 0.0);
  // dimensionality guard
  CHECK_THROWS_AS(mu_product_total(g, {0, 0, 0, 0}, w), InvalidInput);
}

TEST_CASE("lattice transform against frozen double sums") {
  auto exact = [](const std::vector<int>& p) {
    double ap = std::abs(p[0]);
    double v = ap == 0.0 ? 1.0 : std::pow(ap, -0.4);
    return Eigen::MatrixXd::Constant(1, 1, v);
  };
  CovarianceTable t = CovarianceTable::from_values(LatticeDims{1, 1}, 8, exact);
  SlowVarying L = SlowVarying::constant();

  cd a = phi_lattice(t, {0, 0}, {{1}, {-2}}, 4, 0.4, L);
  CHECK(a.real() == doctest::Approx(2.0174439034785006).epsilon(1e-13));
  CHECK(a.imag() == 0.0);
  cd b = phi_lattice(t, {0, 0}, {{-1}, {2}}, 4, 0.4, L);
  CHECK(b.real() == doctest::Approx(a.real()).epsilon(1e-15));
  cd z = phi_lattice(t, {0, 0}, {{0}, {0}}, 4, 0.4, L);
  CHECK(z.real() == doctest::Approx(2.48726890833521).epsilon(1e-13));
  CHECK(z.real() >= 0.0);
  cd k1 = phi_lattice(t, {0}, {{3}}, 4, 0.4, L);
  CHECK(k1.real() == doctest::Approx(1.20932193137542).epsilon(1e-13));
  CHECK_THROWS_AS(phi_lattice(t, {0}, {{6}}, 4, 0.4, L), InvalidInput);
}

TEST_CASE("white noise lattice transform has the closed form") {
  auto wn = [](const std::vector<int>& p) {
    return Eigen::MatrixXd::Constant(1, 1, p[0] == 0 ? 1.0 : 0.0);
  };
  CovarianceTable t = CovarianceTable::from_values(LatticeDims{1, 1}, 40, wn);
  SlowVarying L = SlowVarying::constant();
  for (int N : {2, 8, 32}) {
    cd v = phi_lattice(t, {0}, {{0}}, N, 0.4, L);
    CHECK(v.real() == doctest::Approx(std::pow(double(N), 0.4 - 1.0))
                          .epsilon(1e-14));
  }
}

TEST_CASE("lattice transform matches the measure side transform") {
  SpectralDensityModel m = power_law_scalar();
  int N = 64;
  int cells = 1 << 17;
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, cells);
  MatrixSpectralMeasureOnGrid gn =
      rescale_measure(g, N, m.L, m.params.alpha, cells);
  CovarianceTable cov = CovarianceTable::from_model(m, N + 4);

  // k = 2: Fourier side vs lattice side at several lattice points
  for (auto& p : std::vector<std::vector<std::vector<int>>>{
           {{0}, {0}}, {{1}, {-2}}, {{3}, {4}}}) {
    cd lhs = mu_fourier_lattice(gn, {0, 0}, N, p);
    cd rhs = phi_lattice(cov, {0, 0}, p, N, m.params.alpha, m.L);
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(rhs));
  }

  // k = 1 as well
  cd l1 = mu_fourier_lattice(gn, {0}, N, {{2}});
  cd r1 = phi_lattice(cov, {0}, {{2}}, N, m.params.alpha, m.L);
  CHECK(std::abs(l1 - r1) <= 1e-6 * std::abs(r1));

  // total product mass equals the transform at zero
  double total = mu_product_total(gn, {0, 0}, fejer_weight(N, 1));
  double phi0 = phi_lattice(cov, {0, 0}, {{0}, {0}}, N, m.params.alpha, m.L)
                    .real();
  CHECK(phi0 >= 0.0);
  CHECK(std::abs(total - phi0) <= 1e-4 * phi0);

  // tail mass at T = half the box is positive and below the total
  double tail = mu_tail_mass(fejer_weight(N, 1), gn, {0, 0}, N * M_PI / 2.0);
  CHECK(tail > 0.0);
  CHECK(tail < total);
}

TEST_CASE("rescaled measures approach the homogeneous limit on test functions") {
  SpectralDensityModel m = power_law_scalar();
  LimitSpectralModel g0 = LimitSpectralModel::from_model(m);

  auto bump1 = [](const double* x) {
    double u = x[0];
    return std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
  };
  auto bump2 = [](const double* x) {
    double u = (x[0] - 0.5) / 0.3;
    return std::abs(u) < 1.0 ? (1.0 - u * u) * (1.0 - u * u) : 0.0;
  };

  // limit-side integrals on a fine grid with exact cell masses
  auto limit_integral = [&](const std::function<double(const double*)>& f) {
    CellGrid grid = CellGrid::uniform(1, 2.0, 1 << 15);
    double acc = 0.0;
    std::vector<double> lo, hi;
    for (long i = 0; i < grid.total_cells(); ++i) {
      grid.cell_bounds(i, &lo, &hi);
      std::vector<double> c = grid.cell_center(i);
      acc += f(c.data()) * g0.cell_mass(lo, hi)(0, 0).real();
    }
    return acc;
  };

  int cells = 1 << 14;
  MatrixSpectralMeasureOnGrid src = measure_from_model(m, cells);
  std::vector<std::function<double(const double*)>> battery = {bump1, bump2};
  for (const auto& fn : battery) {
    double i0 = limit_integral(fn);
    std::vector<double> errs;
    for (int N : {4, 16, 64}) {
      MatrixSpectralMeasureOnGrid gn =
          rescale_measure(src, N, m.L, m.params.alpha, cells);
      errs.push_back(std::abs(gn.integral(0, 0, fn).real() - i0));
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
  }
}

TEST_CASE("measure csv export lists cells with bounds") {
  SpectralDensityModel m = power_law_scalar();
  MatrixSpectralMeasureOnGrid g = measure_from_model(m, 4);
  std::ostringstream os;
  g.write_csv(os);
  std::string s = os.str();
  CHECK(s.find("lo1,hi1,j,jprime,re,im") != std::string::npos);
  int lines = 0;
  for (char c : s) lines += (c == '\n');
  CHECK(lines == 1 + 4);
}
