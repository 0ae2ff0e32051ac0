#include "lrdlab/quadrature.hpp"

#include <cmath>
#include <complex>

#include "doctest.h"
#include "lrdlab/common.hpp"

using namespace lrd;

TEST_CASE("gauss legendre rule basics") {
  const GaussRule& r = gauss_legendre(12);
  CHECK(r.nodes.size() == 12);
  double wsum = 0.0;
  for (double w : r.weights) wsum += w;
  CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  // exact for polynomials up to degree 23
  double m22 = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i)
    m22 += r.weights[i] * std::pow(r.nodes[i], 22);
  CHECK(m22 == doctest::Approx(2.0 / 23.0).epsilon(1e-13));
}

TEST_CASE("fixed rule integrals") {
  CHECK(integrate_gl([](double x) { return std::pow(x, 9); }, 0.0, 1.0) ==
        doctest::Approx(0.1).epsilon(1e-13));
  CHECK(integrate_gl([](double x) { return std::sin(x); }, 0.0, M_PI, 20) ==
        doctest::Approx(2.0).epsilon(1e-13));
  std::complex<double> c =
      integrate_gl_c([](double x) { return std::exp(std::complex<double>(0.0, x)); },
                     0.0, 1.0, 16);
  CHECK(c.real() == doctest::Approx(std::sin(1.0)).epsilon(1e-13));
  CHECK(c.imag() == doctest::Approx(1.0 - std::cos(1.0)).epsilon(1e-13));
}

TEST_CASE("adaptive integration of peaked integrands") {
  double got = integrate_adaptive([](double x) { return std::exp(-50.0 * x * x); },
                                  -1.0, 1.0);
  double want = std::sqrt(M_PI / 50.0) * std::erf(std::sqrt(50.0));
  CHECK(got == doctest::Approx(want).epsilon(1e-10));

  const double a = 0.01;
  got = integrate_adaptive([&](double x) { return 1.0 / (a * a + x * x); }, -1.0,
                           1.0);
  want = 2.0 / a * std::atan(1.0 / a);
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("oscillatory integral against the closed form") {
  for (double f : {3.0, 41.5, -87.0}) {
    std::complex<double> got = integrate_oscillatory(
        [](double) { return std::complex<double>(1.0, 0.0); }, f, 0.0, 10.0);
    std::complex<double> i(0.0, 1.0);
    std::complex<double> want = (std::exp(i * f * 10.0) - 1.0) / (i * f);
    CHECK(std::abs(got - want) <= 1e-10);
  }
  // linear amplitude: int_0^b x e^{ifx} dx
  double f = 25.0, b = 4.0;
  std::complex<double> i(0.0, 1.0);
  std::complex<double> got = integrate_oscillatory(
      [](double x) { return std::complex<double>(x, 0.0); }, f, 0.0, b);
  std::complex<double> eib = std::exp(i * f * b);
  std::complex<double> want = (eib * (b / (i * f)) - (eib - 1.0) / (i * f) / (i * f));
  CHECK(std::abs(got - want) <= 1e-10);
}

TEST_CASE("corner cell mass in one dimension") {
  auto one = [](const double*) { return 1.0; };
  double w = 0.125, alpha = 0.4;
  CHECK(power_corner_mass(1, alpha, one, {w}) ==
        doctest::Approx(std::pow(w, alpha) / alpha).epsilon(1e-12));
  CHECK(power_corner_mass(1, alpha, one, {-w}) ==
        doctest::Approx(std::pow(w, alpha) / alpha).epsilon(1e-12));
  CHECK(power_corner_mass(1, 1.0, one, {w}) == doctest::Approx(w).epsilon(1e-12));
}

TEST_CASE("corner cell mass in two dimensions") {
  auto one = [](const double*) { return 1.0; };

  // alpha = nu makes the integrand 1, so the mass is the cell area
  CHECK(power_corner_mass(2, 2.0, one, {0.25, 0.5}) ==
        doctest::Approx(0.125).epsilon(1e-10));

  // independent polar oracle for a rectangle [0,w1]x[0,w2]
  double w1 = 0.25, w2 = 0.125, alpha = 0.7;
  double oracle = integrate_adaptive(
      [&](double th) {
        double rho = std::min(w1 / std::cos(th), w2 / std::sin(th));
        return std::pow(rho, alpha) / alpha;
      },
      1e-9, M_PI / 2 - 1e-9, 1e-12, 1e-15);
  double got = power_corner_mass(2, alpha, one, {w1, w2});
  CHECK(got == doctest::Approx(oracle).epsilon(1e-7));

  // graded midpoint brute force at loose tolerance
  double brute = 0.0;
  const int levels = 40, cells = 24;
  double x_hi = w1, y_hi = w2;
  for (int lv = 0; lv < levels; ++lv) {
    double x_lo = (lv == levels - 1) ? 0.0 : x_hi * 0.5;
    double y_lo = (lv == levels - 1) ? 0.0 : y_hi * 0.5;
    // L-shaped shell between (x_lo,y_lo) and (x_hi,y_hi) boxes
    for (int i = 0; i < cells; ++i)
      for (int j = 0; j < cells; ++j) {
        double x = (i + 0.5) * x_hi / cells;
        double y = (j + 0.5) * y_hi / cells;
        if (x < x_lo && y < y_lo) continue;
        double r2 = x * x + y * y;
        brute += std::pow(r2, (alpha - 2.0) / 2.0) * (x_hi / cells) * (y_hi / cells);
      }
    x_hi = x_lo;
    y_hi = y_lo;
    if (x_hi == 0.0) break;
  }
  CHECK(got == doctest::Approx(brute).epsilon(2e-3));

  // quadrant with a sign-sensitive angular factor
  auto qdir = [](const double* u) { return 1.0 + 0.5 * u[0] - 0.25 * u[1]; };
  double neg = power_corner_mass(2, alpha, qdir, {-w1, w2});
  double ref = integrate_adaptive(
      [&](double th) {
        double c = std::cos(th), s = std::sin(th);
        double rho = std::min(w1 / c, w2 / s);
        double dir[2] = {-c, s};
        return qdir(dir) * std::pow(rho, alpha) / alpha;
      },
      1e-9, M_PI / 2 - 1e-9, 1e-12, 1e-15);
  CHECK(neg == doctest::Approx(ref).epsilon(1e-7));

  CHECK_THROWS_AS(power_corner_mass(3, 0.5, one, {1.0, 1.0, 1.0}), InvalidInput);
  CHECK_THROWS_AS(power_corner_mass(2, 0.5, one, {1.0}), InvalidInput);
}
