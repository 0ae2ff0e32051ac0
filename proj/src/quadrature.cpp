#include "lrdlab/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "lrdlab/common.hpp"

namespace lrd {

static GaussRule make_gauss_legendre(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0.0, p1 = 0.0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      double dp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = 0.0;
    for (int j = 0; j < n; ++j) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
    }
    double dp = n * (x * p0 - p1) / (x * x - 1.0);
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int n) {
  const GaussRule& r = gauss_legendre(n);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
  return s * half;
}

std::complex<double> integrate_gl_c(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    int n) {
  const GaussRule& r = gauss_legendre(n);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  std::complex<double> s = 0.0;
  for (int i = 0; i < n; ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
  return s * half;
}

static double adapt_rec(const std::function<double(double)>& f, double a,
                        double b, double whole, double rel_tol, double abs_tol,
                        int depth, int max_depth) {
  double m = 0.5 * (a + b);
  double left = integrate_gl(f, a, m);
  double right = integrate_gl(f, m, b);
  double err = std::abs(left + right - whole);
  if (err <= abs_tol + rel_tol * std::abs(left + right)) return left + right;
  if (depth >= max_depth)
    throw NumericFailure("integrate_adaptive: subdivision depth exhausted");
  return adapt_rec(f, a, m, left, rel_tol, abs_tol / 2, depth + 1, max_depth) +
         adapt_rec(f, m, b, right, rel_tol, abs_tol / 2, depth + 1, max_depth);
}

double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double rel_tol, double abs_tol,
                          int max_depth) {
  if (!(b > a)) return 0.0;
  return adapt_rec(f, a, b, integrate_gl(f, a, b), rel_tol, abs_tol, 0,
                   max_depth);
}

std::complex<double> integrate_oscillatory(
    const std::function<std::complex<double>(double)>& smooth, double freq,
    double a, double b, int points_per_panel) {
  double len = b - a;
  if (!(len > 0.0)) return 0.0;
  int panels = std::max<int>(1, int(std::ceil(std::abs(freq) * len / 3.0)));
  auto f = [&](double x) {
    return smooth(x) * std::exp(std::complex<double>(0.0, freq * x));
  };
  std::complex<double> s = 0.0;
  for (int i = 0; i < panels; ++i) {
    double pa = a + len * i / panels;
    double pb = a + len * (i + 1) / panels;
    s += integrate_gl_c(f, pa, pb, points_per_panel);
  }
  return s;
}

double power_corner_mass(int nu, double alpha,
                         const std::function<double(const double*)>& angular,
                         const std::vector<double>& corner_extent) {
  if (int(corner_extent.size()) != nu)
    throw InvalidInput("power_corner_mass: extent/nu mismatch");
  if (nu == 1) {
    double w = corner_extent[0];
    double sgn = w >= 0.0 ? 1.0 : -1.0;
    double q = angular(&sgn);
    return q * std::pow(std::abs(w), alpha) / alpha;
  }
  if (nu == 2) {
    // Radial integral is exact: mass = int q(theta) rho_max(theta)^alpha /
    // alpha dtheta over the corner's angular sector.  rho_max has a kink
    // where the ray leaves through the other cell edge.
    double wx = corner_extent[0], wy = corner_extent[1];
    double ax = std::abs(wx), ay = std::abs(wy);
    double sx = wx >= 0.0 ? 1.0 : -1.0, sy = wy >= 0.0 ? 1.0 : -1.0;
    double split = std::atan2(ay, ax);
    auto f = [&](double th) {
      double c = std::cos(th), s = std::sin(th);
      double rho = std::min(c > 1e-300 ? ax / c : 1e300,
                            s > 1e-300 ? ay / s : 1e300);
      double dir[2] = {sx * c, sy * s};
      return angular(dir) * std::pow(rho, alpha) / alpha;
    };
    return integrate_adaptive(f, 0.0, split, 1e-12, 1e-15) +
           integrate_adaptive(f, split, M_PI / 2, 1e-12, 1e-15);
  }
  throw InvalidInput("power_corner_mass: only nu in {1,2} supported");
}

}  // namespace lrd
