#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace lrd {

struct GaussRule {
  std::vector<double> nodes;    // on [-1,1]
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre rule with n points (Newton iteration on P_n; cached).
const GaussRule& gauss_legendre(int n);

double integrate_gl(const std::function<double(double)>& f, double a, double b,
                    int n = 12);
std::complex<double> integrate_gl_c(
    const std::function<std::complex<double>(double)>& f, double a, double b,
    int n = 12);

// Adaptive bisection with a 12-point rule per panel; throws NumericFailure
// when max_depth is exhausted before the tolerance is met.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double rel_tol = 1e-11,
                          double abs_tol = 1e-14, int max_depth = 48);

// Integral of exp(i*freq*x)-type oscillatory integrands: the interval is cut
// into panels short enough that a 12-point rule resolves the phase.
std::complex<double> integrate_oscillatory(
    const std::function<std::complex<double>(double)>& smooth, double freq,
    double a, double b, int points_per_panel = 12);

// \int_cell |x|^(alpha-nu) q(x/|x|) dx for an axis-aligned cell whose closure
// touches the origin at a corner, evaluated in radial form (exact in the
// radial variable).  For nu=1 the cell is [0,w] or [-w,0] and q is a constant
// per side; for nu=2 the angular factor is integrated by adaptive quadrature
// with panel splits at the diagonal kinks.
double power_corner_mass(int nu, double alpha,
                         const std::function<double(const double*)>& angular,
                         const std::vector<double>& corner_extent);

}  // namespace lrd
