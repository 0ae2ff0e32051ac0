#include "lrdlab/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <ostream>

#include "lrdlab/fft.hpp"
#include "lrdlab/quadrature.hpp"

namespace lrd {

namespace {

using cd = std::complex<double>;

// 0 -> 1 with vanishing first three derivatives at both ends
double smoothstep3(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * s * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s);
}

// 1 on [0, full/2], smooth decay to 0 at full
double cutout(double absx, double full) {
  double half = 0.5 * full;
  if (absx <= half) return 1.0;
  if (absx >= full) return 0.0;
  return 1.0 - smoothstep3((absx - half) / half);
}

constexpr int kInnerShells = 60;

// one-sided singular profile integral over (0, pi):
// A_p = int_0^pi x^(alpha-1) h(x) e^{ipx} dx, split into windowed FFT part,
// dyadic shells and the closed-form core.  grid_m is the full-torus FFT size.
struct ProfileSplit {
  double delta = 0.0;
  double eps = 0.0;
  double core = 0.0;  // h(0) eps^alpha / alpha
};

ProfileSplit make_split(double h0, double alpha, int grid_m, int window_cells) {
  ProfileSplit s;
  s.delta = window_cells * (2.0 * M_PI / grid_m);
  s.eps = s.delta * std::ldexp(1.0, -kInnerShells);
  s.core = h0 * std::pow(s.eps, alpha) / alpha;
  return s;
}

cd inner_profile(const SpectralDensityModel& m, double alpha,
                 const ProfileSplit& sp, int p) {
  cd total = sp.core;
  double hi = sp.delta;
  for (int s = 0; s < kInnerShells; ++s) {
    double lo = 0.5 * hi;
    total += integrate_oscillatory(
        [&](double x) -> cd {
          return std::pow(x, alpha - 1.0) * m.h(&x) * cutout(x, sp.delta);
        },
        double(p), lo, hi);
    hi = lo;
  }
  return total;
}

// direct midpoint sum of the windowed outer profile on a grid of grid_m
// points over the torus (one-sided, x in (0, pi))
cd outer_profile_direct(const SpectralDensityModel& m, double alpha,
                        const ProfileSplit& sp, int grid_m, int p) {
  double dx = 2.0 * M_PI / grid_m;
  cd total = 0.0;
  for (int i = 0; i < grid_m / 2; ++i) {
    double x = (i + 0.5) * dx;
    double w = 1.0 - cutout(x, sp.delta);
    if (w == 0.0) continue;
    total += std::pow(x, alpha - 1.0) * m.h(&x) * w *
             std::exp(cd(0.0, p * x));
  }
  return total * dx;
}

}  // namespace

CovarianceTable CovarianceTable::from_model(const SpectralDensityModel& m,
                                            int max_lag,
                                            const CovarianceQuadratureOptions& opt) {
  m.validate();
  if (max_lag < 1) throw InvalidInput("max_lag must be >= 1");
  const int nu = m.dims.nu;
  const int d = m.dims.d;
  const double alpha = m.params.alpha;

  CovarianceTable t;
  t.nu_ = nu;
  t.d_ = d;
  t.max_lag_ = max_lag;

  if (nu == 1) {
    const int M = opt.grid > 0 ? opt.grid : (1 << 20);
    const int wc = opt.window_cells > 0 ? opt.window_cells : 512;
    if (max_lag > M / 4)
      throw InvalidInput("max_lag too large for the quadrature grid");
    ProfileSplit sp = make_split(m.h0(), alpha, M, wc);

    double dx = 2.0 * M_PI / M;
    std::vector<cd> buf(M, cd(0.0, 0.0));
    for (int i = 0; i < M / 2; ++i) {
      double x = (i + 0.5) * dx;
      double w = 1.0 - cutout(x, sp.delta);
      if (w != 0.0) buf[i] = std::pow(x, alpha - 1.0) * m.h(&x) * w;
    }
    fft_inplace(buf, true);

    const double dir_plus[1] = {1.0}, dir_minus[1] = {-1.0};
    Eigen::MatrixXcd bp = m.b_at(dir_plus);
    Eigen::MatrixXcd bm = m.b_at(dir_minus);

    t.store_.resize(max_lag + 1);
    for (int p = 0; p <= max_lag; ++p) {
      cd outer = dx * std::exp(cd(0.0, p * dx * 0.5)) * buf[p];
      cd a = outer + inner_profile(m, alpha, sp, p);
      Eigen::MatrixXcd r = bp * a + bm * std::conj(a);
      t.imag_residue_ =
          std::max(t.imag_residue_, r.imag().cwiseAbs().maxCoeff());
      t.store_[p] = r.real();
    }

    if (opt.self_check) {
      for (int p : {0, std::min(1, max_lag), max_lag}) {
        cd inner = inner_profile(m, alpha, sp, p);
        cd a1 = outer_profile_direct(m, alpha, sp, M, p) + inner;
        cd a2 = outer_profile_direct(m, alpha, sp, 2 * M, p) + inner;
        Eigen::MatrixXcd r1 = bp * a1 + bm * std::conj(a1);
        Eigen::MatrixXcd r2 = bp * a2 + bm * std::conj(a2);
        double scale = r2.cwiseAbs().maxCoeff() + 1e-300;
        t.self_check_defect_ = std::max(
            t.self_check_defect_, (r1 - r2).cwiseAbs().maxCoeff() / scale);
      }
      if (t.self_check_defect_ > opt.self_check_tol)
        throw NumericFailure(
            "covariance quadrature failed the grid-doubling self check");
    }
    return t;
  }

  if (nu == 2) {
    const int G = opt.grid > 0 ? opt.grid : 1024;
    const int wc = opt.window_cells > 0 ? opt.window_cells : 24;
    if (max_lag > G / 4)
      throw InvalidInput("max_lag too large for the quadrature grid");
    const double dx = 2.0 * M_PI / G;
    const double delta = wc * dx;
    const int side = 2 * max_lag + 1;
    t.store_.assign(std::size_t(side) * side,
                    Eigen::MatrixXd::Zero(d, d));

    // outer windowed FFT per matrix entry
    std::vector<Eigen::MatrixXcd> outer(std::size_t(side) * side,
                                        Eigen::MatrixXcd::Zero(d, d));
    {
      std::vector<std::vector<cd>> bufs(
          std::size_t(d) * d, std::vector<cd>(std::size_t(G) * G, cd(0, 0)));
      for (int i = 0; i < G; ++i) {
        double x0 = -M_PI + (i + 0.5) * dx;
        for (int jj = 0; jj < G; ++jj) {
          double x1 = -M_PI + (jj + 0.5) * dx;
          double rad = std::hypot(x0, x1);
          double w = 1.0 - cutout(rad, delta);
          if (w == 0.0) continue;
          double u[2] = {x0, x1};
          Eigen::MatrixXcd g = m.eval(u) * w;
          for (int a = 0; a < d; ++a)
            for (int b2 = 0; b2 < d; ++b2)
              bufs[a * d + b2][std::size_t(i) * G + jj] = g(a, b2);
        }
      }
      for (auto& buf : bufs) fft2_inplace(buf, G, G, true);
      for (int p1 = -max_lag; p1 <= max_lag; ++p1)
        for (int p2 = -max_lag; p2 <= max_lag; ++p2) {
          int b1 = ((p1 % G) + G) % G, b2i = ((p2 % G) + G) % G;
          cd phase = dx * dx *
                     std::exp(cd(0.0, (p1 + p2) * (-M_PI + 0.5 * dx)));
          Eigen::MatrixXcd r(d, d);
          for (int a = 0; a < d; ++a)
            for (int c = 0; c < d; ++c)
              r(a, c) = phase * bufs[a * d + c][std::size_t(b1) * G + b2i];
          outer[std::size_t(p1 + max_lag) * side + (p2 + max_lag)] = r;
        }
    }

    // inner polar rule: dyadic radial shells x uniform angles
    const int n_ang = 64, n_rad = 10, shells = 40;
    const double eps = delta * std::ldexp(1.0, -shells);
    std::vector<Eigen::MatrixXcd> bcache(n_ang);
    std::vector<double> ca(n_ang), sa(n_ang);
    Eigen::MatrixXcd bsum = Eigen::MatrixXcd::Zero(d, d);
    for (int a = 0; a < n_ang; ++a) {
      double th = -M_PI + (a + 0.5) * 2.0 * M_PI / n_ang;
      ca[a] = std::cos(th);
      sa[a] = std::sin(th);
      double dir[2] = {ca[a], sa[a]};
      bcache[a] = m.b_at(dir);
      bsum += bcache[a];
    }
    // closed-form core (phase ~ 1 over |x| <= eps)
    Eigen::MatrixXcd core =
        bsum * (2.0 * M_PI / n_ang) * m.h0() * std::pow(eps, alpha) / alpha;

    const GaussRule& gl = gauss_legendre(n_rad);
    Eigen::VectorXcd e1(side), e2(side);
    std::vector<Eigen::MatrixXcd> inner(std::size_t(side) * side, core);
    double hi = delta;
    for (int s = 0; s < shells; ++s) {
      double lo = 0.5 * hi, mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      for (int i = 0; i < n_rad; ++i) {
        double rho = mid + half * gl.nodes[i];
        double wr = half * gl.weights[i] * std::pow(rho, alpha - 1.0) *
                    cutout(rho, delta) * (2.0 * M_PI / n_ang);
        for (int a = 0; a < n_ang; ++a) {
          double x0 = rho * ca[a], x1 = rho * sa[a];
          double u[2] = {x0, x1};
          double wh = wr * m.h(u);
          cd f1 = std::exp(cd(0.0, x0)), f2 = std::exp(cd(0.0, x1));
          e1[0] = std::exp(cd(0.0, -max_lag * x0));
          e2[0] = std::exp(cd(0.0, -max_lag * x1));
          for (int q = 1; q < side; ++q) {
            e1[q] = e1[q - 1] * f1;
            e2[q] = e2[q - 1] * f2;
          }
          for (int q1 = 0; q1 < side; ++q1) {
            cd w1 = wh * e1[q1];
            for (int q2 = 0; q2 < side; ++q2)
              inner[std::size_t(q1) * side + q2] += (w1 * e2[q2]) * bcache[a];
          }
        }
      }
      hi = lo;
    }

    for (int q1 = 0; q1 < side; ++q1)
      for (int q2 = 0; q2 < side; ++q2) {
        Eigen::MatrixXcd r =
            outer[std::size_t(q1) * side + q2] + inner[std::size_t(q1) * side + q2];
        t.imag_residue_ =
            std::max(t.imag_residue_, r.imag().cwiseAbs().maxCoeff());
        t.store_[std::size_t(q1) * side + q2] = r.real();
      }
    // exact reflection symmetry
    for (int p1 = -max_lag; p1 <= max_lag; ++p1)
      for (int p2 = -max_lag; p2 <= max_lag; ++p2) {
        if (p1 < 0 || (p1 == 0 && p2 < 0)) continue;
        t.store_[std::size_t(-p1 + max_lag) * side + (-p2 + max_lag)] =
            t.store_[std::size_t(p1 + max_lag) * side + (p2 + max_lag)]
                .transpose();
      }

    if (opt.self_check) {
      // doubling check on the outer part at lag 0 (inner part is fixed)
      Eigen::MatrixXcd o1 = Eigen::MatrixXcd::Zero(d, d),
                       o2 = Eigen::MatrixXcd::Zero(d, d);
      for (int pass = 0; pass < 2; ++pass) {
        int g2 = pass == 0 ? G : 2 * G;
        double dxx = 2.0 * M_PI / g2;
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d, d);
        for (int i = 0; i < g2; ++i) {
          double x0 = -M_PI + (i + 0.5) * dxx;
          for (int jj = 0; jj < g2; ++jj) {
            double x1 = -M_PI + (jj + 0.5) * dxx;
            double rad = std::hypot(x0, x1);
            double w = 1.0 - cutout(rad, delta);
            if (w == 0.0) continue;
            double u[2] = {x0, x1};
            acc += m.eval(u) * w;
          }
        }
        (pass == 0 ? o1 : o2) = acc * dxx * dxx;
      }
      double scale = (o2 + inner[std::size_t(max_lag) * side + max_lag])
                         .cwiseAbs()
                         .maxCoeff() +
                     1e-300;
      t.self_check_defect_ = (o1 - o2).cwiseAbs().maxCoeff() / scale;
      if (t.self_check_defect_ > opt.self_check_tol)
        throw NumericFailure(
            "covariance quadrature failed the grid-doubling self check");
    }
    return t;
  }

  throw InvalidInput("covariance quadrature supports nu in {1,2}");
}

CovarianceTable CovarianceTable::from_bounded_density(
    const LatticeDims& dims,
    const std::function<Eigen::MatrixXcd(const double*)>& g, int max_lag,
    int grid) {
  dims.validate();
  if (max_lag < 1) throw InvalidInput("max_lag must be >= 1");
  CovarianceTable t;
  t.nu_ = dims.nu;
  t.d_ = dims.d;
  t.max_lag_ = max_lag;
  const int d = dims.d;

  if (dims.nu == 1) {
    const int M = grid;
    if (max_lag > M / 4)
      throw InvalidInput("max_lag too large for the quadrature grid");
    double dx = 2.0 * M_PI / M;
    std::vector<std::vector<cd>> bufs(std::size_t(d) * d,
                                      std::vector<cd>(M, cd(0, 0)));
    for (int i = 0; i < M; ++i) {
      double x = -M_PI + (i + 0.5) * dx;
      Eigen::MatrixXcd gg = g(&x);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) bufs[a * d + b][i] = gg(a, b);
    }
    for (auto& buf : bufs) fft_inplace(buf, true);
    t.store_.resize(max_lag + 1);
    for (int p = 0; p <= max_lag; ++p) {
      cd phase = dx * std::exp(cd(0.0, p * (-M_PI + 0.5 * dx)));
      Eigen::MatrixXcd r(d, d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) r(a, b) = phase * bufs[a * d + b][p];
      t.imag_residue_ = std::max(t.imag_residue_, r.imag().cwiseAbs().maxCoeff());
      t.store_[p] = r.real();
    }
    return t;
  }

  if (dims.nu == 2) {
    const int G = grid;
    if (max_lag > G / 4)
      throw InvalidInput("max_lag too large for the quadrature grid");
    double dx = 2.0 * M_PI / G;
    const int side = 2 * max_lag + 1;
    std::vector<std::vector<cd>> bufs(
        std::size_t(d) * d, std::vector<cd>(std::size_t(G) * G, cd(0, 0)));
    for (int i = 0; i < G; ++i) {
      double x0 = -M_PI + (i + 0.5) * dx;
      for (int jj = 0; jj < G; ++jj) {
        double x1 = -M_PI + (jj + 0.5) * dx;
        double u[2] = {x0, x1};
        Eigen::MatrixXcd gg = g(u);
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b)
            bufs[a * d + b][std::size_t(i) * G + jj] = gg(a, b);
      }
    }
    for (auto& buf : bufs) fft2_inplace(buf, G, G, true);
    t.store_.assign(std::size_t(side) * side, Eigen::MatrixXd::Zero(d, d));
    for (int p1 = -max_lag; p1 <= max_lag; ++p1)
      for (int p2 = -max_lag; p2 <= max_lag; ++p2) {
        int b1 = ((p1 % G) + G) % G, b2 = ((p2 % G) + G) % G;
        cd phase =
            dx * dx * std::exp(cd(0.0, (p1 + p2) * (-M_PI + 0.5 * dx)));
        Eigen::MatrixXcd r(d, d);
        for (int a = 0; a < d; ++a)
          for (int c = 0; c < d; ++c)
            r(a, c) = phase * bufs[a * d + c][std::size_t(b1) * G + b2];
        t.imag_residue_ = std::max(t.imag_residue_, r.imag().cwiseAbs().maxCoeff());
        t.store_[std::size_t(p1 + max_lag) * side + (p2 + max_lag)] = r.real();
      }
    for (int p1 = -max_lag; p1 <= max_lag; ++p1)
      for (int p2 = -max_lag; p2 <= max_lag; ++p2) {
        if (p1 < 0 || (p1 == 0 && p2 < 0)) continue;
        t.store_[std::size_t(-p1 + max_lag) * side + (-p2 + max_lag)] =
            t.store_[std::size_t(p1 + max_lag) * side + (p2 + max_lag)]
                .transpose();
      }
    return t;
  }

  throw InvalidInput("covariance quadrature supports nu in {1,2}");
}

CovarianceTable CovarianceTable::from_values(
    const LatticeDims& dims, int max_lag,
    const std::function<Eigen::MatrixXd(const std::vector<int>&)>& r) {
  dims.validate();
  if (max_lag < 1) throw InvalidInput("max_lag must be >= 1");
  CovarianceTable t;
  t.nu_ = dims.nu;
  t.d_ = dims.d;
  t.max_lag_ = max_lag;
  auto fetch = [&](const std::vector<int>& p) {
    Eigen::MatrixXd v = r(p);
    if (v.rows() != dims.d || v.cols() != dims.d)
      throw InvalidInput("covariance callback returned a wrong-sized matrix");
    return v;
  };
  if (dims.nu == 1) {
    t.store_.resize(max_lag + 1);
    for (int p = 0; p <= max_lag; ++p) t.store_[p] = fetch({p});
    return t;
  }
  if (dims.nu == 2) {
    int side = 2 * max_lag + 1;
    t.store_.resize(std::size_t(side) * side);
    for (int p1 = -max_lag; p1 <= max_lag; ++p1)
      for (int p2 = -max_lag; p2 <= max_lag; ++p2)
        t.store_[std::size_t(p1 + max_lag) * side + (p2 + max_lag)] =
            fetch({p1, p2});
    return t;
  }
  throw InvalidInput("covariance tables support nu in {1,2}");
}

Eigen::MatrixXd CovarianceTable::at(const std::vector<int>& p) const {
  if (int(p.size()) != nu_) throw InvalidInput("lag dimension mismatch");
  for (int c : p)
    if (std::abs(c) > max_lag_) throw InvalidInput("lag outside the table");
  if (nu_ == 1) {
    if (p[0] >= 0) return store_[p[0]];
    return store_[-p[0]].transpose();
  }
  int side = 2 * max_lag_ + 1;
  return store_[std::size_t(p[0] + max_lag_) * side + (p[1] + max_lag_)];
}

double CovarianceTable::entry(int j, int jp, const std::vector<int>& p) const {
  if (j < 0 || j >= d_ || jp < 0 || jp >= d_)
    throw InvalidInput("coordinate index out of range");
  if (int(p.size()) != nu_) throw InvalidInput("lag dimension mismatch");
  for (int c : p)
    if (std::abs(c) > max_lag_) throw InvalidInput("lag outside the table");
  if (nu_ == 1)
    return p[0] >= 0 ? store_[p[0]](j, jp) : store_[-p[0]](jp, j);
  int side = 2 * max_lag_ + 1;
  return store_[std::size_t(p[0] + max_lag_) * side + (p[1] + max_lag_)](j, jp);
}

std::vector<double> CovarianceTable::diagonal_profile(int j) const {
  if (nu_ != 1) throw InvalidInput("diagonal profile is one-dimensional only");
  if (j < 0 || j >= d_) throw InvalidInput("coordinate index out of range");
  std::vector<double> out(max_lag_ + 1);
  for (int p = 0; p <= max_lag_; ++p) out[p] = store_[p](j, j);
  return out;
}

CovarianceTable CovarianceTable::normalized(Eigen::VectorXd* pre_diag) const {
  Eigen::MatrixXd r0 = at(std::vector<int>(nu_, 0));
  Eigen::VectorXd diag = r0.diagonal();
  if (pre_diag) *pre_diag = diag;
  for (int j = 0; j < d_; ++j)
    if (!(diag[j] > 0.0))
      throw NumericFailure("zero-lag variance is not positive");
  Eigen::VectorXd inv = diag.cwiseSqrt().cwiseInverse();
  CovarianceTable out(*this);
  for (auto& mtx : out.store_)
    mtx = inv.asDiagonal() * mtx * inv.asDiagonal();
  return out;
}

std::vector<std::pair<double, double>> CovarianceTable::verify_lrd(
    const LongRangeParams& params, const SlowVarying& L, const AngularKernel& a,
    const std::vector<double>& thresholds) const {
  std::vector<std::pair<double, double>> out;
  std::vector<std::vector<int>> lags;
  if (nu_ == 1) {
    for (int p = 1; p <= max_lag_; ++p) {
      lags.push_back({p});
      lags.push_back({-p});
    }
  } else {
    for (int p1 = -max_lag_; p1 <= max_lag_; ++p1)
      for (int p2 = -max_lag_; p2 <= max_lag_; ++p2)
        if (p1 != 0 || p2 != 0) lags.push_back({p1, p2});
  }
  for (double T : thresholds) {
    double sup = 0.0;
    bool any = false;
    for (const auto& p : lags) {
      double norm = 0.0;
      for (int c : p) norm += double(c) * c;
      norm = std::sqrt(norm);
      if (norm < T) continue;
      any = true;
      std::vector<double> dir(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) dir[i] = p[i] / norm;
      double env = std::pow(norm, -params.alpha) * L(norm);
      Eigen::MatrixXd want = a.eval(dir.data()) * env;
      Eigen::MatrixXd got = at(p);
      sup = std::max(sup, (got - want).cwiseAbs().maxCoeff() / env);
    }
    if (!any) throw InvalidInput("threshold exceeds the table range");
    out.emplace_back(T, sup);
  }
  return out;
}

AngularKernel CovarianceTable::estimate_angular(const LongRangeParams& params,
                                                const SlowVarying& L,
                                                const std::vector<int>& ray_lags,
                                                double instability_tol) const {
  if (ray_lags.empty()) throw InvalidInput("no ray lags given");
  if (nu_ != 1)
    throw InvalidInput("angular estimation is implemented for nu = 1");
  std::vector<Eigen::MatrixXd> est;
  for (int p : ray_lags) {
    if (p < 1 || p > max_lag_) throw InvalidInput("ray lag outside the table");
    est.push_back(at({p}) * std::pow(double(p), params.alpha) / L(double(p)));
  }
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d_, d_);
  for (const auto& e : est) mean += e;
  mean /= double(est.size());
  double scale = mean.cwiseAbs().maxCoeff() + 1e-300;
  for (const auto& e : est)
    if ((e - mean).cwiseAbs().maxCoeff() / scale > instability_tol)
      throw NumericFailure("angular estimate is unstable across ray lags");
  AngularKernel a;
  a.nu = 1;
  a.d = d_;
  // r(-p) = r(p)^T makes the opposite-direction estimate the transpose;
  // averaging the two enforces a(-x) = a(x)^T exactly.
  a.plus = 0.5 * (mean + mean.transpose());
  a.minus = a.plus.transpose();
  return a;
}

void CovarianceTable::write_csv(std::ostream& os) const {
  for (int i = 0; i < nu_; ++i) os << "p" << (i + 1) << ",";
  os << "j,jprime,r\n";
  std::vector<std::vector<int>> lags;
  if (nu_ == 1) {
    for (int p = -max_lag_; p <= max_lag_; ++p) lags.push_back({p});
  } else {
    for (int p1 = -max_lag_; p1 <= max_lag_; ++p1)
      for (int p2 = -max_lag_; p2 <= max_lag_; ++p2) lags.push_back({p1, p2});
  }
  os.precision(17);
  for (const auto& p : lags) {
    Eigen::MatrixXd r = at(p);
    for (int j = 0; j < d_; ++j)
      for (int jp = 0; jp < d_; ++jp) {
        for (int c : p) os << c << ",";
        os << (j + 1) << "," << (jp + 1) << "," << r(j, jp) << "\n";
      }
  }
}

}  // namespace lrd
