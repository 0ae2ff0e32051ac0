#include "lrdlab/sums.hpp"

#include <cmath>
#include <numeric>

namespace lrd {

namespace {

std::vector<double> field_values(const std::function<double(const std::vector<double>&)>& f,
                                 const FieldSample& sample) {
  long pts = sample.values.cols();
  int d = sample.dims.d;
  std::vector<double> out(pts);
  std::vector<double> x(d);
  for (long u = 0; u < pts; ++u) {
    for (int j = 0; j < d; ++j) x[j] = sample.values(j, u);
    out[u] = f(x);
  }
  return out;
}

// points p < N t with integer boundaries counted exactly
int rect_count(int block, double t) {
  if (t < 0.0 || t > 1.0)
    throw InvalidInput("rectangle coordinates must lie in [0,1]");
  int n = int(std::ceil(double(block) * t - 1e-9));
  return std::min(std::max(n, 0), block);
}

void check_diagonal_unit(const CovarianceTable& cov, int N) {
  if (cov.max_lag() < N - 1)
    throw InvalidInput("covariance table too small for the requested block");
  double diag_scale = 0.0;
  for (int j = 0; j < cov.d(); ++j)
    diag_scale = std::max(diag_scale, std::abs(cov.entry(j, j, std::vector<int>(cov.nu(), 0))));
  std::vector<int> lag(cov.nu(), 0);
  long span = 2L * (N - 1) + 1;
  long cells = ipow(span, cov.nu());
  for (long f = 0; f < cells; ++f) {
    long rest = f;
    for (int i = cov.nu() - 1; i >= 0; --i) {
      lag[i] = int(rest % span) - (N - 1);
      rest /= span;
    }
    Eigen::MatrixXd r = cov.at(lag);
    for (int j = 0; j < cov.d(); ++j)
      for (int jp = 0; jp < cov.d(); ++jp)
        if (j != jp && std::abs(r(j, jp)) > 1e-10 * diag_scale)
          throw InvalidInput(
              "exact moments need a diagonal covariance model (cross entry at "
              "a lag is nonzero)");
  }
  std::vector<int> zero(cov.nu(), 0);
  for (int j = 0; j < cov.d(); ++j)
    if (std::abs(cov.entry(j, j, zero) - 1.0) > 1e-8)
      throw InvalidInput(
          "exact moments need unit-variance coordinates; normalize the table");
}

// pairs (p, q) with p in [0, n1), q in [0, n2) and p - q = y
double overlap_count(int n1, int n2, int y) {
  return double(std::max(0, std::min(n2, n1 - y) - std::max(0, -y)));
}

// A_N^{-2} sum over lags y of prod_l overlap(n1_l, n2_l, y_l) * cross moment
// at r(y); n1 = n2 = (N,..,N) gives the full-block counts prod (N - |y_l|)
double lag_grouped_moment(const std::map<MultiIndex, double>& coefs,
                          const LongRangeParams& params, const SlowVarying& L,
                          const CovarianceTable& cov, int N,
                          const std::vector<int>& n1,
                          const std::vector<int>& n2) {
  if (N < 1) throw InvalidInput("block size must be >= 1");
  check_diagonal_unit(cov, N);
  int nu = cov.nu(), d = cov.d();
  std::vector<double> r_diag(d);
  std::vector<int> lag(nu, 0);
  long span = 2L * (N - 1) + 1;
  long cells = ipow(span, nu);
  double acc = 0.0;
  for (long f = 0; f < cells; ++f) {
    long rest = f;
    double count = 1.0;
    for (int i = nu - 1; i >= 0; --i) {
      lag[i] = int(rest % span) - (N - 1);
      rest /= span;
      count *= overlap_count(n1[i], n2[i], lag[i]);
    }
    if (count == 0.0) continue;
    for (int j = 0; j < d; ++j) {
      double r = cov.entry(j, j, lag);
      // Cauchy-Schwarz keeps |r| <= 1 up to quadrature noise
      if (std::abs(r) > 1.0 && std::abs(r) < 1.0 + 1e-9) r = r > 0 ? 1.0 : -1.0;
      r_diag[j] = r;
    }
    acc += count * cross_moment_diagonal(coefs, r_diag);
  }
  double a_n = sum_normalizer(N, nu, params, L);
  return acc / (a_n * a_n);
}

}  // namespace

void NormalizedSumSpec::validate(int nu) const {
  params.validate(nu);
  h.validate();
  if (h.k != params.k)
    throw InvalidInput("functional order and normalization order disagree");
  if (tail && !tail->coefficients.empty()) {
    tail->validate();
    if (tail->d != h.d) throw InvalidInput("tail expansion dimension mismatch");
    if (tail->k != h.k) throw InvalidInput("tail expansion base order mismatch");
  }
}

FunctionalField functional_field(const HermiteExpansion& h,
                                 const FieldSample& sample) {
  if (h.d != sample.dims.d)
    throw InvalidInput("expansion and field dimensions disagree");
  return {sample.dims.nu, sample.block,
          field_values([&h](const std::vector<double>& x) { return h.eval(x); },
                       sample)};
}

FunctionalField functional_field(const TailExpansion& h,
                                 const FieldSample& sample) {
  if (h.d != sample.dims.d)
    throw InvalidInput("expansion and field dimensions disagree");
  return {sample.dims.nu, sample.block,
          field_values([&h](const std::vector<double>& x) { return h.eval(x); },
                       sample)};
}

double normalized_sum(const FunctionalField& y, const NormalizedSumSpec& spec) {
  spec.validate(y.nu);
  if (long(y.values.size()) != ipow(y.block, y.nu))
    throw InvalidInput("functional field size does not match its block");
  double total = std::accumulate(y.values.begin(), y.values.end(), 0.0);
  return total / sum_normalizer(y.block, y.nu, spec.params, spec.L);
}

double normalized_sum_rect(const FunctionalField& y,
                           const std::vector<double>& t,
                           const NormalizedSumSpec& spec) {
  spec.validate(y.nu);
  if (int(t.size()) != y.nu)
    throw InvalidInput("rectangle has the wrong dimension");
  if (long(y.values.size()) != ipow(y.block, y.nu))
    throw InvalidInput("functional field size does not match its block");
  std::vector<int> n(y.nu);
  for (int i = 0; i < y.nu; ++i) n[i] = rect_count(y.block, t[i]);
  long limit = 1;
  for (int i = 0; i < y.nu; ++i) limit *= n[i];
  double total = 0.0;
  if (limit > 0) {
    std::vector<int> p(y.nu, 0);
    while (true) {
      long flat = 0;
      for (int i = 0; i < y.nu; ++i) flat = flat * y.block + p[i];
      total += y.values[flat];
      int axis = y.nu - 1;
      while (axis >= 0 && ++p[axis] == n[axis]) p[axis--] = 0;
      if (axis < 0) break;
    }
  }
  return total / sum_normalizer(y.block, y.nu, spec.params, spec.L);
}

double exact_variance_SN(const NormalizedSumSpec& spec,
                         const CovarianceTable& cov, int N) {
  spec.validate(cov.nu());
  if (spec.h.d != cov.d())
    throw InvalidInput("expansion and covariance dimensions disagree");
  std::vector<int> n(cov.nu(), N);
  return lag_grouped_moment(spec.h.coefficients, spec.params, spec.L, cov, N,
                            n, n);
}

double exact_covariance_rect(const NormalizedSumSpec& spec,
                             const CovarianceTable& cov, int N,
                             const std::vector<double>& t1,
                             const std::vector<double>& t2) {
  spec.validate(cov.nu());
  if (spec.h.d != cov.d())
    throw InvalidInput("expansion and covariance dimensions disagree");
  if (int(t1.size()) != cov.nu() || int(t2.size()) != cov.nu())
    throw InvalidInput("rectangle has the wrong dimension");
  std::vector<int> n1(cov.nu()), n2(cov.nu());
  for (int i = 0; i < cov.nu(); ++i) {
    n1[i] = rect_count(N, t1[i]);
    n2[i] = rect_count(N, t2[i]);
  }
  return lag_grouped_moment(spec.h.coefficients, spec.params, spec.L, cov, N,
                            n1, n2);
}

double tail_second_moment(const NormalizedSumSpec& spec,
                          const CovarianceTable& cov, int N) {
  spec.validate(cov.nu());
  if (!spec.tail || spec.tail->coefficients.empty()) return 0.0;
  if (spec.tail->d != cov.d())
    throw InvalidInput("expansion and covariance dimensions disagree");
  std::vector<int> n(cov.nu(), N);
  return lag_grouped_moment(spec.tail->coefficients, spec.params, spec.L, cov,
                            N, n, n);
}

}  // namespace lrd
