#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lrd {

// Thrown when inputs violate a documented precondition (bad dimensions,
// out-of-domain arguments, malformed index sequences, ...).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown when a numerical routine cannot reach its accuracy contract
// (quadrature self-consistency failure, subdivision depth exhausted,
// factorization of an indefinite matrix, ...).
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown by the experiment harness when the projected runtime of a run
// exceeds the configured budget.
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

struct LatticeDims {
  int nu = 1;  // lattice dimension
  int d = 1;   // number of field coordinates

  void validate() const {
    if (nu < 1 || nu > 3) throw InvalidInput("LatticeDims: nu must be in [1,3]");
    if (d < 1 || d > 16) throw InvalidInput("LatticeDims: d must be in [1,16]");
  }
};

// Decay exponent alpha of the covariance envelope |p|^-alpha together with
// the order k of the functional driving the normalization N^(nu - k*alpha/2).
struct LongRangeParams {
  double alpha = 0.0;
  int k = 1;

  void validate(int nu) const {
    if (k < 1) throw InvalidInput("LongRangeParams: k must be >= 1");
    if (!(alpha > 0.0) || !(alpha * k < double(nu)))
      throw InvalidInput("LongRangeParams: need 0 < alpha < nu/k, got alpha=" +
                         std::to_string(alpha) + " k=" + std::to_string(k) +
                         " nu=" + std::to_string(nu));
  }
};

// Slowly varying factor L(t), t >= 1.  Two variants are provided: the
// constant function and max(1, log t), which covers the logarithmic
// corrections used in the experiments.
struct SlowVarying {
  enum class Kind { ConstantOne, Log };
  Kind kind = Kind::ConstantOne;

  static SlowVarying constant() { return {Kind::ConstantOne}; }
  static SlowVarying logarithmic() { return {Kind::Log}; }

  double operator()(double t) const {
    if (t < 1.0) throw InvalidInput("SlowVarying: argument must be >= 1");
    switch (kind) {
      case Kind::ConstantOne: return 1.0;
      case Kind::Log: return std::max(1.0, std::log(t));
    }
    return 1.0;
  }

  // Largest deviation of L(lambda*t)/L(t) from 1 over lambda in `lambdas`.
  double ratio_defect(double t, const std::vector<double>& lambdas) const {
    double worst = 0.0;
    for (double lam : lambdas) {
      double r = (*this)(lam * t) / (*this)(t);
      worst = std::max(worst, std::abs(r - 1.0));
    }
    return worst;
  }

  std::string name() const { return kind == Kind::ConstantOne ? "one" : "log"; }
};

inline std::int64_t ipow(std::int64_t base, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// A_N = N^(nu - k*alpha/2) * L(N)^(k/2)
inline double sum_normalizer(std::int64_t N, int nu, const LongRangeParams& p,
                             const SlowVarying& L) {
  return std::pow(double(N), double(nu) - p.k * p.alpha / 2.0) *
         std::pow(L(double(N)), p.k / 2.0);
}

}  // namespace lrd
