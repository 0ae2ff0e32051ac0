#pragma once

#include <Eigen/Dense>
#include <map>
#include <nlohmann/json.hpp>
#include <vector>

#include "lrdlab/common.hpp"

namespace lrd {

using MultiIndex = std::vector<int>;
// Sparse multivariate polynomial in the monomial basis.
using Poly = std::map<MultiIndex, double>;

// Probabilists' Hermite polynomial H_n (leading coefficient 1) via the
// three-term recurrence H_{n+1}(x) = x H_n(x) - n H_{n-1}(x).
double hermite_value(int n, double x);
// Values H_0(x) .. H_n(x).
std::vector<double> hermite_values_upto(int n, double x);

// Monomial coefficients of H_n: H_n(x) = sum_m coef[m] x^m.
std::vector<double> hermite_to_monomial_1d(int n);
// Hermite coefficients of x^n: x^n = sum_m coef[m] H_m(x).
std::vector<double> monomial_to_hermite_1d(int n);

constexpr int kDefaultDegreeCap = 10;

// Order-k part of a Hermite functional: sum over multi-indices with
// k_1+...+k_d = k of c * H_{k_1}(x_1)...H_{k_d}(x_d).
struct HermiteExpansion {
  int d = 1;
  int k = 1;
  std::map<MultiIndex, double> coefficients;

  void validate() const;
  double eval(const std::vector<double>& x) const;
  int max_order() const;
};

// Higher-order remainder: multi-indices with k_1+...+k_d >= k+1 (finitely
// many terms).
struct TailExpansion {
  int d = 1;
  int k = 1;  // base order; stored indices sum to >= k+1
  std::map<MultiIndex, double> coefficients;

  void validate() const;
  double eval(const std::vector<double>& x) const;
  int max_order() const;
  // sum of c^2 / (k_1! ... k_d!)
  double condition_value() const;
};

// E[H(X)^2] for standard-normal X with independent coordinates:
// sum of c^2 * k_1!...k_d!.
double expansion_second_moment(const std::map<MultiIndex, double>& coefficients);

// E[H(X)H(Y)] for a diagonal correlation structure corr(X_j, Y_j) = r_j
// (cross-correlations between distinct coordinates vanish):
// sum over indices of c^2 * prod_j k_j! r_j^{k_j}.
double cross_moment_diagonal(const std::map<MultiIndex, double>& coefficients,
                             const std::vector<double>& r_diag);

// Maps between non-decreasing coordinate sequences (j_1,...,j_k) and
// occupancy multi-indices (k_1,...,k_d) with k_1+...+k_d = k.
struct IndexMaps {
  int k = 1;
  int d = 1;

  // j(s | k_1..k_d), s in 1..k (1-based): the coordinate owning slot s.
  int coordinate_of_slot(int s, const MultiIndex& kvec) const;
  // k_s(j_1..j_k): occurrence counts of each coordinate in a non-decreasing
  // sequence; throws InvalidInput for non-monotone or out-of-range sequences.
  MultiIndex occupancy(const std::vector<int>& jseq) const;
  // The non-decreasing sequence associated with a multi-index.
  std::vector<int> slots(const MultiIndex& kvec) const;
};

struct LemmaBoundResult {
  double lhs = 0.0;        // |E H1(X) H1(Y)|
  double lhs_stderr = 0.0; // 0 for the exact (diagonal) path
  double bound = 0.0;      // psi^{k+1} E[H1(X)^2]
  double psi = 0.0;
  bool exact = false;
  bool holds = false;
};

// Checks |E H1(X) H1(Y)| <= psi^{k+1} E[H1(X)^2] where psi is the larger of
// the max row and max column absolute sums of the cross-correlation matrix
// r_{j,j'} = corr(X_j, Y_{j'}).  Exact for diagonal r, Monte-Carlo otherwise.
LemmaBoundResult lemma_bound_check(const TailExpansion& h1,
                                   const Eigen::MatrixXd& r,
                                   std::uint64_t mc_seed = 12345,
                                   int mc_samples = 200000);

// Re-expands H(D x') over the d' coordinates of x'.  D must be consistent
// with the unit-variance convention of H's arguments (reconstruction matrix
// of an orthonormal reduction); otherwise off-order residuals appear and a
// NumericFailure is thrown.
HermiteExpansion transform_functional(const HermiteExpansion& h,
                                      const Eigen::MatrixXd& D,
                                      int degree_cap = kDefaultDegreeCap);

// Multivariate basis conversions (exact in double precision).
Poly expansion_to_poly(const std::map<MultiIndex, double>& coefficients, int d,
                       int degree_cap = kDefaultDegreeCap);
std::map<MultiIndex, double> poly_to_expansion(const Poly& p, int d,
                                               int degree_cap = kDefaultDegreeCap);
double poly_eval(const Poly& p, const std::vector<double>& x);

// Stable interchange format: {"d": .., "k": .., "terms": [{"index": [...],
// "c": ..}, ...]}.
nlohmann::json expansion_to_json(const HermiteExpansion& h);
nlohmann::json expansion_to_json(const TailExpansion& h);
HermiteExpansion hermite_expansion_from_json(const nlohmann::json& j);
TailExpansion tail_expansion_from_json(const nlohmann::json& j);

struct GaussHermiteRule {
  std::vector<double> nodes;    // abscissae for the standard normal weight
  std::vector<double> weights;  // sum to 1
};
// Gauss-Hermite rule for the probabilists' weight exp(-x^2/2)/sqrt(2 pi).
GaussHermiteRule gauss_hermite(int n);

}  // namespace lrd
