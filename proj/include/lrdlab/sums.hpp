#pragma once

#include <optional>
#include <vector>

#include "lrdlab/common.hpp"
#include "lrdlab/covariance.hpp"
#include "lrdlab/hermite.hpp"
#include "lrdlab/sampler.hpp"

namespace lrd {

// Normalized partial sums of Y(p) = H(X(p)) over the block B_N, with the
// long-range normalizer A_N = N^(nu - k alpha/2) L(N)^(k/2).
struct NormalizedSumSpec {
  LongRangeParams params;
  SlowVarying L;
  HermiteExpansion h;
  std::optional<TailExpansion> tail;

  void validate(int nu) const;
};

// Pointwise functional of one field realization, row-major over B_N.
struct FunctionalField {
  int nu = 1;
  int block = 0;
  std::vector<double> values;
};

FunctionalField functional_field(const HermiteExpansion& h,
                                 const FieldSample& sample);
FunctionalField functional_field(const TailExpansion& h,
                                 const FieldSample& sample);

// A_N^{-1} sum over the full block.
double normalized_sum(const FunctionalField& y, const NormalizedSumSpec& spec);

// A_N^{-1} sum over the rectangle {p : p_l < N t_l}, t in [0,1]^nu.  Integer
// boundaries N t_l count exactly (guarded against representation noise).
double normalized_sum_rect(const FunctionalField& y,
                           const std::vector<double>& t,
                           const NormalizedSumSpec& spec);

// Exact Var(S_N) for diagonal unit-variance models:
// A_N^{-2} sum_y prod_l (N - |y_l|) * sum_indices c^2 prod_j k_j! r_jj(y)^k_j.
// Throws InvalidInput unless the table is diagonal with r_jj(0) = 1 and
// covers lags up to N-1.
double exact_variance_SN(const NormalizedSumSpec& spec,
                         const CovarianceTable& cov, int N);

// Exact Cov(S_N(t1), S_N(t2)) of the normalized rectangle sums, with the
// overlap counts prod_l #{(p, q): p < N t1_l, q < N t2_l, p - q = y_l} in
// place of the full-block counts; same table requirements.
double exact_covariance_rect(const NormalizedSumSpec& spec,
                             const CovarianceTable& cov, int N,
                             const std::vector<double>& t1,
                             const std::vector<double>& t2);

// Exact second moment of the normalized tail sum A_N^{-1} sum H1(X(p)); the
// normalizer keeps the base order k while the tail terms have order >= k+1,
// which is what makes the value vanish as N grows.
double tail_second_moment(const NormalizedSumSpec& spec,
                          const CovarianceTable& cov, int N);

}  // namespace lrd
