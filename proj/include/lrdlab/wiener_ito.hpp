#pragma once

#include <complex>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrdlab/common.hpp"
#include "lrdlab/hermite.hpp"
#include "lrdlab/spectral_measure.hpp"

namespace lrd {

// Even cell partition of [-T, T)^nu whose cells pair up exactly under
// negation; representatives live in the left half of the first axis.
struct SymmetricPartition {
  CellGrid grid;

  static SymmetricPartition make(int nu, double truncation, int cells_per_axis);
  void validate() const;

  long mirror(long cell) const { return grid.negation(cell); }
  bool is_representative(long cell) const;
  std::vector<long> representatives() const;
  nlohmann::json describe() const;
};

// Complex spectral increments Z_j(cell) with the mirror symmetry
// Z_j(-cell) = conj Z_j(cell) built in; rows are 0-based coordinates.
struct SpectralIncrementSample {
  CellGrid grid;
  int d = 1;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  Eigen::MatrixXcd z;  // d x cells

  std::complex<double> value(int j, long cell) const { return z(j, cell); }
};

// Per-cell Hermitian square roots are computed once; replicates then cost
// one matrix-vector product per representative cell.
class IncrementSampler {
 public:
  explicit IncrementSampler(const MatrixSpectralMeasureOnGrid& g,
                            double clip_tolerance = 1e-10);
  SpectralIncrementSample sample(std::uint64_t seed,
                                 std::uint64_t replicate) const;
  const CellGrid& grid() const { return grid_; }
  int d() const { return d_; }

 private:
  CellGrid grid_;
  int d_ = 1;
  std::vector<long> reps_;
  std::vector<Eigen::MatrixXcd> factor_;
};

SpectralIncrementSample sample_increments(const MatrixSpectralMeasureOnGrid& g,
                                          std::uint64_t seed,
                                          std::uint64_t replicate);

// Kernels of the k-fold spectral integrals.  All kinds depend on the
// arguments only through the per-axis sums s_l = x_1^(l) + ... + x_k^(l):
//   Limit           c * prod_l (e^{i s_l} - 1) / (i s_l)
//   Rectangle       c * prod_l (e^{i t_l s_l} - 1) / (i s_l)
//   Prelimit        c * prod_l (e^{i s_l} - 1) / (N (e^{i s_l / N} - 1))
//   LatticeAverage  prod_l (e^{i s_l} - 1) / (N (e^{i s_l / N} - 1))
//   Constant        c
// Removable singularities are evaluated by series below 1e-6.
struct KernelSpec {
  enum class Kind { Limit, Rectangle, Prelimit, LatticeAverage, Constant };

  Kind kind = Kind::Limit;
  int nu = 1;
  int k = 1;
  double coefficient = 1.0;
  std::vector<double> t;  // Rectangle
  int N = 0;              // Prelimit, LatticeAverage

  void validate() const;
  // x is the flattened tuple (x_1, ..., x_k), each a nu-vector; Prelimit and
  // LatticeAverage require every argument inside [-N pi, N pi)^nu
  std::complex<double> eval(const std::vector<double>& x) const;
  // the same kernel as a function of the per-axis argument sums
  std::complex<double> eval_at_sum(const double* s) const;
  nlohmann::json describe() const;
};

const char* kernel_kind_name(KernelSpec::Kind kind);
KernelSpec::Kind parse_kernel_kind(const std::string& name);

inline std::complex<double> kernel_eval(const KernelSpec& spec,
                                        const std::vector<double>& x) {
  return spec.eval(x);
}

// Max of |prelimit - limit| over a uniform grid in [-half_width, half_width]
// per flattened axis; `limit` must have kind Limit.
double kernel_convergence_sup(const KernelSpec& limit, int N, double half_width,
                              int grid_per_axis);

// Off-diagonal k-fold sum over cell tuples whose unordered mirror pairs are
// pairwise distinct: sum kernel(centers) * prod_i Z_{j_i}(cell_i) for the
// 1-based non-decreasing coordinate sequence jseq.  Kernels here satisfy
// conj f(x) = f(-x), so the imaginary part must cancel; it is checked
// against 1e-6 relative + 1e-10 absolute.  Arity 2 on one axis runs through
// an FFT convolution over the sum variable, everything else enumerates
// tuples.
double multiple_integral(const KernelSpec& kernel,
                         const SpectralIncrementSample& z,
                         const std::vector<int>& jseq);
// Tuple-enumeration evaluator, for cross-checking the fast path.
double multiple_integral_reference(const KernelSpec& kernel,
                                   const SpectralIncrementSample& z,
                                   const std::vector<int>& jseq);

// Exact E[I_a I_b] for two off-diagonal integrals of the same arity over the
// same increments: contractions pair each cell with its mirror only, so the
// second moment is a weighted sum of cell-mass products (arity 1 or 2).
double discrete_cross_moment(const KernelSpec& ka, const std::vector<int>& ja,
                             const KernelSpec& kb, const std::vector<int>& jb,
                             const MatrixSpectralMeasureOnGrid& g);

// Discretized limit functional: the sum over the multi-indices of H of
// spectral integrals with the Limit (or Rectangle) kernel, all multi-index
// terms sharing one increment sample per replicate.  An expansion whose
// coefficients are all zero is allowed and yields the zero functional.
class S0Sampler {
 public:
  S0Sampler(const HermiteExpansion& h, const LimitSpectralModel& model,
            const SymmetricPartition& partition, std::uint64_t seed);

  double sample(std::uint64_t replicate) const;
  // joint values S0(t) for several rectangles from one increment sample
  std::vector<double> sample_joint(const std::vector<std::vector<double>>& ts,
                                   std::uint64_t replicate) const;

  // exact second moments of the discretized law (no Monte Carlo)
  double discrete_variance() const;
  double discrete_covariance(const std::vector<double>& ta,
                             const std::vector<double>& tb) const;

  const MatrixSpectralMeasureOnGrid& measure() const { return measure_; }
  const SymmetricPartition& partition() const { return partition_; }
  const LongRangeParams& params() const { return params_; }
  int order() const { return h_.k; }

 private:
  KernelSpec term_kernel(double coefficient,
                         const std::vector<double>* t) const;

  HermiteExpansion h_;
  SymmetricPartition partition_;
  LongRangeParams params_;
  MatrixSpectralMeasureOnGrid measure_;
  IncrementSampler increments_;
  std::uint64_t seed_ = 0;
  std::vector<std::pair<double, std::vector<int>>> terms_;  // (c, jseq)
};

double sample_S0(const HermiteExpansion& h, const LimitSpectralModel& model,
                 const SymmetricPartition& partition, std::uint64_t seed,
                 std::uint64_t replicate);
std::vector<double> sample_S0_joint(const HermiteExpansion& h,
                                    const LimitSpectralModel& model,
                                    const SymmetricPartition& partition,
                                    const std::vector<std::vector<double>>& ts,
                                    std::uint64_t seed,
                                    std::uint64_t replicate);

struct SelfSimilarityReport {
  double u = 1.0;
  double exponent = 0.0;          // nu - k alpha / 2
  std::vector<double> moment_t;   // E |S0(t)|^m, m = 1..max_moment
  std::vector<double> moment_ut;  // E |S0(ut)|^m
  std::vector<double> z;          // paired z-scores per order
  bool pass = false;
};

// Compares Monte-Carlo absolute moments of S0(ut) against the
// u^{m (nu - k alpha/2)}-scaled moments of S0(t), sharing increments per
// replicate so that u = 1 agrees exactly.
SelfSimilarityReport self_similarity_check(const S0Sampler& sampler, double u,
                                           const std::vector<double>& t,
                                           int max_moment, int replicates);

}  // namespace lrd
