#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrdlab/covariance.hpp"
#include "lrdlab/spectral_measure.hpp"

namespace lrd {

enum class SamplerMethod {
  DirectFactorization,
  CirculantEmbedding,
  SpectralGrid,
};

const char* sampler_method_name(SamplerMethod m);
SamplerMethod parse_sampler_method(const std::string& name);

struct SamplerConfig {
  SamplerMethod method = SamplerMethod::DirectFactorization;
  std::uint64_t seed = 0;
  // circulant embedding size per axis is embedding_factor * N
  int embedding_factor = 2;
  // spectral eigenvalues in [-clip_tolerance * max, 0) are clipped to zero,
  // anything lower aborts the embedding
  double clip_tolerance = 1e-6;
  // resolution of the frequency grid used by the spectral-grid method
  int spectral_cells = 4096;
};

// one realization of the field on the block {0..N-1}^nu, row j of values
// holds coordinate j, columns enumerate lattice points row-major
struct FieldSample {
  LatticeDims dims;
  int block = 0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  SamplerMethod method = SamplerMethod::DirectFactorization;
  Eigen::MatrixXd values;

  int points() const { return static_cast<int>(values.cols()); }
  double at(int j, const std::vector<int>& p) const;
  void write_binary(std::ostream& out) const;
  void write_csv(std::ostream& out) const;
  static FieldSample read_binary(std::istream& in);
};

// factorizations are expensive relative to a single draw, so the sampler is
// prepared once and then queried per replicate
class FieldSampler {
 public:
  static FieldSampler from_table(const CovarianceTable& cov, int block,
                                 const SamplerConfig& cfg);
  // spectral-grid sampling draws from a discretized spectral measure and
  // needs the density, not just covariance values
  static FieldSampler from_model(const SpectralDensityModel& m, int block,
                                 const SamplerConfig& cfg);
  static FieldSampler from_measure(const MatrixSpectralMeasureOnGrid& g,
                                   int block, const SamplerConfig& cfg);

  FieldSample sample(std::uint64_t replicate) const;

  // covariance the generator realizes exactly (before Monte-Carlo noise);
  // equals the table for the exact methods, exposes the discretization bias
  // for spectral-grid and the clipping bias for a clipped embedding
  Eigen::MatrixXd induced_covariance(const std::vector<int>& lag) const;

  const LatticeDims& dims() const { return dims_; }
  int block() const { return block_; }
  const SamplerConfig& config() const { return cfg_; }
  bool clipped() const { return clip_total_ > 0.0; }
  double clip_total() const { return clip_total_; }
  // lower factor of the block covariance, direct method only
  const Eigen::MatrixXd& direct_factor() const;

  FieldSampler(FieldSampler&&) noexcept;
  FieldSampler& operator=(FieldSampler&&) noexcept;
  ~FieldSampler();

 private:
  FieldSampler();
  struct Impl;

  LatticeDims dims_;
  int block_ = 0;
  SamplerConfig cfg_;
  double clip_total_ = 0.0;
  std::unique_ptr<Impl> impl_;
};

// one-shot convenience wrapper around FieldSampler::from_table
FieldSample sample_field(const CovarianceTable& cov, int block,
                         const SamplerConfig& cfg, std::uint64_t replicate);

// cross-replicate moment estimates with per-entry standard errors
struct EmpiricalCovariance {
  LatticeDims dims;
  int max_lag = 0;
  int replicates = 0;
  CovarianceTable mean;
  CovarianceTable stderr_table;
};

EmpiricalCovariance empirical_covariance(const std::vector<FieldSample>& samples,
                                         int max_lag);

}  // namespace lrd
