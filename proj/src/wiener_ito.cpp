#include "lrdlab/wiener_ito.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "lrdlab/fft.hpp"
#include "lrdlab/rng.hpp"

namespace lrd {

using cd = std::complex<double>;

namespace {

constexpr cd kI(0.0, 1.0);
constexpr long kMaxDirectTuples = 1L << 24;

// (e^{iz} - 1) / (iz) with the removable singularity filled by series;
// e^{iz} - 1 is expanded as -2 sin^2(z/2) + i sin z so nothing cancels
cd eix_ratio(double z) {
  if (std::abs(z) < 1e-6) {
    return {1.0 - z * z / 6.0, 0.5 * z - z * z * z / 24.0};
  }
  const double half = std::sin(0.5 * z);
  return {std::sin(z) / z, 2.0 * half * half / z};
}

// (e^{iz} - 1) / (N (e^{iz/N} - 1)) continued through the zeros of the
// denominator at z/N = 2 pi m; equals 1 there
cd lattice_ratio(double z, int N) {
  const double phi = z / double(N);
  const double hz = std::sin(0.5 * z);
  const double hphi = std::sin(0.5 * phi);
  if (std::abs(hphi) >= 1e-6) {
    return cd{-2.0 * hz * hz, std::sin(z)} /
           (double(N) * cd{-2.0 * hphi * hphi, std::sin(phi)});
  }
  const double dphi = std::remainder(phi, 2.0 * M_PI);
  return eix_ratio(double(N) * dphi) / eix_ratio(dphi);
}

double imag_checked(cd acc) {
  if (std::abs(acc.imag()) > 1e-6 * std::abs(acc.real()) + 1e-10)
    throw NumericFailure(
        "multiple integral has a nonvanishing imaginary part (re=" +
        std::to_string(acc.real()) + ", im=" + std::to_string(acc.imag()) +
        "); increments or kernel lack mirror symmetry");
  return acc.real();
}

void check_arguments(const KernelSpec& kernel, const SpectralIncrementSample& z,
                     const std::vector<int>& jseq) {
  kernel.validate();
  z.grid.validate();
  if (kernel.nu != z.grid.nu)
    throw InvalidInput("kernel and increments disagree on the dimension");
  if (z.d < 1 || z.z.rows() != z.d || z.z.cols() != z.grid.total_cells())
    throw InvalidInput("increment sample has inconsistent storage");
  if (int(jseq.size()) != kernel.k)
    throw InvalidInput("coordinate sequence length must match the kernel arity");
  for (std::size_t i = 0; i < jseq.size(); ++i) {
    if (jseq[i] < 1 || jseq[i] > z.d)
      throw InvalidInput("coordinate sequence entry out of range");
    if (i > 0 && jseq[i] < jseq[i - 1])
      throw InvalidInput("coordinate sequence must be non-decreasing");
  }
  if ((kernel.kind == KernelSpec::Kind::Prelimit ||
       kernel.kind == KernelSpec::Kind::LatticeAverage) &&
      z.grid.half_width > kernel.N * M_PI)
    throw InvalidInput("increments extend outside the lattice kernel domain");
}

// arity 2, one axis: full double sum via an FFT convolution over the sum
// variable, then the diagonal and mirror tuples removed
cd pair_sum_fft(const KernelSpec& kernel, const SpectralIncrementSample& zs,
                int j1, int j2) {
  const long M = zs.grid.total_cells();
  const double w = zs.grid.width(0);
  const double x0 = -zs.grid.half_width + 0.5 * w;

  std::size_t n = 1;
  while (n < std::size_t(2 * M - 1)) n <<= 1;
  std::vector<cd> a(n, cd(0.0, 0.0));
  std::vector<cd> b(n, cd(0.0, 0.0));
  for (long m = 0; m < M; ++m) {
    a[m] = zs.z(j1, m);
    b[m] = zs.z(j2, m);
  }
  fft_inplace(a, false);
  fft_inplace(b, false);
  for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
  fft_inplace(a, true);

  const double inv_n = 1.0 / double(n);
  cd acc(0.0, 0.0);
  for (long idx = 0; idx <= 2 * (M - 1); ++idx) {
    const double s = 2.0 * x0 + w * double(idx);
    acc += kernel.eval_at_sum(&s) * (a[idx] * inv_n);
  }
  const double zero = 0.0;
  const cd f_zero = kernel.eval_at_sum(&zero);
  for (long m = 0; m < M; ++m) {
    const double s = 2.0 * (x0 + w * double(m));
    acc -= kernel.eval_at_sum(&s) * zs.z(j1, m) * zs.z(j2, m);
    acc -= f_zero * zs.z(j1, m) * std::conj(zs.z(j2, m));
  }
  return acc;
}

cd tuple_sum(const KernelSpec& kernel, const SpectralIncrementSample& zs,
             const std::vector<int>& jseq) {
  const long cells = zs.grid.total_cells();
  const int k = kernel.k;
  const int nu = kernel.nu;

  double budget = 1.0;
  for (int i = 0; i < k; ++i) budget *= double(cells);
  if (budget > double(kMaxDirectTuples))
    throw InvalidInput("too many cell tuples for direct enumeration");

  std::vector<double> centers(std::size_t(cells) * nu);
  std::vector<long> pair_id(cells);
  for (long m = 0; m < cells; ++m) {
    const auto c = zs.grid.cell_center(m);
    std::copy(c.begin(), c.end(), centers.begin() + std::size_t(m) * nu);
    pair_id[m] = std::min(m, zs.grid.negation(m));
  }

  std::vector<long> m(k, 0);
  std::vector<double> s(nu);
  cd acc(0.0, 0.0);
  while (true) {
    bool distinct = true;
    for (int i = 0; i < k && distinct; ++i)
      for (int ip = i + 1; ip < k; ++ip)
        if (pair_id[m[i]] == pair_id[m[ip]]) {
          distinct = false;
          break;
        }
    if (distinct) {
      std::fill(s.begin(), s.end(), 0.0);
      for (int i = 0; i < k; ++i) {
        const double* c = centers.data() + std::size_t(m[i]) * nu;
        for (int l = 0; l < nu; ++l) s[l] += c[l];
      }
      cd prod = kernel.eval_at_sum(s.data());
      for (int i = 0; i < k; ++i) prod *= zs.z(jseq[i] - 1, m[i]);
      acc += prod;
    }
    int axis = k - 1;
    while (axis >= 0 && ++m[axis] == cells) m[axis--] = 0;
    if (axis < 0) break;
  }
  return acc;
}

}  // namespace

// ------------------------------------------------------- SymmetricPartition

SymmetricPartition SymmetricPartition::make(int nu, double truncation,
                                            int cells_per_axis) {
  SymmetricPartition p;
  p.grid = CellGrid::uniform(nu, truncation, cells_per_axis);
  p.validate();
  return p;
}

void SymmetricPartition::validate() const {
  grid.validate();
  for (int c : grid.cells)
    if (c % 2 != 0)
      throw InvalidInput("symmetric partition needs even cell counts");
}

bool SymmetricPartition::is_representative(long cell) const {
  return grid.unpack(cell)[0] < grid.cells[0] / 2;
}

std::vector<long> SymmetricPartition::representatives() const {
  std::vector<long> out;
  const long total = grid.total_cells();
  out.reserve(total / 2);
  for (long c = 0; c < total; ++c)
    if (is_representative(c)) out.push_back(c);
  return out;
}

nlohmann::json SymmetricPartition::describe() const {
  return nlohmann::json{{"nu", grid.nu},
                        {"truncation", grid.half_width},
                        {"cells_per_axis", grid.cells},
                        {"total_cells", grid.total_cells()}};
}

// -------------------------------------------------------- IncrementSampler

IncrementSampler::IncrementSampler(const MatrixSpectralMeasureOnGrid& g,
                                   double clip_tolerance) {
  g.validate();
  grid_ = g.grid;
  d_ = g.d;
  for (int c : grid_.cells)
    if (c % 2 != 0)
      throw InvalidInput("symmetric increments need even cell counts");

  SymmetricPartition part{grid_};
  reps_ = part.representatives();

  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>> eig(
      reps_.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < reps_.size(); ++i) {
    const Eigen::MatrixXcd& mass = g.mass[reps_[i]];
    eig[i].compute((mass + mass.adjoint()) / 2.0);
    if (eig[i].info() != Eigen::Success)
      throw NumericFailure("cell mass eigendecomposition failed");
    scale = std::max(scale, eig[i].eigenvalues().cwiseAbs().maxCoeff());
  }
  const double floor = -clip_tolerance * scale;
  factor_.resize(reps_.size());
  for (std::size_t i = 0; i < reps_.size(); ++i) {
    Eigen::VectorXd lambda = eig[i].eigenvalues();
    for (int j = 0; j < lambda.size(); ++j) {
      if (lambda(j) < floor)
        throw NumericFailure(
            "spectral cell mass is not positive semidefinite (eigenvalue " +
            std::to_string(lambda(j)) + ", scale " + std::to_string(scale) +
            ")");
      lambda(j) = std::sqrt(std::max(lambda(j), 0.0));
    }
    factor_[i] = eig[i].eigenvectors() * lambda.asDiagonal();
  }
}

SpectralIncrementSample IncrementSampler::sample(std::uint64_t seed,
                                                 std::uint64_t replicate) const {
  NormalStream ns(seed, replicate, StreamPurpose::SpectralIncrements);
  SpectralIncrementSample out;
  out.grid = grid_;
  out.d = d_;
  out.seed = seed;
  out.replicate = replicate;
  out.z.resize(d_, grid_.total_cells());
  Eigen::VectorXcd zeta(d_);
  for (std::size_t i = 0; i < reps_.size(); ++i) {
    for (int j = 0; j < d_; ++j) zeta(j) = ns.next_complex_normal();
    out.z.col(reps_[i]) = factor_[i] * zeta;
    out.z.col(grid_.negation(reps_[i])) = out.z.col(reps_[i]).conjugate();
  }
  return out;
}

SpectralIncrementSample sample_increments(const MatrixSpectralMeasureOnGrid& g,
                                          std::uint64_t seed,
                                          std::uint64_t replicate) {
  return IncrementSampler(g).sample(seed, replicate);
}

// -------------------------------------------------------------- KernelSpec

const char* kernel_kind_name(KernelSpec::Kind kind) {
  switch (kind) {
    case KernelSpec::Kind::Limit: return "limit";
    case KernelSpec::Kind::Rectangle: return "rectangle";
    case KernelSpec::Kind::Prelimit: return "prelimit";
    case KernelSpec::Kind::LatticeAverage: return "lattice_average";
    case KernelSpec::Kind::Constant: return "constant";
  }
  throw InvalidInput("unknown kernel kind");
}

KernelSpec::Kind parse_kernel_kind(const std::string& name) {
  if (name == "limit") return KernelSpec::Kind::Limit;
  if (name == "rectangle") return KernelSpec::Kind::Rectangle;
  if (name == "prelimit") return KernelSpec::Kind::Prelimit;
  if (name == "lattice_average") return KernelSpec::Kind::LatticeAverage;
  if (name == "constant") return KernelSpec::Kind::Constant;
  throw InvalidInput("unknown kernel kind: " + name);
}

void KernelSpec::validate() const {
  if (nu < 1 || nu > 3) throw InvalidInput("kernel dimension must be 1..3");
  if (k < 1 || k > 6) throw InvalidInput("kernel arity must be 1..6");
  if (!std::isfinite(coefficient))
    throw InvalidInput("kernel coefficient must be finite");
  if (kind == Kind::Rectangle) {
    if (int(t.size()) != nu)
      throw InvalidInput("rectangle kernel needs one corner entry per axis");
    for (double tl : t)
      if (!std::isfinite(tl) || tl < 0.0)
        throw InvalidInput("rectangle corner entries must be nonnegative");
  } else if (!t.empty()) {
    throw InvalidInput("only the rectangle kernel takes a corner");
  }
  if (kind == Kind::Prelimit || kind == Kind::LatticeAverage) {
    if (N < 1) throw InvalidInput("lattice kernels need N >= 1");
  }
  if (kind == Kind::LatticeAverage && coefficient != 1.0)
    throw InvalidInput("the lattice average kernel has no coefficient");
}

std::complex<double> KernelSpec::eval(const std::vector<double>& x) const {
  validate();
  if (int(x.size()) != k * nu)
    throw InvalidInput("kernel argument tuple has the wrong length");
  if (kind == Kind::Prelimit || kind == Kind::LatticeAverage) {
    const double edge = double(N) * M_PI;
    for (double xi : x)
      if (!(xi >= -edge && xi < edge))
        throw InvalidInput("lattice kernel argument outside [-N pi, N pi)");
  }
  double s[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < k; ++i)
    for (int l = 0; l < nu; ++l) s[l] += x[std::size_t(i) * nu + l];
  return eval_at_sum(s);
}

std::complex<double> KernelSpec::eval_at_sum(const double* s) const {
  cd out(coefficient, 0.0);
  switch (kind) {
    case Kind::Constant:
      break;
    case Kind::Limit:
      for (int l = 0; l < nu; ++l) out *= eix_ratio(s[l]);
      break;
    case Kind::Rectangle:
      for (int l = 0; l < nu; ++l) out *= t[l] * eix_ratio(t[l] * s[l]);
      break;
    case Kind::Prelimit:
    case Kind::LatticeAverage:
      for (int l = 0; l < nu; ++l) out *= lattice_ratio(s[l], N);
      break;
  }
  return out;
}

nlohmann::json KernelSpec::describe() const {
  nlohmann::json j{{"kind", kernel_kind_name(kind)},
                   {"nu", nu},
                   {"k", k},
                   {"coefficient", coefficient}};
  if (kind == Kind::Rectangle) j["t"] = t;
  if (kind == Kind::Prelimit || kind == Kind::LatticeAverage) j["N"] = N;
  return j;
}

double kernel_convergence_sup(const KernelSpec& limit, int N,
                              double half_width, int grid_per_axis) {
  limit.validate();
  if (limit.kind != KernelSpec::Kind::Limit)
    throw InvalidInput("convergence sup compares against the limit kernel");
  if (N < 1) throw InvalidInput("lattice kernels need N >= 1");
  if (!(half_width > 0.0)) throw InvalidInput("half width must be positive");
  if (grid_per_axis < 2) throw InvalidInput("need at least two grid points");
  if (half_width >= N * M_PI)
    throw InvalidInput("grid exceeds the lattice kernel domain");

  KernelSpec pre = limit;
  pre.kind = KernelSpec::Kind::Prelimit;
  pre.N = N;

  const int dims = limit.k * limit.nu;
  double total = 1.0;
  for (int i = 0; i < dims; ++i) total *= double(grid_per_axis);
  if (total > 2e7) throw InvalidInput("kernel comparison grid too large");

  std::vector<int> ix(dims, 0);
  std::vector<double> x(dims);
  const double step = 2.0 * half_width / double(grid_per_axis - 1);
  double sup = 0.0;
  while (true) {
    for (int i = 0; i < dims; ++i) x[i] = -half_width + step * ix[i];
    sup = std::max(sup, std::abs(pre.eval(x) - limit.eval(x)));
    int axis = dims - 1;
    while (axis >= 0 && ++ix[axis] == grid_per_axis) ix[axis--] = 0;
    if (axis < 0) break;
  }
  return sup;
}

// -------------------------------------------------------- multiple_integral

double multiple_integral(const KernelSpec& kernel,
                         const SpectralIncrementSample& z,
                         const std::vector<int>& jseq) {
  check_arguments(kernel, z, jseq);
  if (kernel.k == 1) {
    const long cells = z.grid.total_cells();
    cd acc(0.0, 0.0);
    for (long m = 0; m < cells; ++m) {
      const auto c = z.grid.cell_center(m);
      acc += kernel.eval_at_sum(c.data()) * z.z(jseq[0] - 1, m);
    }
    return imag_checked(acc);
  }
  if (kernel.k == 2 && kernel.nu == 1)
    return imag_checked(pair_sum_fft(kernel, z, jseq[0] - 1, jseq[1] - 1));
  return imag_checked(tuple_sum(kernel, z, jseq));
}

double multiple_integral_reference(const KernelSpec& kernel,
                                   const SpectralIncrementSample& z,
                                   const std::vector<int>& jseq) {
  check_arguments(kernel, z, jseq);
  return imag_checked(tuple_sum(kernel, z, jseq));
}

// ----------------------------------------------------- discrete_cross_moment

double discrete_cross_moment(const KernelSpec& ka, const std::vector<int>& ja,
                             const KernelSpec& kb, const std::vector<int>& jb,
                             const MatrixSpectralMeasureOnGrid& g) {
  ka.validate();
  kb.validate();
  g.validate();
  if (ka.k != kb.k) throw InvalidInput("cross moment needs equal arities");
  if (ka.nu != g.grid.nu || kb.nu != g.grid.nu)
    throw InvalidInput("kernel and measure disagree on the dimension");
  if (int(ja.size()) != ka.k || int(jb.size()) != kb.k)
    throw InvalidInput("coordinate sequence length must match the kernel arity");
  for (int j : ja)
    if (j < 1 || j > g.d) throw InvalidInput("coordinate sequence entry out of range");
  for (int j : jb)
    if (j < 1 || j > g.d) throw InvalidInput("coordinate sequence entry out of range");

  const long cells = g.grid.total_cells();
  const int nu = g.grid.nu;
  std::vector<double> centers(std::size_t(cells) * nu);
  for (long m = 0; m < cells; ++m) {
    const auto c = g.grid.cell_center(m);
    std::copy(c.begin(), c.end(), centers.begin() + std::size_t(m) * nu);
  }

  if (ka.k == 1) {
    cd acc(0.0, 0.0);
    for (long m = 0; m < cells; ++m) {
      const double* c = centers.data() + std::size_t(m) * nu;
      acc += ka.eval_at_sum(c) * std::conj(kb.eval_at_sum(c)) *
             g.mass[m](ja[0] - 1, jb[0] - 1);
    }
    return imag_checked(acc);
  }
  if (ka.k != 2)
    throw InvalidInput("exact second moments cover arities 1 and 2");
  if (double(cells) * double(cells) > double(kMaxDirectTuples))
    throw InvalidInput("too many cell pairs for the exact second moment");

  std::vector<long> pair_id(cells);
  for (long m = 0; m < cells; ++m)
    pair_id[m] = std::min(m, g.grid.negation(m));

  std::vector<double> s(nu);
  cd acc(0.0, 0.0);
  for (long m1 = 0; m1 < cells; ++m1) {
    const double* c1 = centers.data() + std::size_t(m1) * nu;
    for (long m2 = 0; m2 < cells; ++m2) {
      if (pair_id[m1] == pair_id[m2]) continue;
      const double* c2 = centers.data() + std::size_t(m2) * nu;
      for (int l = 0; l < nu; ++l) s[l] = c1[l] + c2[l];
      const cd weight = ka.eval_at_sum(s.data()) *
                        std::conj(kb.eval_at_sum(s.data()));
      acc += weight * (g.mass[m1](ja[0] - 1, jb[0] - 1) *
                           g.mass[m2](ja[1] - 1, jb[1] - 1) +
                       g.mass[m1](ja[0] - 1, jb[1] - 1) *
                           g.mass[m2](ja[1] - 1, jb[0] - 1));
    }
  }
  return imag_checked(acc);
}

// --------------------------------------------------------------- S0Sampler

namespace {

// order-k multi-index checks that tolerate an all-zero expansion
std::vector<std::pair<double, std::vector<int>>> expansion_terms(
    const HermiteExpansion& h) {
  if (h.d < 1 || h.d > 16) throw InvalidInput("expansion dimension must be 1..16");
  if (h.k < 1) throw InvalidInput("expansion order must be positive");
  IndexMaps maps{h.k, h.d};
  std::vector<std::pair<double, std::vector<int>>> terms;
  for (const auto& [kvec, c] : h.coefficients) {
    if (int(kvec.size()) != h.d)
      throw InvalidInput("multi-index length must match the dimension");
    int order = 0;
    for (int ki : kvec) {
      if (ki < 0) throw InvalidInput("multi-index entries must be nonnegative");
      order += ki;
    }
    if (order != h.k)
      throw InvalidInput("limit functional keeps only terms of the leading order");
    if (!std::isfinite(c)) throw InvalidInput("coefficients must be finite");
    if (c == 0.0) continue;
    terms.emplace_back(c, maps.slots(kvec));
  }
  return terms;
}

}  // namespace

S0Sampler::S0Sampler(const HermiteExpansion& h, const LimitSpectralModel& model,
                     const SymmetricPartition& partition, std::uint64_t seed)
    : h_(h),
      partition_(partition),
      params_(model.params),
      measure_(limit_measure_on_grid(model, partition.grid)),
      increments_(measure_),
      seed_(seed),
      terms_(expansion_terms(h)) {
  partition_.validate();
  model.dims.validate();
  if (model.dims.d != h_.d)
    throw InvalidInput("functional and model disagree on the coordinate count");
  if (model.dims.nu != partition_.grid.nu)
    throw InvalidInput("partition and model disagree on the dimension");
  if (params_.k != h_.k)
    throw InvalidInput("functional order and model order disagree");
  params_.validate(model.dims.nu);
}

KernelSpec S0Sampler::term_kernel(double coefficient,
                                  const std::vector<double>* t) const {
  KernelSpec kern;
  kern.nu = partition_.grid.nu;
  kern.k = h_.k;
  kern.coefficient = coefficient;
  if (t != nullptr) {
    kern.kind = KernelSpec::Kind::Rectangle;
    kern.t = *t;
  }
  return kern;
}

double S0Sampler::sample(std::uint64_t replicate) const {
  const auto z = increments_.sample(seed_, replicate);
  double out = 0.0;
  for (const auto& [c, jseq] : terms_)
    out += multiple_integral(term_kernel(c, nullptr), z, jseq);
  return out;
}

std::vector<double> S0Sampler::sample_joint(
    const std::vector<std::vector<double>>& ts, std::uint64_t replicate) const {
  if (ts.empty()) throw InvalidInput("need at least one rectangle corner");
  const auto z = increments_.sample(seed_, replicate);
  std::vector<double> out;
  out.reserve(ts.size());
  for (const auto& t : ts) {
    double value = 0.0;
    for (const auto& [c, jseq] : terms_)
      value += multiple_integral(term_kernel(c, &t), z, jseq);
    out.push_back(value);
  }
  return out;
}

double S0Sampler::discrete_variance() const {
  double out = 0.0;
  for (const auto& [ca, ja] : terms_)
    for (const auto& [cb, jb] : terms_)
      out += discrete_cross_moment(term_kernel(ca, nullptr), ja,
                                   term_kernel(cb, nullptr), jb, measure_);
  return out;
}

double S0Sampler::discrete_covariance(const std::vector<double>& ta,
                                      const std::vector<double>& tb) const {
  double out = 0.0;
  for (const auto& [ca, ja] : terms_)
    for (const auto& [cb, jb] : terms_)
      out += discrete_cross_moment(term_kernel(ca, &ta), ja,
                                   term_kernel(cb, &tb), jb, measure_);
  return out;
}

double sample_S0(const HermiteExpansion& h, const LimitSpectralModel& model,
                 const SymmetricPartition& partition, std::uint64_t seed,
                 std::uint64_t replicate) {
  return S0Sampler(h, model, partition, seed).sample(replicate);
}

std::vector<double> sample_S0_joint(const HermiteExpansion& h,
                                    const LimitSpectralModel& model,
                                    const SymmetricPartition& partition,
                                    const std::vector<std::vector<double>>& ts,
                                    std::uint64_t seed,
                                    std::uint64_t replicate) {
  return S0Sampler(h, model, partition, seed).sample_joint(ts, replicate);
}

// ---------------------------------------------------- self_similarity_check

SelfSimilarityReport self_similarity_check(const S0Sampler& sampler, double u,
                                           const std::vector<double>& t,
                                           int max_moment, int replicates) {
  if (!(u > 0.0)) throw InvalidInput("scale factor must be positive");
  if (max_moment < 1 || max_moment > 6)
    throw InvalidInput("moment orders must be 1..6");
  if (replicates < 2) throw InvalidInput("need at least two replicates");
  if (int(t.size()) != sampler.partition().grid.nu)
    throw InvalidInput("rectangle corner needs one entry per axis");

  SelfSimilarityReport rep;
  rep.u = u;
  rep.exponent = sampler.partition().grid.nu -
                 sampler.order() * sampler.params().alpha / 2.0;

  std::vector<double> ut(t);
  for (double& v : ut) v *= u;

  // paired differences d_r = |S0(ut)|^m - u^{m theta} |S0(t)|^m per order
  std::vector<double> scale(max_moment);
  for (int m = 1; m <= max_moment; ++m)
    scale[m - 1] = std::pow(u, double(m) * rep.exponent);
  std::vector<double> mean_t(max_moment, 0.0), mean_ut(max_moment, 0.0);
  std::vector<double> mean_d(max_moment, 0.0), m2_d(max_moment, 0.0);
  const std::vector<std::vector<double>> ts{t, ut};
  for (int r = 0; r < replicates; ++r) {
    const auto v = sampler.sample_joint(ts, std::uint64_t(r));
    for (int m = 1; m <= max_moment; ++m) {
      const double at = std::pow(std::abs(v[0]), double(m));
      const double aut = std::pow(std::abs(v[1]), double(m));
      const double diff = aut - scale[m - 1] * at;
      mean_t[m - 1] += (at - mean_t[m - 1]) / double(r + 1);
      mean_ut[m - 1] += (aut - mean_ut[m - 1]) / double(r + 1);
      const double delta = diff - mean_d[m - 1];
      mean_d[m - 1] += delta / double(r + 1);
      m2_d[m - 1] += delta * (diff - mean_d[m - 1]);
    }
  }

  rep.moment_t = mean_t;
  rep.moment_ut = mean_ut;
  rep.z.resize(max_moment);
  bool ok = true;
  for (int m = 0; m < max_moment; ++m) {
    const double se =
        std::sqrt(m2_d[m] / double(replicates - 1) / double(replicates));
    rep.z[m] = se > 0.0 ? mean_d[m] / se : 0.0;
    ok = ok && std::abs(rep.z[m]) <= 3.0;
  }
  rep.pass = ok;
  return rep;
}

}  // namespace lrd
