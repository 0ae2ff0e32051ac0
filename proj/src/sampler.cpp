#include "lrdlab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <optional>
#include <ostream>

#include "lrdlab/fft.hpp"
#include "lrdlab/rng.hpp"

namespace lrd {

namespace {

using cd = std::complex<double>;

constexpr long kMaxDirectOrder = 4096;      // rows of the block covariance
constexpr long kMaxCirculantCells = 1 << 22;

long block_points(int nu, int block) {
  if (block < 1) throw InvalidInput("sampler block size must be >= 1");
  return ipow(block, nu);
}

// forward = e^{-2 pi i}, inverse = e^{+2 pi i}; nu = 1 or 2, square grids
void fftn(std::vector<cd>& a, int nu, int n_axis, bool inverse) {
  if (nu == 1) {
    fft_inplace(a, inverse);
  } else {
    fft2_inplace(a, n_axis, n_axis, inverse);
  }
}

std::vector<int> unpack_index(long flat, int nu, int n_axis) {
  std::vector<int> ix(nu);
  for (int i = nu - 1; i >= 0; --i) {
    ix[i] = int(flat % n_axis);
    flat /= n_axis;
  }
  return ix;
}

}  // namespace

const char* sampler_method_name(SamplerMethod m) {
  switch (m) {
    case SamplerMethod::DirectFactorization: return "direct-factorization";
    case SamplerMethod::CirculantEmbedding: return "circulant-embedding";
    case SamplerMethod::SpectralGrid: return "spectral-grid";
  }
  return "unknown";
}

SamplerMethod parse_sampler_method(const std::string& name) {
  if (name == "direct-factorization") return SamplerMethod::DirectFactorization;
  if (name == "circulant-embedding") return SamplerMethod::CirculantEmbedding;
  if (name == "spectral-grid") return SamplerMethod::SpectralGrid;
  throw InvalidInput("unknown sampler method: " + name +
                     " (expected direct-factorization, circulant-embedding or "
                     "spectral-grid)");
}

double FieldSample::at(int j, const std::vector<int>& p) const {
  if (j < 0 || j >= dims.d) throw InvalidInput("field coordinate out of range");
  if (int(p.size()) != dims.nu)
    throw InvalidInput("lattice point has the wrong dimension");
  long flat = 0;
  for (int i = 0; i < dims.nu; ++i) {
    if (p[i] < 0 || p[i] >= block)
      throw InvalidInput("lattice point outside the sampled block");
    flat = flat * block + p[i];
  }
  return values(j, flat);
}

void FieldSample::write_binary(std::ostream& out) const {
  const char magic[8] = {'L', 'R', 'D', 'F', 'I', 'E', 'L', 'D'};
  out.write(magic, 8);
  auto put_i32 = [&out](std::int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  auto put_u64 = [&out](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  };
  put_i32(1);  // format version
  put_i32(dims.nu);
  put_i32(dims.d);
  put_i32(block);
  put_u64(seed);
  put_u64(replicate);
  put_i32(static_cast<std::int32_t>(method));
  for (int j = 0; j < dims.d; ++j)
    for (long u = 0; u < values.cols(); ++u) {
      double v = values(j, u);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!out) throw NumericFailure("field sample write failed");
}

FieldSample FieldSample::read_binary(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "LRDFIELD")
    throw InvalidInput("not a field sample file");
  auto get_i32 = [&in]() {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  auto get_u64 = [&in]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  };
  if (get_i32() != 1) throw InvalidInput("unsupported field sample version");
  FieldSample s;
  s.dims.nu = get_i32();
  s.dims.d = get_i32();
  s.block = get_i32();
  s.dims.validate();
  if (s.block < 1) throw InvalidInput("field sample block size must be >= 1");
  s.seed = get_u64();
  s.replicate = get_u64();
  int method = get_i32();
  if (method < 0 || method > 2)
    throw InvalidInput("field sample method tag out of range");
  s.method = static_cast<SamplerMethod>(method);
  long pts = block_points(s.dims.nu, s.block);
  s.values.resize(s.dims.d, pts);
  for (int j = 0; j < s.dims.d; ++j)
    for (long u = 0; u < pts; ++u) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      s.values(j, u) = v;
    }
  if (!in) throw InvalidInput("truncated field sample file");
  return s;
}

void FieldSample::write_csv(std::ostream& out) const {
  for (int i = 0; i < dims.nu; ++i) out << "p" << (i + 1) << ",";
  out << "j,value\n";
  long pts = values.cols();
  for (long u = 0; u < pts; ++u) {
    auto p = unpack_index(u, dims.nu, block);
    for (int j = 0; j < dims.d; ++j) {
      for (int i = 0; i < dims.nu; ++i) out << p[i] << ",";
      out << j << "," << values(j, u) << "\n";
    }
  }
}

struct FieldSampler::Impl {
  // direct factorization
  std::optional<CovarianceTable> cov;
  Eigen::MatrixXd direct_map;

  // circulant embedding
  int emb = 0;  // per-axis circulant size
  std::vector<Eigen::MatrixXcd> circ_factor;
  std::vector<Eigen::MatrixXd> circ_induced;

  // spectral grid
  CellGrid grid;
  std::vector<Eigen::MatrixXcd> cell_factor;
  std::vector<Eigen::MatrixXcd> cell_clipped;
};

FieldSampler::FieldSampler() : impl_(new Impl) {}
FieldSampler::FieldSampler(FieldSampler&&) noexcept = default;
FieldSampler& FieldSampler::operator=(FieldSampler&&) noexcept = default;
FieldSampler::~FieldSampler() = default;

namespace {

void check_config(const SamplerConfig& cfg) {
  if (cfg.embedding_factor < 2)
    throw InvalidInput("embedding factor must be >= 2");
  if (!(cfg.clip_tolerance >= 0.0))
    throw InvalidInput("clip tolerance must be >= 0");
  if (cfg.spectral_cells < 2)
    throw InvalidInput("spectral grid needs at least 2 cells per axis");
}

}  // namespace

FieldSampler FieldSampler::from_table(const CovarianceTable& cov, int block,
                                      const SamplerConfig& cfg) {
  check_config(cfg);
  if (cfg.method == SamplerMethod::SpectralGrid)
    throw InvalidInput(
        "spectral-grid sampling draws from a density, use from_model");
  FieldSampler s;
  s.dims_ = LatticeDims{cov.nu(), cov.d()};
  s.dims_.validate();
  s.block_ = block;
  s.cfg_ = cfg;
  int nu = cov.nu(), d = cov.d();
  long pts = block_points(nu, block);

  if (cfg.method == SamplerMethod::DirectFactorization) {
    long n = pts * d;
    if (n > kMaxDirectOrder)
      throw InvalidInput("direct factorization block is too large");
    if (cov.max_lag() < block - 1)
      throw InvalidInput("covariance table too small for the requested block");
    // lag table first, then the block covariance; entry ((u,j),(v,j')) is
    // r_{j,j'}(v - u)
    int span = 2 * block - 1;
    long lag_cells = ipow(span, nu);
    std::vector<Eigen::MatrixXd> lag_table(lag_cells);
    std::vector<int> lag(nu);
    for (long f = 0; f < lag_cells; ++f) {
      auto ix = unpack_index(f, nu, span);
      for (int i = 0; i < nu; ++i) lag[i] = ix[i] - (block - 1);
      lag_table[f] = cov.at(lag);
    }
    Eigen::MatrixXd sigma(n, n);
    for (long u = 0; u < pts; ++u) {
      auto pu = unpack_index(u, nu, block);
      for (long v = 0; v < pts; ++v) {
        auto pv = unpack_index(v, nu, block);
        long f = 0;
        for (int i = 0; i < nu; ++i) f = f * span + (pv[i] - pu[i] + block - 1);
        sigma.block(u * d, v * d, d, d) = lag_table[f];
      }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() == Eigen::Success) {
      s.impl_->direct_map = llt.matrixL();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
      Eigen::VectorXd lam = es.eigenvalues();
      double lmax = std::max(lam.maxCoeff(), 0.0);
      if (lam.minCoeff() < -cfg.clip_tolerance * lmax)
        throw NumericFailure(
            "block covariance is not positive semidefinite (min eigenvalue " +
            std::to_string(lam.minCoeff()) + ")");
      for (int i = 0; i < lam.size(); ++i) {
        if (lam[i] < 0.0) {
          s.clip_total_ += -lam[i];
          lam[i] = 0.0;
        }
      }
      s.impl_->direct_map = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
    }
    s.impl_->cov.emplace(cov);
    return s;
  }

  // circulant embedding
  if (nu > 2) throw InvalidInput("circulant embedding supports nu <= 2");
  int emb = cfg.embedding_factor * block;
  long cells = ipow(emb, nu);
  if (cells > kMaxCirculantCells)
    throw InvalidInput("circulant embedding is too large");
  if (cov.max_lag() < emb / 2)
    throw InvalidInput(
        "covariance table too small for the circulant embedding");
  s.impl_->emb = emb;

  // wrapped covariance c(q) = (r(rep q) + r(rep -q)^T) / 2; the
  // symmetrization only matters on the self-paired Nyquist cells and makes
  // every per-frequency spectral matrix Hermitian
  std::vector<Eigen::MatrixXd> wrapped(cells);
  std::vector<int> rep(nu), rep_neg(nu);
  for (long q = 0; q < cells; ++q) {
    auto ix = unpack_index(q, nu, emb);
    for (int i = 0; i < nu; ++i) {
      rep[i] = ix[i] <= emb / 2 ? ix[i] : ix[i] - emb;
      int ni = (emb - ix[i]) % emb;
      rep_neg[i] = ni <= emb / 2 ? ni : ni - emb;
    }
    wrapped[q] = 0.5 * (cov.at(rep) + cov.at(rep_neg).transpose());
  }
  std::vector<Eigen::MatrixXcd> spec(cells, Eigen::MatrixXcd(d, d));
  std::vector<cd> buf(cells);
  for (int j = 0; j < d; ++j)
    for (int jp = 0; jp < d; ++jp) {
      for (long q = 0; q < cells; ++q) buf[q] = wrapped[q](j, jp);
      fftn(buf, nu, emb, false);
      for (long q = 0; q < cells; ++q) spec[q](j, jp) = buf[q];
    }

  std::vector<Eigen::MatrixXcd> vecs(cells);
  std::vector<Eigen::VectorXd> vals(cells);
  double lmax = 0.0;
  for (long q = 0; q < cells; ++q) {
    Eigen::MatrixXcd h = 0.5 * (spec[q] + spec[q].adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    vecs[q] = es.eigenvectors();
    vals[q] = es.eigenvalues();
    lmax = std::max(lmax, vals[q].maxCoeff());
  }
  double floor = -cfg.clip_tolerance * lmax;
  s.impl_->circ_factor.resize(cells);
  std::vector<Eigen::MatrixXcd> clipped(cells);
  for (long q = 0; q < cells; ++q) {
    Eigen::VectorXd lam = vals[q];
    if (lam.minCoeff() < floor)
      throw NumericFailure(
          "circulant embedding spectrum has negative eigenvalues beyond the "
          "clip tolerance (min " +
          std::to_string(lam.minCoeff()) + ", scale " + std::to_string(lmax) +
          "); increase embedding_factor or clip_tolerance");
    for (int i = 0; i < lam.size(); ++i) {
      if (lam[i] < 0.0) {
        s.clip_total_ += -lam[i];
        lam[i] = 0.0;
      }
    }
    s.impl_->circ_factor[q] = vecs[q] * lam.cwiseSqrt().asDiagonal();
    clipped[q] = vecs[q] * lam.asDiagonal() * vecs[q].adjoint();
  }

  // covariance the clipped embedding realizes, one inverse transform per entry
  s.impl_->circ_induced.assign(cells, Eigen::MatrixXd(d, d));
  for (int j = 0; j < d; ++j)
    for (int jp = 0; jp < d; ++jp) {
      for (long q = 0; q < cells; ++q) buf[q] = clipped[q](j, jp);
      fftn(buf, nu, emb, true);
      for (long q = 0; q < cells; ++q)
        s.impl_->circ_induced[q](j, jp) = buf[q].real() / double(cells);
    }
  return s;
}

FieldSampler FieldSampler::from_measure(const MatrixSpectralMeasureOnGrid& g,
                                        int block, const SamplerConfig& cfg) {
  check_config(cfg);
  if (cfg.method != SamplerMethod::SpectralGrid)
    throw InvalidInput("from_measure only supports the spectral-grid method");
  g.grid.validate();
  if (std::abs(g.grid.half_width - M_PI) > 1e-12)
    throw InvalidInput("spectral-grid sampling needs a grid on [-pi,pi)^nu");
  for (int i = 1; i < g.grid.nu; ++i)
    if (g.grid.cells[i] != g.grid.cells[0])
      throw InvalidInput("spectral-grid sampling needs equal per-axis counts");
  FieldSampler s;
  s.dims_ = LatticeDims{g.grid.nu, g.d};
  s.dims_.validate();
  s.block_ = block;
  block_points(g.grid.nu, block);
  s.cfg_ = cfg;
  s.impl_->grid = g.grid;
  long cells = g.grid.total_cells();
  s.impl_->cell_factor.resize(cells);
  s.impl_->cell_clipped.resize(cells);
  double lmax = 0.0;
  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>> eig(cells);
  for (long c = 0; c < cells; ++c) {
    eig[c].compute(0.5 * (g.mass[c] + g.mass[c].adjoint()));
    lmax = std::max(lmax, eig[c].eigenvalues().maxCoeff());
  }
  double floor = -cfg.clip_tolerance * lmax;
  for (long c = 0; c < cells; ++c) {
    Eigen::VectorXd lam = eig[c].eigenvalues();
    if (lam.minCoeff() < floor)
      throw NumericFailure(
          "spectral cell mass has negative eigenvalues beyond the clip "
          "tolerance (min " +
          std::to_string(lam.minCoeff()) + ")");
    for (int i = 0; i < lam.size(); ++i) {
      if (lam[i] < 0.0) {
        s.clip_total_ += -lam[i];
        lam[i] = 0.0;
      }
    }
    s.impl_->cell_factor[c] = eig[c].eigenvectors() * lam.cwiseSqrt().asDiagonal();
    s.impl_->cell_clipped[c] =
        eig[c].eigenvectors() * lam.asDiagonal() * eig[c].eigenvectors().adjoint();
  }
  return s;
}

FieldSampler FieldSampler::from_model(const SpectralDensityModel& m, int block,
                                      const SamplerConfig& cfg) {
  return from_measure(measure_from_model(m, cfg.spectral_cells), block, cfg);
}

FieldSample FieldSampler::sample(std::uint64_t replicate) const {
  int nu = dims_.nu, d = dims_.d;
  long pts = block_points(nu, block_);
  FieldSample out;
  out.dims = dims_;
  out.block = block_;
  out.seed = cfg_.seed;
  out.replicate = replicate;
  out.method = cfg_.method;
  out.values.resize(d, pts);

  if (cfg_.method == SamplerMethod::DirectFactorization) {
    NormalStream ns(cfg_.seed, replicate, StreamPurpose::FieldDirect);
    long n = pts * d;
    Eigen::VectorXd z(n);
    for (long i = 0; i < n; ++i) z[i] = ns.next_normal();
    Eigen::VectorXd x = impl_->direct_map * z;
    for (long u = 0; u < pts; ++u)
      for (int j = 0; j < d; ++j) out.values(j, u) = x[u * d + j];
    return out;
  }

  if (cfg_.method == SamplerMethod::CirculantEmbedding) {
    // X(p) = sqrt(2 / M^nu) Re sum_xi e^{i 2 pi p.xi / M} A(xi) w(xi) with
    // w iid complex standard normal; the discarded imaginary part makes the
    // real part carry exactly the circulant covariance
    NormalStream ns(cfg_.seed, replicate, StreamPurpose::FieldCirculant);
    int emb = impl_->emb;
    long cells = ipow(emb, nu);
    std::vector<std::vector<cd>> comp(d, std::vector<cd>(cells));
    Eigen::VectorXcd w(d), y(d);
    for (long q = 0; q < cells; ++q) {
      for (int j = 0; j < d; ++j) w[j] = ns.next_complex_normal();
      y.noalias() = impl_->circ_factor[q] * w;
      for (int j = 0; j < d; ++j) comp[j][q] = y[j];
    }
    double scale = std::sqrt(2.0 / double(cells));
    for (int j = 0; j < d; ++j) {
      fftn(comp[j], nu, emb, true);
      for (long u = 0; u < pts; ++u) {
        auto p = unpack_index(u, nu, block_);
        long f = 0;
        for (int i = 0; i < nu; ++i) f = f * emb + p[i];
        out.values(j, u) = scale * comp[j][f].real();
      }
    }
    return out;
  }

  // spectral grid: X(p) = sqrt(2) Re sum_c e^{i p.x_c} B_c w_c, evaluated
  // with one inverse transform per coordinate since the centers are uniform
  NormalStream ns(cfg_.seed, replicate, StreamPurpose::FieldSpectralGrid);
  const CellGrid& grid = impl_->grid;
  long cells = grid.total_cells();
  int n_axis = grid.cells[0];
  std::vector<std::vector<cd>> comp(d, std::vector<cd>(cells));
  Eigen::VectorXcd w(d), y(d);
  for (long c = 0; c < cells; ++c) {
    for (int j = 0; j < d; ++j) w[j] = ns.next_complex_normal();
    y.noalias() = impl_->cell_factor[c] * w;
    for (int j = 0; j < d; ++j) comp[j][c] = y[j];
  }
  // e^{i p x_c} = phase0(p) e^{i 2 pi p c / C} with x_c = -pi + (c + 1/2) w
  double wdt = grid.width(0);
  std::vector<cd> phase0(block_);
  for (int p = 0; p < block_; ++p)
    phase0[p] = std::polar(1.0, p * (0.5 * wdt - M_PI));
  double scale = std::sqrt(2.0);
  for (int j = 0; j < d; ++j) {
    fftn(comp[j], nu, n_axis, true);
    for (long u = 0; u < pts; ++u) {
      auto p = unpack_index(u, nu, block_);
      long f = 0;
      cd ph(1.0, 0.0);
      for (int i = 0; i < nu; ++i) {
        f = f * n_axis + (p[i] % n_axis);
        ph *= phase0[p[i]];
      }
      out.values(j, u) = scale * (ph * comp[j][f]).real();
    }
  }
  return out;
}

Eigen::MatrixXd FieldSampler::induced_covariance(
    const std::vector<int>& lag) const {
  if (int(lag.size()) != dims_.nu)
    throw InvalidInput("lag has the wrong dimension");
  if (cfg_.method == SamplerMethod::DirectFactorization)
    return impl_->cov->at(lag);
  if (cfg_.method == SamplerMethod::CirculantEmbedding) {
    int emb = impl_->emb;
    long f = 0;
    for (int i = 0; i < dims_.nu; ++i) {
      if (std::abs(lag[i]) > emb / 2)
        throw InvalidInput("lag outside the circulant embedding range");
      f = f * emb + ((lag[i] % emb) + emb) % emb;
    }
    return impl_->circ_induced[f];
  }
  const CellGrid& grid = impl_->grid;
  long cells = grid.total_cells();
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(dims_.d, dims_.d);
  for (long c = 0; c < cells; ++c) {
    auto x = grid.cell_center(c);
    double phase = 0.0;
    for (int i = 0; i < dims_.nu; ++i) phase += lag[i] * x[i];
    acc += std::polar(1.0, phase) * impl_->cell_clipped[c];
  }
  return acc.real();
}

const Eigen::MatrixXd& FieldSampler::direct_factor() const {
  if (cfg_.method != SamplerMethod::DirectFactorization)
    throw InvalidInput("direct factor only exists for direct-factorization");
  return impl_->direct_map;
}

FieldSample sample_field(const CovarianceTable& cov, int block,
                         const SamplerConfig& cfg, std::uint64_t replicate) {
  return FieldSampler::from_table(cov, block, cfg).sample(replicate);
}

EmpiricalCovariance empirical_covariance(const std::vector<FieldSample>& samples,
                                         int max_lag) {
  if (samples.size() < 2)
    throw InvalidInput("empirical covariance needs at least two replicates");
  const FieldSample& first = samples.front();
  int nu = first.dims.nu, d = first.dims.d, block = first.block;
  if (max_lag < 1 || max_lag >= block)
    throw InvalidInput("empirical covariance max_lag must be in [1, block)");
  for (const auto& s : samples)
    if (s.dims.nu != nu || s.dims.d != d || s.block != block)
      throw InvalidInput("empirical covariance needs identically shaped samples");

  int span = 2 * max_lag + 1;
  long lag_cells = nu == 1 ? max_lag + 1 : ipow(span, nu);
  std::vector<Eigen::MatrixXd> mean(lag_cells, Eigen::MatrixXd::Zero(d, d));
  std::vector<Eigen::MatrixXd> m2(lag_cells, Eigen::MatrixXd::Zero(d, d));
  std::vector<int> lag(nu);
  Eigen::MatrixXd est(d, d);

  long count = 0;
  for (const auto& s : samples) {
    ++count;
    for (long f = 0; f < lag_cells; ++f) {
      if (nu == 1) {
        int p = int(f);
        long n_pairs = block - p;
        est.noalias() = s.values.leftCols(n_pairs) *
                        s.values.middleCols(p, n_pairs).transpose();
        est /= double(n_pairs);
      } else {
        auto ix = unpack_index(f, nu, span);
        for (int i = 0; i < nu; ++i) lag[i] = ix[i] - max_lag;
        est.setZero();
        int lo0 = std::max(0, -lag[0]), hi0 = block - 1 - std::max(0, lag[0]);
        int lo1 = std::max(0, -lag[1]), hi1 = block - 1 - std::max(0, lag[1]);
        long n_pairs = long(hi0 - lo0 + 1) * (hi1 - lo1 + 1);
        for (int u0 = lo0; u0 <= hi0; ++u0)
          for (int u1 = lo1; u1 <= hi1; ++u1) {
            long a = long(u0) * block + u1;
            long b = long(u0 + lag[0]) * block + (u1 + lag[1]);
            est.noalias() += s.values.col(a) * s.values.col(b).transpose();
          }
        est /= double(n_pairs);
      }
      Eigen::MatrixXd delta = est - mean[f];
      mean[f] += delta / double(count);
      m2[f] += delta.cwiseProduct(est - mean[f]);
    }
  }

  long reps = long(samples.size());
  std::vector<Eigen::MatrixXd> se(lag_cells);
  for (long f = 0; f < lag_cells; ++f)
    se[f] = (m2[f] / double(reps - 1) / double(reps)).cwiseSqrt();

  LatticeDims dims{nu, d};
  auto pick = [&](const std::vector<Eigen::MatrixXd>& table,
                  const std::vector<int>& p) {
    long f = 0;
    if (nu == 1) {
      f = p[0];
    } else {
      for (int i = 0; i < nu; ++i) f = f * span + (p[i] + max_lag);
    }
    return table[f];
  };
  EmpiricalCovariance out{
      dims, max_lag, int(reps),
      CovarianceTable::from_values(
          dims, max_lag,
          [&](const std::vector<int>& p) { return pick(mean, p); }),
      CovarianceTable::from_values(
          dims, max_lag,
          [&](const std::vector<int>& p) { return pick(se, p); })};
  return out;
}

}  // namespace lrd
