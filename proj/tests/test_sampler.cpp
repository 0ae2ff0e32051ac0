#include "lrdlab/sampler.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "lrdlab/common.hpp"
#include "lrdlab/covariance.hpp"
#include "lrdlab/density.hpp"
#include "lrdlab/spectral_measure.hpp"

using namespace lrd;

namespace {

// white noise, unit variance
CovarianceTable white_table(int d, int max_lag) {
  return CovarianceTable::from_values(
      LatticeDims{1, d}, max_lag, [d](const std::vector<int>& p) {
        return p[0] == 0 ? Eigen::MatrixXd::Identity(d, d).eval()
                         : Eigen::MatrixXd::Zero(d, d).eval();
      });
}

// X_j = a_j Z + e_j with Z an AR(1) chain and e white, so the block
// covariance is positive definite by construction
CovarianceTable factor_plus_noise_table(int max_lag) {
  Eigen::Vector2d a(1.0, 0.6);
  return CovarianceTable::from_values(
      LatticeDims{1, 2}, max_lag, [a](const std::vector<int>& p) {
        Eigen::MatrixXd r = std::pow(0.9, std::abs(p[0])) * (a * a.transpose());
        if (p[0] == 0) r += Eigen::MatrixXd::Identity(2, 2);
        return r;
      });
}

SpectralDensityModel power_law_scalar() {
  return make_model(LatticeDims{1, 1}, LongRangeParams{0.4, 1},
                    SlowVarying::constant(), "one", nlohmann::json::object(),
                    "raised_cosine_sq", nlohmann::json::object());
}

bool same_values(const FieldSample& x, const FieldSample& y) {
  if (x.values.rows() != y.values.rows() || x.values.cols() != y.values.cols())
    return false;
  for (long u = 0; u < x.values.cols(); ++u)
    for (int j = 0; j < x.values.rows(); ++j)
      if (x.values(j, u) != y.values(j, u)) return false;
  return true;
}

}  // namespace

TEST_CASE("sampler method names round trip") {
  for (auto m : {SamplerMethod::DirectFactorization,
                 SamplerMethod::CirculantEmbedding, SamplerMethod::SpectralGrid})
    CHECK(parse_sampler_method(sampler_method_name(m)) == m);
  CHECK_THROWS_AS(parse_sampler_method("cholesky"), InvalidInput);
}

TEST_CASE("field sample container and exports") {
  FieldSample s;
  s.dims = LatticeDims{1, 2};
  s.block = 3;
  s.seed = 42;
  s.replicate = 7;
  s.method = SamplerMethod::CirculantEmbedding;
  s.values.resize(2, 3);
  s.values << 1.5, -2.0, 0.25, 3.0, 4.0, -5.5;

  CHECK(s.at(0, {1}) == -2.0);
  CHECK(s.at(1, {2}) == -5.5);
  CHECK_THROWS_AS(s.at(2, {0}), InvalidInput);
  CHECK_THROWS_AS(s.at(0, {3}), InvalidInput);
  CHECK_THROWS_AS(s.at(0, {0, 0}), InvalidInput);

  std::ostringstream csv;
  s.write_csv(csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "p1,j,value");
  std::getline(lines, line);
  CHECK(line == "0,0,1.5");
  int rows = 1;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 6);

  std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
  s.write_binary(bin);
  FieldSample back = FieldSample::read_binary(bin);
  CHECK(back.dims.nu == 1);
  CHECK(back.dims.d == 2);
  CHECK(back.block == 3);
  CHECK(back.seed == 42);
  CHECK(back.replicate == 7);
  CHECK(back.method == SamplerMethod::CirculantEmbedding);
  CHECK(same_values(s, back));

  std::istringstream junk("not a field sample at all, really");
  CHECK_THROWS_AS(FieldSample::read_binary(junk), InvalidInput);
}

TEST_CASE("direct factorization reproduces the block covariance exactly") {
  const int n_block = 32;
  CovarianceTable cov = factor_plus_noise_table(n_block - 1);
  SamplerConfig cfg;
  cfg.method = SamplerMethod::DirectFactorization;
  cfg.seed = 2024;
  FieldSampler sampler = FieldSampler::from_table(cov, n_block, cfg);

  const Eigen::MatrixXd& map = sampler.direct_factor();
  int n = 2 * n_block;
  REQUIRE(map.rows() == n);
  Eigen::MatrixXd sigma(n, n);
  for (int u = 0; u < n_block; ++u)
    for (int v = 0; v < n_block; ++v)
      sigma.block(2 * u, 2 * v, 2, 2) = cov.at({v - u});
  CHECK((map * map.transpose() - sigma).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK_FALSE(sampler.clipped());

  FieldSample a = sampler.sample(5);
  FieldSample b = sampler.sample(5);
  CHECK(same_values(a, b));
  CHECK(a.seed == 2024);
  CHECK(a.replicate == 5);
  CHECK(a.method == SamplerMethod::DirectFactorization);
  CHECK(a.values.allFinite());

  FieldSample c = sampler.sample(6);
  CHECK_FALSE(same_values(a, c));

  SamplerConfig other = cfg;
  other.seed = 2025;
  FieldSample d = FieldSampler::from_table(cov, n_block, other).sample(5);
  CHECK_FALSE(same_values(a, d));

  FieldSample e = sample_field(cov, n_block, cfg, 5);
  CHECK(same_values(a, e));

  CHECK(sampler.induced_covariance({3})(0, 1) ==
        doctest::Approx(cov.entry(0, 1, {3})).epsilon(1e-14));
}

TEST_CASE("direct factorization rejects an indefinite window") {
  // r = (1, 0.8, -0.9) makes the 3-point Toeplitz window indefinite
  // (eigenvalues -0.668, 1.768, 1.9) while the 2-point window stays fine
  CovarianceTable cov = CovarianceTable::from_values(
      LatticeDims{1, 1}, 4, [](const std::vector<int>& p) {
        double vals[] = {1.0, 0.8, -0.9, 0.0, 0.0};
        Eigen::MatrixXd r(1, 1);
        r << vals[std::abs(p[0])];
        return r;
      });
  SamplerConfig cfg;
  cfg.method = SamplerMethod::DirectFactorization;
  CHECK_THROWS_AS(FieldSampler::from_table(cov, 3, cfg), NumericFailure);
  CHECK_NOTHROW(FieldSampler::from_table(cov, 2, cfg));
  CHECK_THROWS_AS(FieldSampler::from_table(cov, 6, cfg), InvalidInput);
}

TEST_CASE("white noise sampling matches its covariance within three standard "
          "errors") {
  const int n_block = 4;
  const int reps = 100000;
  CovarianceTable cov = white_table(1, n_block - 1);
  SamplerConfig cfg;
  cfg.method = SamplerMethod::DirectFactorization;
  cfg.seed = 91;
  FieldSampler sampler = FieldSampler::from_table(cov, n_block, cfg);
  std::vector<FieldSample> samples;
  samples.reserve(reps);
  for (int r = 0; r < reps; ++r) samples.push_back(sampler.sample(r));

  EmpiricalCovariance emp = empirical_covariance(samples, n_block - 1);
  CHECK(emp.replicates == reps);
  for (int p = 0; p <= n_block - 1; ++p) {
    double want = p == 0 ? 1.0 : 0.0;
    double got = emp.mean.entry(0, 0, {p});
    double se = emp.stderr_table.entry(0, 0, {p});
    CHECK(se > 0.0);
    CHECK(se < 0.01);
    CHECK(std::abs(got - want) <= 3.0 * se);
  }
}

TEST_CASE("circulant embedding realizes the table covariance when unclipped") {
  // truncated geometric plus white noise keeps every spectral value >= 1,
  // so nothing is clipped and the realized covariance is the table itself
  const int n_block = 64;
  CovarianceTable cov = factor_plus_noise_table(128);
  SamplerConfig cfg;
  cfg.method = SamplerMethod::CirculantEmbedding;
  cfg.seed = 7;
  cfg.embedding_factor = 4;
  FieldSampler sampler = FieldSampler::from_table(cov, n_block, cfg);
  CHECK_FALSE(sampler.clipped());

  double worst = 0.0;
  for (int p = -n_block; p <= n_block; ++p)
    worst = std::max(worst, (sampler.induced_covariance({p}) - cov.at({p}))
                                .cwiseAbs()
                                .maxCoeff());
  CHECK(worst <= 1e-8);
  CHECK(sampler.induced_covariance({-5})(0, 1) ==
        doctest::Approx(sampler.induced_covariance({5})(1, 0)).epsilon(1e-13));

  FieldSample a = sampler.sample(11);
  FieldSample b = sampler.sample(11);
  CHECK(same_values(a, b));
  CHECK(a.values.allFinite());
  CHECK(a.points() == n_block);
  CHECK_FALSE(same_values(a, sampler.sample(12)));
  CHECK_THROWS_AS(sampler.direct_factor(), InvalidInput);

  // needs lags up to embedding_factor * block / 2
  CHECK_THROWS_AS(FieldSampler::from_table(cov, 300, cfg), InvalidInput);
}

TEST_CASE("circulant embedding of a long-range field clips a small spectral "
          "overshoot") {
  // the density vanishes at the torus edge, so the truncated spectrum dips
  // slightly negative at every embedding size; the dip shrinks with the
  // embedding factor and stays far below the covariance scale
  const int n_block = 128;
  CovarianceTable cov = CovarianceTable::from_model(power_law_scalar(), 256);
  SamplerConfig cfg;
  cfg.method = SamplerMethod::CirculantEmbedding;
  cfg.seed = 7;
  cfg.embedding_factor = 2;
  CHECK_THROWS_AS(FieldSampler::from_table(cov, n_block, cfg), NumericFailure);

  cfg.clip_tolerance = 1e-5;
  FieldSampler sampler = FieldSampler::from_table(cov, n_block, cfg);
  CHECK(sampler.clipped());
  CHECK(sampler.clip_total() < 1e-2);
  double worst = 0.0;
  for (int p = 0; p <= n_block; ++p)
    worst = std::max(worst, std::abs(sampler.induced_covariance({p})(0, 0) -
                                     cov.entry(0, 0, {p})));
  CHECK(worst <= 1e-4);
  CHECK(sampler.sample(0).values.allFinite());
}

TEST_CASE("circulant embedding failure and clipping") {
  // r = (1, 0.7): spectrum 1 + 1.4 cos(2 pi xi / M) dips to -0.4
  const int n_block = 8;
  CovarianceTable cov = CovarianceTable::from_values(
      LatticeDims{1, 1}, 8, [](const std::vector<int>& p) {
        Eigen::MatrixXd r(1, 1);
        r << (p[0] == 0 ? 1.0 : (p[0] == 1 ? 0.7 : 0.0));
        return r;
      });
  SamplerConfig cfg;
  cfg.method = SamplerMethod::CirculantEmbedding;
  cfg.seed = 3;
  CHECK_THROWS_AS(FieldSampler::from_table(cov, n_block, cfg), NumericFailure);

  cfg.clip_tolerance = 0.5;
  FieldSampler clipped = FieldSampler::from_table(cov, n_block, cfg);
  CHECK(clipped.clipped());
  CHECK(clipped.clip_total() > 0.0);
  CHECK(clipped.sample(0).values.allFinite());

  // clipping biases the realized covariance; compare against the clipped
  // spectrum transformed back by hand
  int emb = cfg.embedding_factor * n_block;
  for (int q : {0, 1, 2}) {
    std::complex<double> acc = 0.0;
    for (int xi = 0; xi < emb; ++xi) {
      double lam = 1.0 + 1.4 * std::cos(2.0 * M_PI * xi / emb);
      acc += std::max(lam, 0.0) *
             std::polar(1.0, 2.0 * M_PI * q * double(xi) / emb);
    }
    CHECK(clipped.induced_covariance({q})(0, 0) ==
          doctest::Approx(acc.real() / emb).epsilon(1e-12));
  }
  CHECK(std::abs(clipped.induced_covariance({1})(0, 0) - 0.7) > 1e-3);
}

TEST_CASE("direct and circulant sampling agree on a long-range pair field") {
  const int n_block = 1 << 10;
  SpectralDensityModel model = make_model(
      LatticeDims{1, 2}, LongRangeParams{0.4, 1}, SlowVarying::constant(),
      "diagonal", {{"values", {1.0, 0.5}}}, "raised_cosine_sq",
      nlohmann::json::object());
  CovarianceTable cov = CovarianceTable::from_model(model, n_block);

  const int reps = 150;
  const int max_lag = 8;
  auto run = [&](SamplerMethod method, std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.method = method;
    cfg.seed = seed;
    FieldSampler sampler = FieldSampler::from_table(cov, n_block, cfg);
    std::vector<FieldSample> samples;
    samples.reserve(reps);
    for (int r = 0; r < reps; ++r) samples.push_back(sampler.sample(r));
    return empirical_covariance(samples, max_lag);
  };
  EmpiricalCovariance direct = run(SamplerMethod::DirectFactorization, 1001);
  EmpiricalCovariance circ = run(SamplerMethod::CirculantEmbedding, 2002);

  for (int p = 0; p <= max_lag; ++p)
    for (int j = 0; j < 2; ++j)
      for (int jp = 0; jp < 2; ++jp) {
        double want = cov.entry(j, jp, {p});
        double se_d = direct.stderr_table.entry(j, jp, {p});
        double se_c = circ.stderr_table.entry(j, jp, {p});
        CHECK(std::abs(direct.mean.entry(j, jp, {p}) - want) <= 3.0 * se_d);
        CHECK(std::abs(circ.mean.entry(j, jp, {p}) - want) <= 3.0 * se_c);
        CHECK(std::abs(direct.mean.entry(j, jp, {p}) -
                       circ.mean.entry(j, jp, {p})) <= 3.0 * (se_d + se_c));
      }
}

TEST_CASE("spectral grid sampling is exact for a flat measure") {
  // uniform diagonal masses integrate the white noise density exactly, and
  // the induced covariance collapses to a geometric sum
  const int cells = 64;
  MatrixSpectralMeasureOnGrid g;
  g.grid = CellGrid::uniform(1, M_PI, cells);
  g.d = 1;
  double per_cell = g.grid.width(0) / (2.0 * M_PI);
  g.mass.assign(cells, per_cell * Eigen::MatrixXcd::Identity(1, 1));

  SamplerConfig cfg;
  cfg.method = SamplerMethod::SpectralGrid;
  cfg.seed = 55;
  const int n_block = 8;
  FieldSampler sampler = FieldSampler::from_measure(g, n_block, cfg);
  CHECK_FALSE(sampler.clipped());
  CHECK(sampler.induced_covariance({0})(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  for (int p = 1; p <= 7; ++p)
    CHECK(std::abs(sampler.induced_covariance({p})(0, 0)) <= 1e-12);

  FieldSample a = sampler.sample(2);
  CHECK(same_values(a, sampler.sample(2)));
  CHECK(a.method == SamplerMethod::SpectralGrid);

  const int reps = 4000;
  std::vector<FieldSample> samples;
  samples.reserve(reps);
  for (int r = 0; r < reps; ++r) samples.push_back(sampler.sample(r));
  EmpiricalCovariance emp = empirical_covariance(samples, 4);
  for (int p = 0; p <= 4; ++p) {
    double want = p == 0 ? 1.0 : 0.0;
    CHECK(std::abs(emp.mean.entry(0, 0, {p}) - want) <=
          3.0 * emp.stderr_table.entry(0, 0, {p}));
  }

  CHECK_THROWS_AS(FieldSampler::from_measure(
                      g, n_block,
                      SamplerConfig{SamplerMethod::DirectFactorization, 0}),
                  InvalidInput);
}

TEST_CASE("spectral grid bias shrinks with resolution") {
  SpectralDensityModel model = power_law_scalar();
  CovarianceTable cov = CovarianceTable::from_model(model, 8);

  auto bias = [&](int cells) {
    SamplerConfig cfg;
    cfg.method = SamplerMethod::SpectralGrid;
    cfg.seed = 1;
    cfg.spectral_cells = cells;
    FieldSampler sampler = FieldSampler::from_model(model, 16, cfg);
    double worst = 0.0;
    for (int p = 0; p <= 8; ++p)
      worst = std::max(worst, std::abs(sampler.induced_covariance({p})(0, 0) -
                                       cov.entry(0, 0, {p})));
    return worst;
  };
  double coarse = bias(512);
  double fine = bias(4096);
  CHECK(fine < coarse);
  CHECK(fine < 0.25 * coarse);
  CHECK(fine < 0.02 * cov.entry(0, 0, {0}));
}

TEST_CASE("empirical covariance estimator properties") {
  CovarianceTable cov = white_table(1, 63);
  SamplerConfig cfg;
  cfg.method = SamplerMethod::DirectFactorization;
  cfg.seed = 314;
  FieldSampler sampler = FieldSampler::from_table(cov, 64, cfg);

  std::vector<FieldSample> one = {sampler.sample(0)};
  CHECK_THROWS_AS(empirical_covariance(one, 4), InvalidInput);

  std::vector<FieldSample> samples;
  const int reps = 400;
  samples.reserve(reps);
  for (int r = 0; r < reps; ++r) samples.push_back(sampler.sample(r));
  CHECK_THROWS_AS(empirical_covariance(samples, 0), InvalidInput);
  CHECK_THROWS_AS(empirical_covariance(samples, 64), InvalidInput);

  const int max_lag = 20;
  EmpiricalCovariance emp = empirical_covariance(samples, max_lag);
  int within = 0;
  for (int p = 0; p <= max_lag; ++p) {
    double want = p == 0 ? 1.0 : 0.0;
    double z = std::abs(emp.mean.entry(0, 0, {p}) - want) /
               emp.stderr_table.entry(0, 0, {p});
    if (z <= 3.0) ++within;
  }
  CHECK(double(within) >= 0.95 * (max_lag + 1));

  std::vector<FieldSample> mixed = samples;
  mixed.push_back(FieldSampler::from_table(white_table(1, 31), 32, cfg).sample(0));
  CHECK_THROWS_AS(empirical_covariance(mixed, 4), InvalidInput);
}

TEST_CASE("two dimensional sampling and estimation") {
  // white noise over a 8x8 block via the circulant path
  CovarianceTable cov = CovarianceTable::from_values(
      LatticeDims{2, 1}, 8, [](const std::vector<int>& p) {
        Eigen::MatrixXd r(1, 1);
        r << ((p[0] == 0 && p[1] == 0) ? 1.0 : 0.0);
        return r;
      });
  SamplerConfig cfg;
  cfg.method = SamplerMethod::CirculantEmbedding;
  cfg.seed = 12;
  const int n_block = 8;
  FieldSampler sampler = FieldSampler::from_table(cov, n_block, cfg);
  CHECK_FALSE(sampler.clipped());
  CHECK(sampler.induced_covariance({0, 0})(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(sampler.induced_covariance({1, -2})(0, 0)) <= 1e-12);

  const int reps = 600;
  std::vector<FieldSample> samples;
  samples.reserve(reps);
  for (int r = 0; r < reps; ++r) samples.push_back(sampler.sample(r));
  EmpiricalCovariance emp = empirical_covariance(samples, 2);
  CHECK(std::abs(emp.mean.entry(0, 0, {0, 0}) - 1.0) <=
        3.0 * emp.stderr_table.entry(0, 0, {0, 0}));
  CHECK(std::abs(emp.mean.entry(0, 0, {1, 2})) <=
        3.0 * emp.stderr_table.entry(0, 0, {1, 2}));

  // the estimator inherits the reflection identity exactly up to summation
  // order
  CHECK(emp.mean.entry(0, 0, {-1, -2}) ==
        doctest::Approx(emp.mean.entry(0, 0, {1, 2})).epsilon(1e-13));

  // direct method agrees on the same table
  SamplerConfig dcfg;
  dcfg.method = SamplerMethod::DirectFactorization;
  dcfg.seed = 13;
  FieldSampler direct = FieldSampler::from_table(cov, n_block, dcfg);
  const Eigen::MatrixXd& map = direct.direct_factor();
  CHECK((map * map.transpose() - Eigen::MatrixXd::Identity(64, 64))
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
}
