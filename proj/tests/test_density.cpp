#include "lrdlab/density.hpp"

#include <cmath>

#include "doctest.h"

using namespace lrd;

namespace {

SpectralDensityModel scalar_model(double alpha, int k, const std::string& h_kind,
                                  const nlohmann::json& h_params) {
  return make_model(LatticeDims{1, 1}, LongRangeParams{alpha, k},
                    SlowVarying::constant(), "one", {}, h_kind, h_params);
}

}  // namespace

TEST_CASE("spectral density evaluation") {
  SpectralDensityModel m = scalar_model(0.5, 1, "constant",
                                        {{"value", 1.0 / (2.0 * M_PI)}});
  double u = M_PI / 4;
  Eigen::MatrixXcd g = m.eval(&u);
  CHECK(g(0, 0).real() ==
        doctest::Approx(std::pow(M_PI / 4, -0.5) / (2.0 * M_PI)).epsilon(1e-13));
  CHECK(g(0, 0).imag() == 0.0);

  double zero = 0.0;
  CHECK_THROWS_AS(m.eval(&zero), InvalidInput);
}

TEST_CASE("identity angular factor keeps cross entries zero") {
  SpectralDensityModel m =
      make_model(LatticeDims{1, 2}, LongRangeParams{0.3, 1},
                 SlowVarying::constant(), "identity", {}, "raised_cosine", {});
  for (double u : {-2.0, -0.4, 0.7, 3.0}) {
    Eigen::MatrixXcd g = m.eval(&u);
    CHECK(std::abs(g(0, 1)) == 0.0);
    CHECK(std::abs(g(1, 0)) == 0.0);
  }
}

TEST_CASE("indefinite angular factor is rejected") {
  nlohmann::json bp = {{"matrix", {{1.0, 2.0}, {2.0, 1.0}}}};
  CHECK_THROWS_AS(make_model(LatticeDims{1, 2}, LongRangeParams{0.3, 1},
                             SlowVarying::constant(), "constant", bp,
                             "constant", {}),
                  InvalidInput);
}

TEST_CASE("pair phase factor satisfies the reflection symmetry") {
  nlohmann::json bp = {{"rho", 0.8}, {"phase", 1.1}};
  SpectralDensityModel m =
      make_model(LatticeDims{1, 2}, LongRangeParams{0.4, 1},
                 SlowVarying::constant(), "pair_phase", bp, "raised_cosine_sq",
                 {});
  const double plus[1] = {1.0}, minus[1] = {-1.0};
  Eigen::MatrixXcd b1 = m.b_at(plus), b2 = m.b_at(minus);
  CHECK((b2 - b1.conjugate()).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((b1 - b1.adjoint()).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(std::abs(b1(0, 1)) == doctest::Approx(0.8));

  nlohmann::json toobig = {{"rho", 1.2}};
  CHECK_THROWS_AS(make_model(LatticeDims{1, 2}, LongRangeParams{0.4, 1},
                             SlowVarying::constant(), "pair_phase", toobig,
                             "constant", {}),
                  InvalidInput);
}

TEST_CASE("h variants are even and positive at zero") {
  for (auto kind : {std::string("raised_cosine"), std::string("raised_cosine_sq")}) {
    SpectralDensityModel m = scalar_model(0.4, 1, kind, {});
    CHECK(m.h0() > 0.0);
    for (double u : {0.3, 1.0, 2.7}) {
      double up = u, un = -u;
      CHECK(m.h(&up) == doctest::Approx(m.h(&un)));
    }
  }
  SpectralDensityModel drift =
      scalar_model(0.4, 1, "eps_plus_sin4", {{"eps", 0.02}, {"scale", 1.0}});
  CHECK(drift.h0() == doctest::Approx(0.02));
  double at_pi = M_PI;
  CHECK(drift.h(&at_pi) == doctest::Approx(1.02));
}

TEST_CASE("two dimensional model validates") {
  SpectralDensityModel m =
      make_model(LatticeDims{2, 1}, LongRangeParams{0.7, 1},
                 SlowVarying::constant(), "one", {}, "raised_cosine", {});
  double u[2] = {0.5, -0.25};
  double rad = std::hypot(u[0], u[1]);
  double want = std::pow(rad, 0.7 - 2.0) * 0.5 * (1.0 + std::cos(0.5)) * 0.5 *
                (1.0 + std::cos(-0.25));
  CHECK(m.eval(u)(0, 0).real() == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("model json round trip") {
  nlohmann::json j = {{"nu", 1},
                      {"d", 2},
                      {"alpha", 0.4},
                      {"k", 2},
                      {"L", {{"kind", "log"}}},
                      {"b", {{"kind", "pair_phase"}, {"rho", 0.5}, {"phase", 0.3}}},
                      {"h", {{"kind", "raised_cosine_sq"}, {"scale", 2.0}}}};
  SpectralDensityModel m = model_from_json(j);
  CHECK(m.dims.d == 2);
  CHECK(m.params.alpha == 0.4);
  CHECK(m.L.name() == "log");
  CHECK(m.h0() == doctest::Approx(2.0));
  nlohmann::json back = model_to_json(m);
  SpectralDensityModel m2 = model_from_json(back);
  double u = 0.9;
  CHECK((m.eval(&u) - m2.eval(&u)).cwiseAbs().maxCoeff() <= 1e-15);

  nlohmann::json bad = j;
  bad["alpha"] = 0.6;  // alpha k = 1.2 >= nu
  CHECK_THROWS_AS(model_from_json(bad), InvalidInput);
}

TEST_CASE("angular kernel lookup and symmetry") {
  AngularKernel a = AngularKernel::constant(1, 1, 1.0);
  const double plus[1] = {1.0}, minus[1] = {-1.0};
  CHECK(a.eval(plus)(0, 0) == 1.0);
  CHECK(a.eval(minus)(0, 0) == 1.0);
  CHECK(a.symmetry_defect() == 0.0);

  AngularKernel skew;
  skew.nu = 1;
  skew.d = 2;
  skew.plus = (Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished();
  skew.minus = skew.plus;  // should be plus transposed
  CHECK(skew.symmetry_defect() == doctest::Approx(1.0));
}
