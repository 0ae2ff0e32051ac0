#include "lrdlab/reduction.hpp"

#include <cmath>

#include "doctest.h"
#include "lrdlab/common.hpp"
#include "lrdlab/rng.hpp"

using namespace lrd;

TEST_CASE("identity covariance reduces to itself") {
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Identity(3, 3);
  OrthonormalReduction red = orthonormal_reduction(c0);
  CHECK(red.d_prime == 3);
  CHECK((red.forward * c0 * red.forward.transpose() -
         Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
  CHECK((red.reconstruct * red.forward - Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("rank one covariance collapses to one coordinate") {
  Eigen::MatrixXd c0(2, 2);
  c0 << 1, 1, 1, 1;
  OrthonormalReduction red = orthonormal_reduction(c0);
  CHECK(red.d_prime == 1);
  CHECK(red.forward(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(red.forward(0, 1) == doctest::Approx(0.0));
  CHECK(red.reconstruct(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(red.reconstruct(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlated pair reduces to the triangular whitener") {
  Eigen::MatrixXd c0(2, 2);
  c0 << 1.0, 0.6, 0.6, 1.0;
  OrthonormalReduction red = orthonormal_reduction(c0);
  REQUIRE(red.d_prime == 2);
  // Cholesky whitening rows: y1 = x1, y2 = (x2 - 0.6 x1) / 0.8
  CHECK(red.forward(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(red.forward(0, 1) == doctest::Approx(0.0));
  CHECK(red.forward(1, 0) == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(red.forward(1, 1) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK((red.forward * c0 * red.forward.transpose() -
         Eigen::MatrixXd::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

namespace {

Eigen::MatrixXd random_psd(int d, int rank, uint64_t seed) {
  NormalStream ns(seed, 0, StreamPurpose::Generic);
  Eigen::MatrixXd a(d, rank);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < rank; ++j) a(i, j) = ns.next_normal();
  return a * a.transpose();
}

}  // namespace

TEST_CASE("reduction invariants hold on random covariances") {
  for (int trial = 0; trial < 20; ++trial) {
    int d = 1 + trial % 6;
    int rank = 1 + (trial * 7) % d;
    Eigen::MatrixXd c0 = random_psd(d, rank, 900 + trial);
    double scale = c0.cwiseAbs().maxCoeff();
    OrthonormalReduction red = orthonormal_reduction(c0);
    CHECK(red.d_prime == rank);
    // forward whitens
    CHECK((red.forward * c0 * red.forward.transpose() -
           Eigen::MatrixXd::Identity(red.d_prime, red.d_prime))
              .cwiseAbs()
              .maxCoeff() <= 1e-8);
    // reconstruct recovers the original covariance from the whitened one
    CHECK((red.reconstruct * red.reconstruct.transpose() - c0)
              .cwiseAbs()
              .maxCoeff() <= 1e-8 * scale);
    for (int piv : red.pivots) {
      CHECK(piv >= 0);
      CHECK(piv < d);
    }
  }
}

TEST_CASE("degenerate coordinates are dropped") {
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(3, 3);
  c0(1, 1) = 2.0;
  OrthonormalReduction red = orthonormal_reduction(c0);
  CHECK(red.d_prime == 1);
  CHECK(red.pivots[0] == 1);
  CHECK(red.forward(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(red.reconstruct(1, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("invalid covariance inputs are rejected") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.4, 0.1, 1.0;
  CHECK_THROWS_AS(orthonormal_reduction(asym), InvalidInput);

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(orthonormal_reduction(indef), InvalidInput);

  Eigen::MatrixXd rect(2, 3);
  rect.setZero();
  CHECK_THROWS_AS(orthonormal_reduction(rect), InvalidInput);
}
