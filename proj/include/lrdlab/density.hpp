#pragma once

#include <Eigen/Dense>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "lrdlab/common.hpp"

namespace lrd {

// Continuous d x d table on the unit sphere with the reflection symmetry
// a_{j',j}(x) = a_{j,j'}(-x).  For nu = 1 the sphere is the two points
// dir = +-1; for nu = 2 values are stored along sampled angles and looked up
// by nearest direction.
struct AngularKernel {
  int nu = 1;
  int d = 1;
  Eigen::MatrixXd plus;   // nu = 1: value at dir = +1
  Eigen::MatrixXd minus;  // nu = 1: value at dir = -1
  std::vector<std::pair<double, Eigen::MatrixXd>> samples;  // nu = 2: by angle

  static AngularKernel constant(int nu, int d, double value);

  Eigen::MatrixXd eval(const double* dir) const;
  // max over sampled directions of |a_{j',j}(-x) - a_{j,j'}(x)|
  double symmetry_defect() const;
};

// Spectral density g(u) = |u|^(alpha-nu) b(u/|u|) h(u) on the torus
// [-pi,pi)^nu.  b is Hermitian positive semidefinite per direction with
// b(-theta) = conj b(theta); h is even, smooth and positive at the origin.
struct SpectralDensityModel {
  LatticeDims dims;
  LongRangeParams params;
  SlowVarying L;
  std::function<Eigen::MatrixXcd(const double* dir)> b;
  std::function<double(const double* u)> h;
  std::string b_name = "one";
  std::string h_name = "constant";
  nlohmann::json b_params = nlohmann::json::object();
  nlohmann::json h_params = nlohmann::json::object();

  double h0() const;
  Eigen::MatrixXcd b_at(const double* dir) const;
  // g(u); throws at u = 0 and when b at this direction fails the PSD check
  Eigen::MatrixXcd eval(const double* u) const;
  // spot-checks the invariants on a direction/point sample
  void validate(int directions = 32) const;
};

// Named constructors for the model families used by the tests, the
// experiments and the CLI configuration files.
SpectralDensityModel make_model(
    const LatticeDims& dims, const LongRangeParams& params, const SlowVarying& L,
    const std::string& b_kind, const nlohmann::json& b_params,
    const std::string& h_kind, const nlohmann::json& h_params);

// {"nu":1,"d":1,"alpha":0.4,"k":2,"L":{"kind":"one"},
//  "b":{"kind":"one"},"h":{"kind":"raised_cosine_sq","scale":1.0}}
SpectralDensityModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const SpectralDensityModel& m);

}  // namespace lrd
