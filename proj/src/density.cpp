#include "lrdlab/density.hpp"

#include <cmath>

namespace lrd {

namespace {

double angle_of(const double* dir) { return std::atan2(dir[1], dir[0]); }

double wrap_angle(double a) {
  while (a <= -M_PI) a += 2.0 * M_PI;
  while (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

}  // namespace

AngularKernel AngularKernel::constant(int nu, int d, double value) {
  AngularKernel k;
  k.nu = nu;
  k.d = d;
  k.plus = Eigen::MatrixXd::Constant(d, d, value);
  k.minus = k.plus;
  if (nu == 2) {
    for (int i = 0; i < 16; ++i)
      k.samples.emplace_back(-M_PI + (i + 0.5) * 2.0 * M_PI / 16, k.plus);
  }
  return k;
}

Eigen::MatrixXd AngularKernel::eval(const double* dir) const {
  if (nu == 1) return dir[0] >= 0.0 ? plus : minus;
  if (samples.empty()) throw InvalidInput("angular kernel has no samples");
  double a = angle_of(dir);
  std::size_t best = 0;
  double best_dist = 1e300;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double dist = std::abs(wrap_angle(samples[i].first - a));
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return samples[best].second;
}

double AngularKernel::symmetry_defect() const {
  if (nu == 1) return (minus - plus.transpose()).cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (const auto& [a, m] : samples) {
    double opp[2] = {std::cos(a + M_PI), std::sin(a + M_PI)};
    worst = std::max(worst, (eval(opp) - m.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double SpectralDensityModel::h0() const {
  std::vector<double> zero(dims.nu, 0.0);
  return h(zero.data());
}

Eigen::MatrixXcd SpectralDensityModel::b_at(const double* dir) const {
  Eigen::MatrixXcd m = b(dir);
  if (m.rows() != dims.d || m.cols() != dims.d)
    throw InvalidInput("angular factor has the wrong shape");
  return m;
}

Eigen::MatrixXcd SpectralDensityModel::eval(const double* u) const {
  double norm2 = 0.0;
  for (int i = 0; i < dims.nu; ++i) norm2 += u[i] * u[i];
  if (norm2 == 0.0)
    throw InvalidInput("spectral density is singular at the origin");
  double norm = std::sqrt(norm2);
  std::vector<double> dir(dims.nu);
  for (int i = 0; i < dims.nu; ++i) dir[i] = u[i] / norm;
  Eigen::MatrixXcd bb = b_at(dir.data());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      0.5 * (bb + bb.adjoint()), Eigen::EigenvaluesOnly);
  if ((bb - bb.adjoint()).cwiseAbs().maxCoeff() > 1e-10 ||
      es.eigenvalues().minCoeff() < -1e-12)
    throw InvalidInput("angular factor is not positive semidefinite here");
  return std::pow(norm, params.alpha - dims.nu) * h(u) * bb;
}

void SpectralDensityModel::validate(int directions) const {
  dims.validate();
  params.validate(dims.nu);
  if (!(h0() > 0.0)) throw InvalidInput("h must be positive at the origin");
  std::vector<std::vector<double>> dirs;
  if (dims.nu == 1) {
    dirs = {{1.0}, {-1.0}};
  } else if (dims.nu == 2) {
    for (int i = 0; i < directions; ++i) {
      double a = -M_PI + (i + 0.5) * 2.0 * M_PI / directions;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
  } else {
    throw InvalidInput("density validation supports nu in {1,2}");
  }
  for (const auto& dir : dirs) {
    Eigen::MatrixXcd bb = b_at(dir.data());
    if ((bb - bb.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
      throw InvalidInput("angular factor is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(bb, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw InvalidInput("angular factor is not positive semidefinite");
    std::vector<double> neg(dir);
    for (double& x : neg) x = -x;
    Eigen::MatrixXcd bn = b_at(neg.data());
    if ((bn - bb.conjugate()).cwiseAbs().maxCoeff() > 1e-10)
      throw InvalidInput("angular factor violates b(-theta) = conj b(theta)");
    // evenness of h on a ray sample
    for (double rho : {0.3, 1.1, 2.9}) {
      std::vector<double> up(dims.nu), un(dims.nu);
      for (int i = 0; i < dims.nu; ++i) {
        up[i] = rho * dir[i];
        un[i] = -rho * dir[i];
      }
      if (std::abs(h(up.data()) - h(un.data())) > 1e-12)
        throw InvalidInput("h is not even");
      if (h(up.data()) < 0.0) throw InvalidInput("h is negative");
    }
  }
}

namespace {

std::function<Eigen::MatrixXcd(const double*)> make_b(
    int nu, int d, const std::string& kind, const nlohmann::json& p) {
  if (kind == "one" || kind == "identity") {
    Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
    return [id](const double*) { return id; };
  }
  if (kind == "constant") {
    auto rows = p.at("matrix");
    Eigen::MatrixXcd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rows.at(i).at(j).get<double>();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 0)
      throw InvalidInput("constant angular factor must be symmetric");
    return [m](const double*) { return m; };
  }
  if (kind == "diagonal") {
    auto vals = p.at("values");
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i < d; ++i) m(i, i) = vals.at(i).get<double>();
    return [m](const double*) { return m; };
  }
  if (kind == "pair_phase") {
    if (d != 2) throw InvalidInput("pair_phase angular factor needs d = 2");
    double rho = p.at("rho").get<double>();
    double phase = p.value("phase", 0.0);
    if (std::abs(rho) > 1.0)
      throw InvalidInput("pair_phase correlation magnitude must be <= 1");
    return [rho, phase](const double* dir) {
      std::complex<double> off =
          rho * std::exp(std::complex<double>(0.0, phase * dir[0]));
      Eigen::MatrixXcd m(2, 2);
      m << 1.0, off, std::conj(off), 1.0;
      return m;
    };
  }
  throw InvalidInput("unknown angular factor kind: " + kind);
}

std::function<double(const double*)> make_h(int nu, const std::string& kind,
                                            const nlohmann::json& p) {
  if (kind == "constant") {
    double value = p.value("value", 1.0);
    return [value](const double*) { return value; };
  }
  if (kind == "raised_cosine") {
    double scale = p.value("scale", 1.0);
    return [nu, scale](const double* u) {
      double v = scale;
      for (int i = 0; i < nu; ++i) v *= 0.5 * (1.0 + std::cos(u[i]));
      return v;
    };
  }
  if (kind == "raised_cosine_sq") {
    double scale = p.value("scale", 1.0);
    return [nu, scale](const double* u) {
      double v = scale;
      for (int i = 0; i < nu; ++i) {
        double c = 0.5 * (1.0 + std::cos(u[i]));
        v *= c * c;
      }
      return v;
    };
  }
  if (kind == "eps_plus_sin4") {
    double eps = p.at("eps").get<double>();
    double scale = p.value("scale", 1.0);
    return [nu, eps, scale](const double* u) {
      double v = scale;
      for (int i = 0; i < nu; ++i) {
        double s = std::sin(0.5 * u[i]);
        v *= s * s * s * s;
      }
      return eps + v;
    };
  }
  throw InvalidInput("unknown h kind: " + kind);
}

}  // namespace

SpectralDensityModel make_model(const LatticeDims& dims,
                                const LongRangeParams& params,
                                const SlowVarying& L, const std::string& b_kind,
                                const nlohmann::json& b_params,
                                const std::string& h_kind,
                                const nlohmann::json& h_params) {
  SpectralDensityModel m;
  m.dims = dims;
  m.params = params;
  m.L = L;
  nlohmann::json bp = b_params.is_null() ? nlohmann::json::object() : b_params;
  nlohmann::json hp = h_params.is_null() ? nlohmann::json::object() : h_params;
  m.b = make_b(dims.nu, dims.d, b_kind, bp);
  m.h = make_h(dims.nu, h_kind, hp);
  m.b_name = b_kind;
  m.h_name = h_kind;
  m.b_params = bp;
  m.h_params = hp;
  m.validate();
  return m;
}

SpectralDensityModel model_from_json(const nlohmann::json& j) {
  LatticeDims dims{j.at("nu").get<int>(), j.at("d").get<int>()};
  LongRangeParams params{j.at("alpha").get<double>(), j.at("k").get<int>()};
  SlowVarying L = SlowVarying::constant();
  if (j.contains("L") && j["L"].value("kind", "one") == "log")
    L = SlowVarying::logarithmic();
  const nlohmann::json empty = nlohmann::json::object();
  const nlohmann::json& bj = j.contains("b") ? j["b"] : empty;
  const nlohmann::json& hj = j.contains("h") ? j["h"] : empty;
  return make_model(dims, params, L, bj.value("kind", "identity"), bj,
                    hj.value("kind", "constant"), hj);
}

nlohmann::json model_to_json(const SpectralDensityModel& m) {
  nlohmann::json b = m.b_params;
  b["kind"] = m.b_name;
  nlohmann::json h = m.h_params;
  h["kind"] = m.h_name;
  return {{"nu", m.dims.nu},     {"d", m.dims.d},
          {"alpha", m.params.alpha}, {"k", m.params.k},
          {"L", {{"kind", m.L.name()}}}, {"b", b},
          {"h", h}};
}

}  // namespace lrd
