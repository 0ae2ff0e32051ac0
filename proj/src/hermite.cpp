#include "lrdlab/hermite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "lrdlab/rng.hpp"

namespace lrd {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw InvalidInput(msg);
}

int index_order(const MultiIndex& idx) {
  return std::accumulate(idx.begin(), idx.end(), 0);
}

void check_index(const MultiIndex& idx, int d) {
  require(static_cast<int>(idx.size()) == d,
          "expansion index length does not match dimension");
  for (int kj : idx) require(kj >= 0, "expansion index has a negative entry");
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double eval_terms(const std::map<MultiIndex, double>& coefficients, int d,
                  int max_order, const std::vector<double>& x) {
  require(static_cast<int>(x.size()) == d,
          "evaluation point length does not match dimension");
  // Per-coordinate Hermite tables up to the largest order in use.
  std::vector<std::vector<double>> h(d);
  for (int j = 0; j < d; ++j) h[j] = hermite_values_upto(max_order, x[j]);
  double total = 0.0;
  for (const auto& [idx, c] : coefficients) {
    double term = c;
    for (int j = 0; j < d; ++j) term *= h[j][idx[j]];
    total += term;
  }
  return total;
}

int terms_max_order(const std::map<MultiIndex, double>& coefficients) {
  int m = 0;
  for (const auto& [idx, c] : coefficients)
    for (int kj : idx) m = std::max(m, kj);
  return m;
}

}  // namespace

double hermite_value(int n, double x) {
  require(n >= 0, "hermite order must be nonnegative");
  double hm1 = 0.0, h = 1.0;
  for (int m = 0; m < n; ++m) {
    double hp1 = x * h - m * hm1;
    hm1 = h;
    h = hp1;
  }
  return h;
}

std::vector<double> hermite_values_upto(int n, double x) {
  require(n >= 0, "hermite order must be nonnegative");
  std::vector<double> v(n + 1);
  v[0] = 1.0;
  if (n >= 1) v[1] = x;
  for (int m = 1; m < n; ++m) v[m + 1] = x * v[m] - m * v[m - 1];
  return v;
}

std::vector<double> hermite_to_monomial_1d(int n) {
  require(n >= 0, "hermite order must be nonnegative");
  std::vector<double> hm1{1.0}, h{0.0, 1.0};
  if (n == 0) return hm1;
  for (int m = 1; m < n; ++m) {
    std::vector<double> hp1(m + 2, 0.0);
    for (int i = 0; i <= m; ++i) hp1[i + 1] += h[i];
    for (int i = 0; i < m; ++i) hp1[i] -= m * hm1[i];
    hm1 = std::move(h);
    h = std::move(hp1);
  }
  return h;
}

std::vector<double> monomial_to_hermite_1d(int n) {
  require(n >= 0, "monomial degree must be nonnegative");
  // x * H_m = H_{m+1} + m H_{m-1}
  std::vector<double> b{1.0};
  for (int p = 0; p < n; ++p) {
    std::vector<double> nb(p + 2, 0.0);
    for (int m = 0; m <= p; ++m) {
      nb[m + 1] += b[m];
      if (m >= 1) nb[m - 1] += m * b[m];
    }
    b = std::move(nb);
  }
  return b;
}

void HermiteExpansion::validate() const {
  require(d >= 1, "dimension must be positive");
  require(k >= 1, "order must be positive");
  require(!coefficients.empty(), "expansion has no terms");
  bool any_nonzero = false;
  for (const auto& [idx, c] : coefficients) {
    check_index(idx, d);
    if (index_order(idx) != k)
      throw InvalidInput("order-k expansion has a term of different order");
    if (c != 0.0) any_nonzero = true;
  }
  require(any_nonzero, "expansion has only zero coefficients");
}

double HermiteExpansion::eval(const std::vector<double>& x) const {
  return eval_terms(coefficients, d, max_order(), x);
}

int HermiteExpansion::max_order() const { return terms_max_order(coefficients); }

void TailExpansion::validate() const {
  require(d >= 1, "dimension must be positive");
  require(k >= 1, "order must be positive");
  require(!coefficients.empty(), "expansion has no terms");
  for (const auto& [idx, c] : coefficients) {
    check_index(idx, d);
    if (index_order(idx) < k + 1)
      throw InvalidInput("tail expansion has a term of order <= k");
  }
}

double TailExpansion::eval(const std::vector<double>& x) const {
  return eval_terms(coefficients, d, max_order(), x);
}

int TailExpansion::max_order() const { return terms_max_order(coefficients); }

double TailExpansion::condition_value() const {
  validate();
  double total = 0.0;
  for (const auto& [idx, c] : coefficients) {
    double denom = 1.0;
    for (int kj : idx) denom *= factorial(kj);
    total += c * c / denom;
  }
  return total;
}

double expansion_second_moment(const std::map<MultiIndex, double>& coefficients) {
  double total = 0.0;
  for (const auto& [idx, c] : coefficients) {
    double f = 1.0;
    for (int kj : idx) f *= factorial(kj);
    total += c * c * f;
  }
  return total;
}

double cross_moment_diagonal(const std::map<MultiIndex, double>& coefficients,
                             const std::vector<double>& r_diag) {
  for (double r : r_diag)
    if (!(std::abs(r) <= 1.0))
      throw InvalidInput("diagonal correlation entry outside [-1, 1]");
  double total = 0.0;
  for (const auto& [idx, c] : coefficients) {
    require(idx.size() == r_diag.size(),
            "correlation vector length does not match dimension");
    double term = c * c;
    for (std::size_t j = 0; j < idx.size(); ++j)
      term *= factorial(idx[j]) * std::pow(r_diag[j], idx[j]);
    total += term;
  }
  return total;
}

int IndexMaps::coordinate_of_slot(int s, const MultiIndex& kvec) const {
  require(static_cast<int>(kvec.size()) == d,
          "multi-index length does not match dimension");
  require(index_order(kvec) == k, "multi-index entries do not sum to k");
  require(s >= 1 && s <= k, "slot position out of range");
  int acc = 0;
  for (int j = 0; j < d; ++j) {
    require(kvec[j] >= 0, "multi-index has a negative entry");
    acc += kvec[j];
    if (s <= acc) return j + 1;
  }
  throw InvalidInput("multi-index entries do not sum to k");
}

MultiIndex IndexMaps::occupancy(const std::vector<int>& jseq) const {
  require(static_cast<int>(jseq.size()) == k,
          "coordinate sequence length does not match k");
  MultiIndex kvec(d, 0);
  int prev = 1;
  for (int j : jseq) {
    if (j < prev || j > d)
      throw InvalidInput("coordinate sequence is not non-decreasing in range");
    ++kvec[j - 1];
    prev = j;
  }
  return kvec;
}

std::vector<int> IndexMaps::slots(const MultiIndex& kvec) const {
  require(static_cast<int>(kvec.size()) == d,
          "multi-index length does not match dimension");
  require(index_order(kvec) == k, "multi-index entries do not sum to k");
  std::vector<int> jseq;
  jseq.reserve(k);
  for (int j = 0; j < d; ++j) {
    require(kvec[j] >= 0, "multi-index has a negative entry");
    for (int rep = 0; rep < kvec[j]; ++rep) jseq.push_back(j + 1);
  }
  return jseq;
}

LemmaBoundResult lemma_bound_check(const TailExpansion& h1,
                                   const Eigen::MatrixXd& r,
                                   std::uint64_t mc_seed, int mc_samples) {
  h1.validate();
  require(r.rows() == h1.d && r.cols() == h1.d,
          "cross-correlation matrix shape does not match dimension");
  LemmaBoundResult out;
  double row_max = 0.0, col_max = 0.0;
  for (int i = 0; i < r.rows(); ++i) {
    row_max = std::max(row_max, r.row(i).cwiseAbs().sum());
    col_max = std::max(col_max, r.col(i).cwiseAbs().sum());
  }
  out.psi = std::max(row_max, col_max);
  if (out.psi > 1.0 + 1e-12)
    throw InvalidInput("cross-correlation absolute row/column sums exceed 1");
  out.bound = std::pow(out.psi, h1.k + 1) * expansion_second_moment(h1.coefficients);

  bool diagonal = true;
  for (int i = 0; i < r.rows() && diagonal; ++i)
    for (int j = 0; j < r.cols(); ++j)
      if (i != j && r(i, j) != 0.0) {
        diagonal = false;
        break;
      }

  if (diagonal) {
    std::vector<double> rd(h1.d);
    for (int j = 0; j < h1.d; ++j) rd[j] = r(j, j);
    out.lhs = std::abs(cross_moment_diagonal(h1.coefficients, rd));
    out.exact = true;
    out.holds = out.lhs <= out.bound + 1e-12;
    return out;
  }

  // Joint covariance of (X, Y) and its symmetric square root.
  const int d = h1.d;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  cov.block(0, d, d, d) = r;
  cov.block(d, 0, d, d) = r.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-9)
      throw InvalidInput("cross-correlation does not define a valid joint law");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  Eigen::MatrixXd a = es.eigenvectors() * ev.asDiagonal();

  NormalStream rng(mc_seed, 0, StreamPurpose::Generic);
  Eigen::VectorXd z(2 * d);
  std::vector<double> x(d), y(d);
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < mc_samples; ++s) {
    for (int i = 0; i < 2 * d; ++i) z[i] = rng.next_normal();
    Eigen::VectorXd w = a * z;
    for (int j = 0; j < d; ++j) {
      x[j] = w[j];
      y[j] = w[d + j];
    }
    double v = h1.eval(x) * h1.eval(y);
    double delta = v - mean;
    mean += delta / (s + 1);
    m2 += delta * (v - mean);
  }
  out.lhs = std::abs(mean);
  out.lhs_stderr = std::sqrt(m2 / mc_samples / std::max(1, mc_samples - 1));
  out.holds = out.lhs <= out.bound + 3.0 * out.lhs_stderr + 1e-10;
  return out;
}

Poly expansion_to_poly(const std::map<MultiIndex, double>& coefficients, int d,
                       int degree_cap) {
  Poly out;
  for (const auto& [idx, c] : coefficients) {
    check_index(idx, d);
    for (int kj : idx)
      require(kj <= degree_cap, "expansion order exceeds the degree cap");
    // Tensor product of per-coordinate monomial expansions.
    Poly partial{{MultiIndex{}, c}};
    for (int j = 0; j < d; ++j) {
      std::vector<double> mono = hermite_to_monomial_1d(idx[j]);
      Poly next;
      for (const auto& [mi, pc] : partial)
        for (std::size_t m = 0; m < mono.size(); ++m) {
          if (mono[m] == 0.0) continue;
          MultiIndex ext = mi;
          ext.push_back(static_cast<int>(m));
          next[ext] += pc * mono[m];
        }
      partial = std::move(next);
    }
    for (const auto& [mi, pc] : partial) out[mi] += pc;
  }
  return out;
}

std::map<MultiIndex, double> poly_to_expansion(const Poly& p, int d,
                                               int degree_cap) {
  Poly work;
  for (const auto& [mi, c] : p) {
    check_index(mi, d);
    for (int e : mi) require(e <= degree_cap, "polynomial degree exceeds the cap");
    if (c != 0.0) work[mi] += c;
  }
  std::map<MultiIndex, double> out;
  // Eliminate highest total degree first; the Hermite tensor product for a
  // multi-index equals its leading monomial plus terms of total degree
  // smaller by at least 2, so this terminates.
  while (!work.empty()) {
    auto lead = work.begin();
    int lead_deg = index_order(lead->first);
    for (auto it = std::next(work.begin()); it != work.end(); ++it) {
      int deg = index_order(it->first);
      if (deg > lead_deg || (deg == lead_deg && it->first > lead->first)) {
        lead = it;
        lead_deg = deg;
      }
    }
    MultiIndex beta = lead->first;
    double a = lead->second;
    out[beta] += a;
    Poly expanded = expansion_to_poly({{beta, 1.0}}, d, degree_cap);
    for (const auto& [mi, c] : expanded) {
      auto it = work.find(mi);
      double nv = (it == work.end() ? 0.0 : it->second) - a * c;
      if (mi == beta || nv == 0.0) {
        if (it != work.end()) work.erase(it);
      } else if (it == work.end()) {
        work[mi] = nv;
      } else {
        it->second = nv;
      }
    }
  }
  return out;
}

double poly_eval(const Poly& p, const std::vector<double>& x) {
  double total = 0.0;
  for (const auto& [mi, c] : p) {
    require(mi.size() == x.size(),
            "evaluation point length does not match dimension");
    double term = c;
    for (std::size_t j = 0; j < mi.size(); ++j)
      term *= std::pow(x[j], mi[j]);
    total += term;
  }
  return total;
}

HermiteExpansion transform_functional(const HermiteExpansion& h,
                                      const Eigen::MatrixXd& D,
                                      int degree_cap) {
  h.validate();
  require(D.rows() == h.d, "matrix row count does not match dimension");
  require(D.cols() >= 1, "matrix must have at least one column");
  require(h.k <= degree_cap, "expansion order exceeds the degree cap");
  const int dp = static_cast<int>(D.cols());

  Poly in_x = expansion_to_poly(h.coefficients, h.d, degree_cap);
  // Substitute x_j = sum_m D(j, m) y_m.
  Poly in_y;
  for (const auto& [mi, c] : in_x) {
    Poly term{{MultiIndex(dp, 0), c}};
    for (int j = 0; j < h.d; ++j) {
      for (int rep = 0; rep < mi[j]; ++rep) {
        Poly next;
        for (const auto& [yi, pc] : term)
          for (int m = 0; m < dp; ++m) {
            if (D(j, m) == 0.0) continue;
            MultiIndex ext = yi;
            ++ext[m];
            next[ext] += pc * D(j, m);
          }
        term = std::move(next);
      }
    }
    for (const auto& [yi, pc] : term) in_y[yi] += pc;
  }

  std::map<MultiIndex, double> herm = poly_to_expansion(in_y, dp, degree_cap);
  HermiteExpansion out;
  out.d = dp;
  out.k = h.k;
  double scale = 0.0;
  for (const auto& [idx, c] : herm)
    if (index_order(idx) == h.k) scale = std::max(scale, std::abs(c));
  for (const auto& [idx, c] : herm) {
    if (index_order(idx) == h.k) {
      if (c != 0.0) out.coefficients[idx] = c;
    } else if (std::abs(c) > 1e-8 * (1.0 + scale)) {
      throw NumericFailure(
          "transform produced off-order terms; matrix is inconsistent with the "
          "unit-variance convention");
    }
  }
  out.validate();
  return out;
}

namespace {

nlohmann::json terms_to_json(int d, int k,
                             const std::map<MultiIndex, double>& coefficients) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [idx, c] : coefficients)
    terms.push_back({{"index", idx}, {"c", c}});
  return {{"d", d}, {"k", k}, {"terms", std::move(terms)}};
}

std::map<MultiIndex, double> terms_from_json(const nlohmann::json& j) {
  std::map<MultiIndex, double> coefficients;
  if (!j.contains("terms") || !j["terms"].is_array())
    throw InvalidInput("expansion json lacks a terms array");
  for (const auto& t : j["terms"]) {
    MultiIndex idx = t.at("index").get<MultiIndex>();
    double c = t.at("c").get<double>();
    coefficients[idx] += c;
  }
  return coefficients;
}

}  // namespace

nlohmann::json expansion_to_json(const HermiteExpansion& h) {
  return terms_to_json(h.d, h.k, h.coefficients);
}

nlohmann::json expansion_to_json(const TailExpansion& h) {
  return terms_to_json(h.d, h.k, h.coefficients);
}

HermiteExpansion hermite_expansion_from_json(const nlohmann::json& j) {
  HermiteExpansion h;
  h.d = j.at("d").get<int>();
  h.k = j.at("k").get<int>();
  h.coefficients = terms_from_json(j);
  h.validate();
  return h;
}

TailExpansion tail_expansion_from_json(const nlohmann::json& j) {
  TailExpansion h;
  h.d = j.at("d").get<int>();
  h.k = j.at("k").get<int>();
  h.coefficients = terms_from_json(j);
  h.validate();
  return h;
}

GaussHermiteRule gauss_hermite(int n) {
  require(n >= 1, "rule size must be positive");
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = std::sqrt(static_cast<double>(i));
    jac(i, i - 1) = b;
    jac(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  if (es.info() != Eigen::Success)
    throw NumericFailure("tridiagonal eigen decomposition failed");
  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    double q0 = es.eigenvectors()(0, i);
    rule.weights[i] = q0 * q0;
  }
  return rule;
}

}  // namespace lrd
