#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "lrdlab/common.hpp"
#include "lrdlab/density.hpp"
#include "lrdlab/sampler.hpp"
#include "lrdlab/sums.hpp"

namespace lrd {

// Two-sample Kolmogorov-Smirnov statistic: sup over the pooled points of
// |F_a - F_b| for the empirical distribution functions.  Symmetric and
// invariant under strictly monotone maps applied to both samples.
double ks_distance(const std::vector<double>& a, const std::vector<double>& b);

// Raw sample moments E[X^m], m = 1..4, each a plain average of x^m with the
// cross-replicate standard error sd(x^m)/sqrt(n).
struct MomentSummary {
  int n = 0;
  std::array<double, 4> value{};
  std::array<double, 4> se{};
};

MomentSummary raw_moments(const std::vector<double>& x);

// (a_m - b_m) / sqrt(se_a^2 + se_b^2); 0 when both spreads vanish and the
// values agree.
double moment_z(const MomentSummary& a, const MomentSummary& b, int order);

// max over an equispaced frequency grid of |phi_a(t) - phi_b(t)| for the
// empirical characteristic functions.
double cf_grid_distance(const std::vector<double>& a,
                        const std::vector<double>& b, double lo, double hi,
                        int points);

struct ComparisonSettings {
  bool ks = true;
  bool moments = true;
  bool cf = true;
  double ks_final = 0.05;     // KS at the largest N
  double moment_z = 4.0;      // max |z| over levels and orders
  double cf_final = 0.1;      // CF grid distance at the largest N
  double variance_rel = 0.05; // relative variance agreement
  double cf_lo = -4.0;
  double cf_hi = 4.0;
  int cf_points = 33;
};

struct DiagnosticsSettings {
  std::vector<int> vague_N = {16, 32, 64, 128, 256, 512, 1024};
  std::vector<double> scale_factors = {0.5, 2.0, 3.0, 10.0};
  // homogeneity rectangles, pairs of per-axis lo/hi
  std::vector<std::pair<std::vector<double>, std::vector<double>>> boxes;
  std::vector<int> tail_N = {32, 64, 128};
  std::vector<double> tail_T = {2, 4, 8, 16, 32, 48, 64};
  double tail_threshold = 0.1;
  int lattice_points = 20;
  int phi_N = 64;
  double phi_rel_tol = 1e-4;
  int measure_cells = 4096;
  int product_cells = 512;
  std::vector<int> indices;  // k diagonal coordinates, 0-based; default all 0
  int entry = 0;             // diagonal entry for the test-function battery
};

// One experiment = model + sampler + functional + discretized limit +
// run sizes + comparison rules, parsed from one JSON config.
struct ExperimentConfig {
  SpectralDensityModel model;
  SamplerConfig sampler;
  NormalizedSumSpec sum;
  double truncation = 64.0;  // limit partition [-T, T)^nu
  int limit_cells = 512;     // cells per axis of the partition
  std::vector<int> run_N;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> rectangles;  // optional S_N(t) tuple
  ComparisonSettings comparison;
  DiagnosticsSettings diagnostics;
  std::string out_dir = "out";
  std::string prefix = "run";
  double budget_seconds = 600.0;
  nlohmann::json raw;  // config echo for manifests

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  void validate() const;
  // FNV-1a over the canonical config dump with the effective seed patched in
  std::string config_hash() const;
};

struct MomentRow {
  int order = 0;
  double lattice = 0.0;
  double lattice_se = 0.0;
  double limit = 0.0;
  double limit_se = 0.0;
  double z = 0.0;
};

struct JointRow {
  int ti = 0;
  int tj = 0;
  std::optional<double> exact_lattice;  // diagonal models only
  double mc_lattice = 0.0;
  double mc_limit = 0.0;
};

struct LevelReport {
  int N = 0;
  double ks = 0.0;
  double cf = 0.0;
  std::vector<MomentRow> moments;
  std::optional<double> exact_variance;  // diagonal unit-variance models only
  double lattice_variance = 0.0;         // empirical Var S_N
  double limit_variance = 0.0;           // empirical Var S0
  double discrete_limit_variance = 0.0;  // exact variance of the discretization
  std::vector<JointRow> joint;
  std::vector<double> lattice_sample;  // kept for downstream statistics,
  std::vector<double> limit_sample;    // not serialized
};

struct RuleResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  int replicates = 0;
  std::vector<LevelReport> levels;
  std::vector<RuleResult> rules;
  bool pass = false;
  double elapsed_seconds = 0.0;  // not serialized to CSV

  void validate() const;  // KS in [0,1], standard errors positive
  nlohmann::json to_json() const;
};

// Simulates matched lattice and limit batches for every N in the run list,
// compares them (KS, raw moments, characteristic function), attaches exact
// second moments where the model is diagonal, and applies the comparison
// rules.  Throws BudgetExceeded when a pilot projection of the full run
// overshoots the configured budget.
ComparisonReport run_convergence_experiment(const ExperimentConfig& cfg);

struct DiagnosticsReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  int replicates = 0;  // diagnostics are deterministic; kept for provenance

  struct HomRow {
    std::vector<double> lo, hi;
    double t = 1.0;
    double residual = 0.0;
  };
  std::vector<HomRow> homogeneity;

  struct VagueRow {
    std::string f;
    int N = 0;
    double value_N = 0.0;
    double value_limit = 0.0;
    double abs_error = 0.0;
  };
  std::vector<VagueRow> vague;

  struct TailRow {
    int N = 0;
    double T = 0.0;
    double tail = 0.0;
    double total = 0.0;
    double ratio = 0.0;
  };
  std::vector<TailRow> tails;
  double tail_T0 = -1.0;  // smallest grid T with ratio <= threshold for all N

  struct PhiRow {
    std::vector<std::vector<int>> p;
    std::complex<double> phi;
    std::complex<double> mu_ft;
    double rel_error = 0.0;
  };
  std::vector<PhiRow> phi;
  double phi_zero = 0.0;          // lattice sum at p = 0
  double variance_lag_sum = 0.0;  // exact-variance sum for the same indices
  double rs_min = 0.0;  // smallest cell value of the quadratic-form measures

  bool pass = false;
  nlohmann::json to_json() const;
};

// Spectral-measure diagnostics: homogeneity residuals of the limit measure,
// test-function integrals against the rescaled measures, product-measure
// tail masses with the uniform-tail threshold T0, and lattice sums against
// the quadrature Fourier transform.  Requires nu = 1.
DiagnosticsReport run_diagnostics(const ExperimentConfig& cfg);

// Deterministic CSV emission; every row carries (config hash, seed,
// replicate count).  Doubles are printed with %.17g so identical runs are
// byte-identical.
void write_levels_csv(const ComparisonReport& r, std::ostream& os);
void write_moments_csv(const ComparisonReport& r, std::ostream& os);
void write_joint_csv(const ComparisonReport& r, std::ostream& os);
void write_homogeneity_csv(const DiagnosticsReport& r, std::ostream& os);
void write_vague_csv(const DiagnosticsReport& r, std::ostream& os);
void write_tails_csv(const DiagnosticsReport& r, std::ostream& os);
void write_phi_csv(const DiagnosticsReport& r, std::ostream& os);

}  // namespace lrd
