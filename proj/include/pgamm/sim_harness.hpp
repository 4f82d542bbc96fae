#pragma once

#include "pgamm/data_model.hpp"
#include "pgamm/pgee_solver.hpp"
#include "pgamm/tuning_gcv.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pgamm {

enum class Example { ex1_gaussian_moderate, ex2_gaussian_highdim, ex3_binary };

Example example_from_number(int number);
int example_number(Example ex);

/// Additive test functions, addressed by id. Id 0 is the zero function.
double true_function(int id, double x);

struct SimDesign {
  Example example = Example::ex1_gaussian_moderate;
  int n = 100;
  int m = 5;
  int p_linear = 10;
  int p_smooth = 10;
  Eigen::VectorXd true_beta;
  std::vector<int> g_ids;  // function id per smooth covariate
  double error_rho = 0.7;  // within-subject AR-1 correlation
  double error_var = 1.0;  // gaussian error variance
  double sigma_u = 0.5;    // random-intercept variance
  std::uint64_t seed = 1;

  /// Defaults of the named design; n <= 0 keeps the example's default.
  static SimDesign make(Example ex, int n = 0, std::uint64_t seed = 1);
  Family family() const;
  std::vector<int> linear_support() const;
  std::vector<int> smooth_support() const;
  void validate() const;
};

struct SimData {
  LongitudinalDataset data;
  double binary_lag1_correlation = 0.0;  // realized, binary designs only
};

/// Linear and smooth covariates are independent Uniform[0,1] blocks. Gaussian
/// designs add AR-1 errors and a random intercept; the binary design
/// thresholds a latent AR-1 gaussian through a copula against the logit
/// probabilities (random intercept included).
SimData generate(const SimDesign& design);

enum class Estimator { scad, oracle, full, truth_cheat, all_zero };

Estimator estimator_from_name(const std::string& name);
std::string estimator_name(Estimator e);

struct HarnessConfig {
  Estimator estimator = Estimator::scad;
  CorrStructure corr = CorrStructure::ar1;
  int degree = 3;
  std::optional<int> knots;      // interior knots; default rule when empty
  std::optional<double> lambda;  // fixed lambda for scad; GCV tuning when empty
  int reps = 20;
  int jobs = 1;
  std::uint64_t seed = 1;
  bool random_effects = true;
  double scad_a = 3.7;
  double epsilon = 1e-6;
  GroupWeightRule weight_rule = GroupWeightRule::dimension;
  PenaltyCount penalty_count = PenaltyCount::observations;
  SolverConfig solver;
  McConfig mc;
  TuneConfig tune;
  int aise_points = 200;
  double aise_lo = 0.025;
  double aise_hi = 0.975;
};

struct ReplicationRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mse = 0.0;
  double taise = 0.0;
  std::vector<double> aise;
  int fzs = 0, fns = 0, fzf = 0, fnf = 0;
  char fit_class = 'U';  // U, C or O
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<int> selected_linear;
  std::vector<int> selected_smooth;
  Eigen::VectorXd beta_hat;   // standardized covariate scale
  Eigen::VectorXd beta_true;  // standardized covariate scale
};

struct MetricsReport {
  double mse = 0.0;
  double taise = 0.0;
  double fzs = 0.0, fns = 0.0, fzf = 0.0, fnf = 0.0;
  double u_fit = 0.0, c_fit = 0.0, o_fit = 0.0;
  int n_ok = 0;
  int n_failed = 0;
};

struct ReplicationReport {
  MetricsReport metrics;
  std::vector<ReplicationRecord> records;
};

/// Estimates on the standardized scale plus the pieces needed to score them.
struct Estimate {
  Eigen::VectorXd beta;              // length p_linear, standardized scale
  std::vector<Eigen::VectorXd> g;    // per smooth covariate, on the AISE grid
  double lambda = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Fit-free scoring of one replication.
ReplicationRecord score(const SimDesign& design, const SimData& sim, const StandardizationRecord& rec,
                        const Estimate& est, const Eigen::VectorXd& grid);

/// Seeds of replication r: mix_seed(cfg.seed, r).
ReplicationRecord run_one(const SimDesign& design, const HarnessConfig& cfg, int rep);

ReplicationReport run_replications(const SimDesign& design, const HarnessConfig& cfg);

MetricsReport aggregate(const std::vector<ReplicationRecord>& records);

struct ComparisonRow {
  std::string estimator;
  std::string corr;
  int degree = 3;
  MetricsReport metrics;
};

/// {SCAD, ORACLE, FULL} x {ind, ex, ar1} x {linear, cubic}.
std::vector<ComparisonRow> compare_models(const SimDesign& design, const HarnessConfig& base);

}  // namespace pgamm
