#pragma once

#include "pgamm/design.hpp"
#include "pgamm/exponential_family.hpp"
#include "pgamm/penalty_scad.hpp"
#include "pgamm/random_effects.hpp"
#include "pgamm/working_correlation.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pgamm {

/// Count multiplying the penalty in the Newton system H + count * E.
enum class PenaltyCount { observations, subjects };

struct ModelSpec {
  Family family = Family::gaussian();
  CorrStructure corr = CorrStructure::ar1;
  double scad_a = 3.7;
  double epsilon = 1e-6;
  GroupWeightRule weight_rule = GroupWeightRule::dimension;
  PenaltyCount penalty_count = PenaltyCount::observations;
  McConfig mc;
  /// Off: Sigma = 0 and a single all-zero draw replaces the chain.
  bool random_effects = true;
  double sigma0 = 0.5;  // Sigma^0 = sigma0 * I
};

struct SolverConfig {
  int max_outer_iter = 100;
  /// Bound on fit_change of the Newton update.
  double tol = 1e-3;
  int consecutive_hits = 2;
  bool refresh_rho = true;
  bool refresh_phi = true;
  bool refresh_sigma = true;
  double init_ridge = 1e-4;
  /// Newton steps on the final draw set after the outer loop; they drive
  /// shrinking coefficients through the threshold.
  int polish_max_iter = 200;
  double polish_tol = 1e-8;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double max_change = 0.0;      // fit_change, drives convergence
  double max_change_raw = 0.0;  // plain max |delta theta|
  double acceptance = 1.0;
  int n_draws = 0;
  bool ridge = false;
  int active = 0;
  double rho = 0.0;
  double phi = 1.0;
};

struct FitState {
  Eigen::VectorXd theta;
  CoefficientLayout layout;
  std::vector<bool> active;
  Eigen::MatrixXd Sigma;
  double rho = 0.0;
  double phi = 1.0;
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
  int polish_iterations = 0;
  std::vector<IterationRecord> trace;
  ChainDraws draws;  // final chain at theta
  int n_draws = 0;   // chain size reached by the schedule

  Eigen::VectorXd beta() const { return theta.head(layout.p); }
  Eigen::VectorXd alpha(Eigen::Index k) const {
    return theta.segment(layout.group_offset[k], layout.group_size[k]);
  }
  std::vector<int> selected_linear() const;
  std::vector<int> selected_groups() const;
  std::vector<Eigen::Index> active_indices() const;
};

/// Dispersion passed to assemble_S_H by the fitting code: A_i = diag(nu / w),
/// so phi stays out of the penalized system and only enters the sampler.
inline constexpr double kScoreDispersion = 1.0;

struct ScoreHessian {
  Eigen::VectorXd S;
  Eigen::MatrixXd H;
};

/// Monte Carlo means of S = sum_i D_i^T A^{1/2} R^{-1} A^{-1/2} (y_i - mu_i) and
/// H = sum_i D_i^T A^{1/2} R^{-1} A^{1/2} D_i over the draws, with A carrying
/// the prior weights and dispersion.
ScoreHessian assemble_S_H(const Eigen::VectorXd& theta, const DesignContext& design,
                          const InverseCorrelationCache& corr, const Family& family, double phi,
                          const ChainDraws& draws);

struct NewtonResult {
  Eigen::VectorXd theta;
  bool ridge = false;
};

/// N or n, per spec.penalty_count.
double penalty_multiplier(const DesignContext& design, const ModelSpec& spec);

/// Size of a theta update on the scale of the fitted predictor: the largest
/// of |delta beta_j| (standardized covariates) and ||delta alpha_k||_{W_k},
/// the RMS change of g_k over the sample.
double fit_change(const Eigen::VectorXd& delta, const DesignContext& design);

/// theta' = theta + (H + n E)^{-1} (S - n E theta) on the active coordinates.
NewtonResult newton_step(const Eigen::VectorXd& theta, const ScoreHessian& sh, const Eigen::MatrixXd& E,
                         double n, const std::vector<bool>& active);

ChainTarget make_chain_target(const DesignContext& design, const Family& family, double phi,
                              const Eigen::VectorXd& theta);

PenaltyConfig make_penalty(const DesignContext& design, const ModelSpec& spec, double lambda);

/// Ridge-stabilized unpenalized GLM fit (independence, u = 0).
FitState initialize(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg);

/// Monte Carlo Newton-Raphson at a fixed lambda. `warm`, when given, supplies
/// theta, Sigma, rho, phi and the chain start; the active mask is reset.
FitState fit(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg, double lambda,
             const FitState* warm = nullptr);

/// Posterior-mean residual summaries used for the rho and phi refresh.
struct ResidualMoments {
  std::vector<Eigen::VectorXd> pearson;  // (y~ - mu_bar) sqrt(w / nu(mu_bar)), per subject
  double draw_pearson_ss = 0.0;          // mean over draws of sum (y~ - mu)^2 w / nu(mu)
};

ResidualMoments residual_moments(const Eigen::VectorXd& theta, const DesignContext& design,
                                 const Family& family, const ChainDraws& draws);

}  // namespace pgamm
