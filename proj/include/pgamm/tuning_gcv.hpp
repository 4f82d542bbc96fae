#pragma once

#include "pgamm/pgee_solver.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pgamm {

/// W_i = mean_k V_i(U^(k)) + cov_k(mu_i(U^(k))), symmetrized with eigenvalues
/// clipped at 1e-10. V_i = phi A^{1/2} R A^{1/2} / w.
std::vector<Eigen::MatrixXd> marginal_covariance(const FitState& state, const DesignContext& design,
                                                 const ModelSpec& spec, const ChainDraws& draws);

/// (1/N) sum_k sum_i (y_i - mu_i)^T W_i^{-1} (y_i - mu_i).
double residual_sum_of_squares(const FitState& state, const DesignContext& design, const ModelSpec& spec,
                               const ChainDraws& draws, const std::vector<Eigen::MatrixXd>& W);

/// tr[(H + n E)^{-1} H] over the active coordinates.
double effective_dof(const FitState& state, const DesignContext& design, const ModelSpec& spec,
                     const ChainDraws& draws);

struct GcvPoint {
  double gcv = 0.0;
  double rss = 0.0;
  double dof = 0.0;
};

/// Which count plays n in the GCV formula.
enum class GcvSampleSize { subjects, observations };

/// GCV = (RSS/n) / (1 - d/n)^2 on the fit's final draws. RSS uses
/// `reference_W` when given, else the fit's own marginal covariances. Throws
/// TuningError when d/n >= 0.99.
GcvPoint gcv(const FitState& state, const DesignContext& design, const ModelSpec& spec,
             const std::vector<Eigen::MatrixXd>* reference_W = nullptr,
             GcvSampleSize size = GcvSampleSize::subjects);

struct GcvReport {
  std::vector<double> lambda_grid;
  std::vector<double> gcv_values;  // NaN where the point was rejected
  std::vector<double> rss_values;
  std::vector<double> dof_values;
  std::vector<char> valid;
  std::vector<std::string> notes;
  std::vector<std::vector<int>> selected_linear;
  std::vector<std::vector<int>> selected_groups;
  std::vector<int> iterations;
  std::vector<char> converged;
  double lambda_opt = 0.0;
  std::size_t index_opt = 0;
  double lambda_max = 0.0;
};

struct TuneConfig {
  int grid_size = 20;
  double min_ratio = 1e-3;
  int max_search_steps = 16;
  bool parallel_grid = false;  // independent fits instead of warm starts
  GcvSampleSize sample_size = GcvSampleSize::subjects;
  int jobs = 1;
};

struct TuneResult {
  GcvReport report;
  FitState best;
};

/// True when every penalized coefficient of the fit is exactly zero.
bool all_zero(const FitState& state);

/// Smallest lambda (within a factor of two) whose fit zeroes every penalized
/// coordinate, found by doubling or halving from a score-based start.
double find_lambda_max(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg,
                       const TuneConfig& tcfg);

/// `size` log-spaced values in [min_ratio * lambda_max, lambda_max].
std::vector<double> default_grid(double lambda_max, int size, double min_ratio);

/// Fits every grid point (ascending, warm-started unless parallel_grid) and
/// returns the GCV minimizer; ties go to the smallest lambda. RSS at every
/// point is weighted by the marginal covariances of the smallest valid lambda.
TuneResult select_lambda(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg,
                         const std::vector<double>& grid, const TuneConfig& tcfg = {});

/// Default grid around a searched lambda_max, then select_lambda.
TuneResult tune(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg,
                const TuneConfig& tcfg = {});

}  // namespace pgamm
