#include "pgamm/tuning_gcv.hpp"

#include "pgamm/errors.hpp"

#include <Eigen/Cholesky>

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace pgamm {

namespace {

constexpr double kDofGuard = 0.99;

}  // namespace

std::vector<Eigen::MatrixXd> marginal_covariance(const FitState& state, const DesignContext& design,
                                                 const ModelSpec& spec, const ChainDraws& draws) {
  const Eigen::Index N = draws.n_draws();
  if (N < 1) throw ContractError("marginal covariance needs at least one draw");
  const InverseCorrelationCache corr({spec.corr, state.rho}, design.max_cluster);
  const Eigen::VectorXd eta_fixed = design.D * state.theta;
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(design.n_subjects()));
  SubjectEval ev;
  for (Eigen::Index i = 0; i < design.n_subjects(); ++i) {
    const Eigen::Index off = design.start(i);
    const Eigen::Index ni = design.size(i);
    const Eigen::MatrixXd& R = corr.correlation(ni);
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(ni, ni);
    Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(ni, ni);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(ni);
    Eigen::VectorXd a(ni);
    for (Eigen::Index k = 0; k < N; ++k) {
      evaluate_subject(design, spec.family, state.phi, i, eta_fixed, draws.subject(k, i), ev);
      for (Eigen::Index j = 0; j < ni; ++j) {
        a(j) = std::sqrt(spec.family.unit_variance(ev.mu(j)) / design.weights(off + j));
      }
      V.noalias() += state.phi * R.cwiseProduct(a * a.transpose());
      mm.noalias() += ev.mu * ev.mu.transpose();
      m += ev.mu;
    }
    V /= static_cast<double>(N);
    mm /= static_cast<double>(N);
    m /= static_cast<double>(N);
    const Eigen::MatrixXd W = V + (mm - m * m.transpose());
    out.push_back(clip_eigenvalues(W, 1e-10));
  }
  return out;
}

double residual_sum_of_squares(const FitState& state, const DesignContext& design, const ModelSpec& spec,
                               const ChainDraws& draws, const std::vector<Eigen::MatrixXd>& W) {
  if (static_cast<Eigen::Index>(W.size()) != design.n_subjects()) {
    throw DimensionError("one marginal covariance per subject is required");
  }
  const Eigen::Index N = draws.n_draws();
  if (N < 1) throw ContractError("RSS needs at least one draw");
  const Eigen::VectorXd eta_fixed = design.D * state.theta;
  double total = 0.0;
  SubjectEval ev;
  for (Eigen::Index i = 0; i < design.n_subjects(); ++i) {
    const Eigen::Index off = design.start(i);
    const Eigen::Index ni = design.size(i);
    Eigen::MatrixXd rr = Eigen::MatrixXd::Zero(ni, ni);
    for (Eigen::Index k = 0; k < N; ++k) {
      evaluate_subject(design, spec.family, state.phi, i, eta_fixed, draws.subject(k, i), ev);
      const Eigen::VectorXd r = design.y_mean.segment(off, ni) - ev.mu;
      rr.noalias() += r * r.transpose();
    }
    rr /= static_cast<double>(N);
    Eigen::LLT<Eigen::MatrixXd> llt(W[i]);
    if (llt.info() != Eigen::Success) throw NumericalError("marginal covariance is not positive definite", static_cast<long>(i), -1);
    total += llt.solve(rr).trace();
  }
  return total;
}

double effective_dof(const FitState& state, const DesignContext& design, const ModelSpec& spec,
                     const ChainDraws& draws) {
  const InverseCorrelationCache corr({spec.corr, state.rho}, design.max_cluster);
  const ScoreHessian sh = assemble_S_H(state.theta, design, corr, spec.family, kScoreDispersion, draws);
  const PenaltyConfig pen = make_penalty(design, spec, state.lambda);
  const Eigen::MatrixXd E = lqa_weight_matrix(state.theta, state.layout, design.norm_matrices, pen, state.active);
  const std::vector<Eigen::Index> idx = state.active_indices();
  const auto a = static_cast<Eigen::Index>(idx.size());
  if (a == 0) return 0.0;
  const double n = penalty_multiplier(design, spec);
  Eigen::MatrixXd H(a, a);
  Eigen::MatrixXd M(a, a);
  for (Eigen::Index r = 0; r < a; ++r) {
    for (Eigen::Index c = 0; c < a; ++c) {
      H(r, c) = sh.H(idx[r], idx[c]);
      M(r, c) = H(r, c) + n * E(idx[r], idx[c]);
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw TuningError("H + nE is singular in the degrees-of-freedom trace");
  return ldlt.solve(H).trace();
}

GcvPoint gcv(const FitState& state, const DesignContext& design, const ModelSpec& spec,
             const std::vector<Eigen::MatrixXd>* reference_W, GcvSampleSize size) {
  const double n = static_cast<double>(size == GcvSampleSize::subjects ? design.n_subjects() : design.n_obs());
  GcvPoint pt;
  pt.dof = effective_dof(state, design, spec, state.draws);
  if (pt.dof / n >= kDofGuard) {
    throw TuningError("effective degrees of freedom " + std::to_string(pt.dof) + " too close to n = " +
                      std::to_string(static_cast<long>(n)));
  }
  if (reference_W) {
    pt.rss = residual_sum_of_squares(state, design, spec, state.draws, *reference_W);
  } else {
    pt.rss = residual_sum_of_squares(state, design, spec, state.draws,
                                     marginal_covariance(state, design, spec, state.draws));
  }
  const double denom = 1.0 - pt.dof / n;
  pt.gcv = (pt.rss / n) / (denom * denom);
  return pt;
}

bool all_zero(const FitState& state) { return state.theta.cwiseAbs().maxCoeff() == 0.0; }

double find_lambda_max(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg,
                       const TuneConfig& tcfg) {
  const FitState init = initialize(design, spec, cfg);
  const InverseCorrelationCache ind({CorrStructure::independent, 0.0}, design.max_cluster);
  const ScoreHessian sh = assemble_S_H(Eigen::VectorXd::Zero(design.dim()), design, ind, spec.family, kScoreDispersion,
                                       ChainDraws::zeros(design.n_subjects(), design.q()));
  const PenaltyConfig unit = make_penalty(design, spec, 1.0);
  const double n = penalty_multiplier(design, spec);
  double start = 0.0;
  for (Eigen::Index j = 0; j < design.layout.p; ++j) start = std::max(start, std::abs(sh.S(j)) / n);
  for (Eigen::Index k = 0; k < design.layout.r(); ++k) {
    const double w = unit.group_weights[k] > 0.0 ? unit.group_weights[k] : 1.0;
    const double g = sh.S.segment(design.layout.group_offset[k], design.layout.group_size[k]).norm();
    start = std::max(start, g / (n * w));
  }
  double lambda = std::max(1e-8, 0.1 * start);

  bool zero = all_zero(fit(design, spec, cfg, lambda, &init));
  if (zero) {
    double last_zero = lambda;
    for (int step = 0; step < tcfg.max_search_steps; ++step) {
      lambda *= 0.5;
      if (!all_zero(fit(design, spec, cfg, lambda, &init))) break;
      last_zero = lambda;
    }
    return last_zero;
  }
  for (int step = 0; step < tcfg.max_search_steps; ++step) {
    lambda *= 2.0;
    if (all_zero(fit(design, spec, cfg, lambda, &init))) return lambda;
  }
  return lambda;
}

std::vector<double> default_grid(double lambda_max, int size, double min_ratio) {
  if (!(lambda_max > 0.0)) throw TuningError("lambda_max must be positive");
  if (size < 1) throw TuningError("grid size must be >= 1");
  if (size == 1) return {lambda_max};
  std::vector<double> grid(static_cast<std::size_t>(size));
  const double lo = std::log(min_ratio * lambda_max);
  const double hi = std::log(lambda_max);
  for (int g = 0; g < size; ++g) grid[g] = std::exp(lo + (hi - lo) * g / (size - 1));
  grid.back() = lambda_max;
  return grid;
}

TuneResult select_lambda(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg,
                         const std::vector<double>& grid, const TuneConfig& tcfg) {
  if (grid.empty()) throw TuningError("lambda grid is empty");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!(grid[g] >= 0.0) || (g > 0 && grid[g] < grid[g - 1])) {
      throw TuningError("lambda grid must be nonnegative and ascending");
    }
  }
  const std::size_t G = grid.size();
  GcvReport rep;
  rep.lambda_grid = grid;
  rep.gcv_values.assign(G, std::numeric_limits<double>::quiet_NaN());
  rep.rss_values.assign(G, std::numeric_limits<double>::quiet_NaN());
  rep.dof_values.assign(G, std::numeric_limits<double>::quiet_NaN());
  rep.valid.assign(G, false);
  rep.notes.assign(G, "");
  rep.selected_linear.assign(G, {});
  rep.selected_groups.assign(G, {});
  rep.iterations.assign(G, 0);
  rep.converged.assign(G, false);
  std::vector<FitState> fits(G);

  auto evaluate = [&](std::size_t g, const FitState* warm) {
    try {
      fits[g] = fit(design, spec, cfg, grid[g], warm);
      rep.selected_linear[g] = fits[g].selected_linear();
      rep.selected_groups[g] = fits[g].selected_groups();
      rep.iterations[g] = fits[g].iterations;
      rep.converged[g] = fits[g].converged;
      rep.valid[g] = true;
    } catch (const Error& e) {
      rep.notes[g] = e.what();
    }
  };

  if (tcfg.parallel_grid && tcfg.jobs > 1) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(tcfg.jobs, static_cast<int>(G)); ++t) {
      pool.emplace_back([&] {
        for (std::size_t g = next++; g < G; g = next++) evaluate(g, nullptr);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    const FitState* warm = nullptr;
    for (std::size_t g = 0; g < G; ++g) {
      evaluate(g, tcfg.parallel_grid ? nullptr : warm);
      if (fits[g].theta.size() == design.dim()) warm = &fits[g];
    }
  }

  // One W_i for the whole grid, taken from the least penalized fit. Each
  // fit's own W_i absorbs whatever signal its penalty removed (through Sigma
  // and phi), which flattens RSS across the grid.
  std::vector<Eigen::MatrixXd> W;
  for (std::size_t g = 0; g < G && W.empty(); ++g) {
    if (rep.valid[g]) W = marginal_covariance(fits[g], design, spec, fits[g].draws);
  }
  for (std::size_t g = 0; g < G; ++g) {
    if (!rep.valid[g]) continue;
    try {
      const GcvPoint pt = gcv(fits[g], design, spec, &W, tcfg.sample_size);
      rep.gcv_values[g] = pt.gcv;
      rep.rss_values[g] = pt.rss;
      rep.dof_values[g] = pt.dof;
      rep.valid[g] = std::isfinite(pt.gcv);
      if (!rep.valid[g]) rep.notes[g] = "non-finite GCV";
    } catch (const Error& e) {
      rep.valid[g] = false;
      rep.notes[g] = e.what();
    }
  }

  bool found = false;
  for (std::size_t g = 0; g < G; ++g) {
    if (!rep.valid[g]) continue;
    // strict comparison keeps the smallest lambda among ties
    if (!found || rep.gcv_values[g] < rep.gcv_values[rep.index_opt]) {
      rep.index_opt = g;
      found = true;
    }
  }
  if (!found) throw TuningError("every lambda grid point failed");
  const std::size_t best = rep.index_opt;
  rep.lambda_opt = grid[best];
  rep.lambda_max = grid.back();
  return {std::move(rep), std::move(fits[best])};
}

TuneResult tune(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg, const TuneConfig& tcfg) {
  const double lmax = find_lambda_max(design, spec, cfg, tcfg);
  TuneResult res = select_lambda(design, spec, cfg, default_grid(lmax, tcfg.grid_size, tcfg.min_ratio), tcfg);
  res.report.lambda_max = lmax;
  return res;
}

}  // namespace pgamm
