#include "pgamm/pgee_solver.hpp"

#include "pgamm/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace pgamm {

namespace {

constexpr double kNewtonRidge = 1e-8;
constexpr std::uint64_t kChainSalt = 0xF17A1C4A1ULL;

ChainDraws sample_effects(const DesignContext& design, const ModelSpec& spec, const FitState& st, int n_draws,
                          std::uint64_t seed, const Eigen::VectorXd& start) {
  if (!spec.random_effects) return ChainDraws::zeros(design.n_subjects(), design.q());
  const ChainTarget target = make_chain_target(design, spec.family, st.phi, st.theta);
  RandomEffectsModel model{st.Sigma};
  return run_chain(target, model, n_draws, spec.mc.burn_in, spec.mc.thinning, seed, start);
}

Eigen::VectorXd last_draw(const ChainDraws& d) {
  if (d.n_draws() == 0) return Eigen::VectorXd();
  return d.draws.row(d.n_draws() - 1).transpose();
}

int count_active(const std::vector<bool>& active) {
  return static_cast<int>(std::count(active.begin(), active.end(), true));
}

}  // namespace

void SolverConfig::validate() const {
  if (max_outer_iter < 0) throw ContractError("max outer iterations must be >= 0");
  if (!(tol > 0.0)) throw ContractError("convergence tolerance must be positive");
  if (consecutive_hits < 1) throw ContractError("consecutive hits must be >= 1");
  if (!(init_ridge >= 0.0)) throw ContractError("initial ridge must be >= 0");
  if (polish_max_iter < 0) throw ContractError("polish iterations must be >= 0");
}

std::vector<int> FitState::selected_linear() const {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < layout.p; ++j) {
    if (theta(j) != 0.0) out.push_back(static_cast<int>(j));
  }
  return out;
}

std::vector<int> FitState::selected_groups() const {
  std::vector<int> out;
  for (Eigen::Index k = 0; k < layout.r(); ++k) {
    if (alpha(k).cwiseAbs().maxCoeff() > 0.0) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::vector<Eigen::Index> FitState::active_indices() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(active.size()); ++j) {
    if (active[j]) idx.push_back(j);
  }
  return idx;
}

ScoreHessian assemble_S_H(const Eigen::VectorXd& theta, const DesignContext& design,
                          const InverseCorrelationCache& corr, const Family& family, double phi,
                          const ChainDraws& draws) {
  if (theta.size() != design.dim()) throw DimensionError("theta length does not match the design");
  const Eigen::Index N = draws.n_draws();
  if (N < 1) throw ContractError("assemble_S_H needs at least one draw");
  if (draws.n_subjects() != design.n_subjects() || draws.q != design.q()) {
    throw DimensionError("draws do not match the design");
  }
  const Eigen::Index dim = design.dim();
  ScoreHessian out{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
  const Eigen::VectorXd eta_fixed = design.D * theta;
  // Gaussian identity: s is free of u and e is affine in u, so the draw mean
  // equals the evaluation at the mean draw.
  const bool affine = family.kind() == FamilyKind::gaussian;
  const Eigen::VectorXd u_bar = affine ? Eigen::VectorXd(draws.draws.colwise().mean().transpose()) : Eigen::VectorXd();
  SubjectEval ev;
  for (Eigen::Index i = 0; i < design.n_subjects(); ++i) {
    const Eigen::Index ni = design.size(i);
    const Eigen::MatrixXd& Ri = corr.inverse(ni);
    Eigen::VectorXd w_mean = Eigen::VectorXd::Zero(ni);
    Eigen::MatrixXd ss_mean = Eigen::MatrixXd::Zero(ni, ni);
    if (affine) {
      evaluate_subject(design, family, phi, i, eta_fixed, u_bar.segment(i * draws.q, draws.q), ev);
      w_mean = ev.s.cwiseProduct(Ri * ev.e);
      ss_mean = ev.s * ev.s.transpose();
    } else {
      for (Eigen::Index k = 0; k < N; ++k) {
        evaluate_subject(design, family, phi, i, eta_fixed, draws.subject(k, i), ev);
        w_mean.noalias() += ev.s.cwiseProduct(Ri * ev.e);
        ss_mean.noalias() += ev.s * ev.s.transpose();
      }
      w_mean /= static_cast<double>(N);
      ss_mean /= static_cast<double>(N);
    }
    const auto Di = design.rows(i);
    const Eigen::MatrixXd M = Ri.cwiseProduct(ss_mean);
    out.S.noalias() += Di.transpose() * w_mean;
    out.H.noalias() += Di.transpose() * (M * Di);
  }
  out.H = 0.5 * (out.H + out.H.transpose());
  return out;
}

NewtonResult newton_step(const Eigen::VectorXd& theta, const ScoreHessian& sh, const Eigen::MatrixXd& E, double n,
                         const std::vector<bool>& active) {
  const Eigen::Index dim = theta.size();
  if (sh.S.size() != dim || sh.H.rows() != dim || E.rows() != dim || static_cast<Eigen::Index>(active.size()) != dim) {
    throw DimensionError("Newton step inputs disagree in dimension");
  }
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (active[j]) idx.push_back(j);
  }
  NewtonResult out{theta, false};
  const auto a = static_cast<Eigen::Index>(idx.size());
  if (a == 0) return out;
  const Eigen::VectorXd Etheta = E * theta;
  Eigen::MatrixXd M(a, a);
  Eigen::VectorXd rhs(a);
  for (Eigen::Index r = 0; r < a; ++r) {
    rhs(r) = sh.S(idx[r]) - n * Etheta(idx[r]);
    for (Eigen::Index c = 0; c < a; ++c) M(r, c) = sh.H(idx[r], idx[c]) + n * E(idx[r], idx[c]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  Eigen::VectorXd delta;
  if (llt.info() == Eigen::Success) delta = llt.solve(rhs);
  if (llt.info() != Eigen::Success || !delta.allFinite()) {
    out.ridge = true;
    M.diagonal().array() += kNewtonRidge;
    llt.compute(M);
    if (llt.info() != Eigen::Success) throw SolverError("H + nE is singular even after ridge repair");
    delta = llt.solve(rhs);
    if (!delta.allFinite()) throw SolverError("Newton step produced non-finite values");
  }
  for (Eigen::Index r = 0; r < a; ++r) out.theta(idx[r]) += delta(r);
  return out;
}

ChainTarget make_chain_target(const DesignContext& design, const Family& family, double phi,
                              const Eigen::VectorXd& theta) {
  ChainTarget t;
  t.family = family;
  t.phi = phi;
  t.ids = design.ids;
  t.offsets = design.offsets;
  t.y = design.y;
  t.weights = design.weights;
  t.Z = design.Z;
  t.eta_fixed = design.D * theta;
  return t;
}

PenaltyConfig make_penalty(const DesignContext& design, const ModelSpec& spec, double lambda) {
  PenaltyConfig pen;
  pen.lambda = lambda;
  pen.a = spec.scad_a;
  pen.epsilon = spec.epsilon;
  for (Eigen::Index k = 0; k < design.layout.r(); ++k) {
    if (spec.weight_rule == GroupWeightRule::trace) {
      pen.group_weights.push_back(std::sqrt(std::max(0.0, design.norm_matrices[k].trace())));
    } else {
      pen.group_weights.push_back(std::sqrt(static_cast<double>(design.layout.group_size[k])));
    }
  }
  pen.validate();
  return pen;
}

ResidualMoments residual_moments(const Eigen::VectorXd& theta, const DesignContext& design, const Family& family,
                                 const ChainDraws& draws) {
  ResidualMoments out;
  const Eigen::VectorXd eta_fixed = design.D * theta;
  const Eigen::Index N = draws.n_draws();
  SubjectEval ev;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < design.n_subjects(); ++i) {
    const Eigen::Index off = design.start(i);
    const Eigen::Index ni = design.size(i);
    Eigen::VectorXd mu_sum = Eigen::VectorXd::Zero(ni);
    for (Eigen::Index k = 0; k < N; ++k) {
      evaluate_subject(design, family, 1.0, i, eta_fixed, draws.subject(k, i), ev);
      mu_sum += ev.mu;
      ss += ev.e.squaredNorm();
    }
    const Eigen::VectorXd mu_bar = mu_sum / static_cast<double>(N);
    Eigen::VectorXd r(ni);
    for (Eigen::Index j = 0; j < ni; ++j) {
      // a mean of in-domain means stays in the domain
      const double nu = family.unit_variance(mu_bar(j));
      r(j) = (design.y_mean(off + j) - mu_bar(j)) * std::sqrt(design.weights(off + j) / nu);
    }
    out.pearson.push_back(std::move(r));
  }
  out.draw_pearson_ss = ss / static_cast<double>(N);
  return out;
}

FitState initialize(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg) {
  const Eigen::Index dim = design.dim();
  FitState st;
  st.layout = design.layout;
  st.theta = Eigen::VectorXd::Zero(dim);
  st.active.assign(static_cast<std::size_t>(dim), true);
  st.Sigma = spec.random_effects ? Eigen::MatrixXd(spec.sigma0 * Eigen::MatrixXd::Identity(design.q(), design.q()))
                                 : Eigen::MatrixXd::Zero(design.q(), design.q());
  st.rho = 0.0;
  st.phi = 1.0;
  const InverseCorrelationCache ind({CorrStructure::independent, 0.0}, design.max_cluster);
  const ChainDraws none = ChainDraws::zeros(design.n_subjects(), design.q());
  for (int it = 0; it < 50; ++it) {
    const ScoreHessian sh = assemble_S_H(st.theta, design, ind, spec.family, 1.0, none);
    Eigen::MatrixXd M = sh.H;
    M.diagonal().array() += cfg.init_ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    const Eigen::VectorXd delta = ldlt.solve(sh.S - cfg.init_ridge * st.theta);
    if (ldlt.info() != Eigen::Success || !delta.allFinite()) throw SolverError("initial GLM fit failed");
    st.theta += delta;
    if (delta.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  if (spec.family.kind() == FamilyKind::gaussian && spec.family.estimates_dispersion()) {
    const ResidualMoments rm = residual_moments(st.theta, design, spec.family, none);
    const double dof = static_cast<double>(design.n_obs() - dim);
    if (dof > 0.0) st.phi = std::max(1e-10, rm.draw_pearson_ss / dof);
  }
  st.draws = none;
  st.n_draws = spec.mc.n_draws;
  return st;
}

double penalty_multiplier(const DesignContext& design, const ModelSpec& spec) {
  return static_cast<double>(spec.penalty_count == PenaltyCount::observations ? design.n_obs() : design.n_subjects());
}

double fit_change(const Eigen::VectorXd& delta, const DesignContext& design) {
  const CoefficientLayout& lay = design.layout;
  double change = lay.p ? delta.head(lay.p).cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index k = 0; k < lay.r(); ++k) {
    const Eigen::VectorXd d = delta.segment(lay.group_offset[k], lay.group_size[k]);
    change = std::max(change, std::sqrt(std::max(0.0, d.dot(design.norm_matrices[k] * d))));
  }
  return change;
}

// |beta_j| for j < p, then ||alpha_k||_W.
std::vector<double> unit_norms(const Eigen::VectorXd& theta, const DesignContext& design) {
  const CoefficientLayout& lay = design.layout;
  std::vector<double> out;
  for (Eigen::Index j = 0; j < lay.p; ++j) out.push_back(std::abs(theta(j)));
  for (Eigen::Index k = 0; k < lay.r(); ++k) out.push_back(group_norm(theta.segment(lay.group_offset[k], lay.group_size[k]), design.norm_matrices[k]));
  return out;
}

// Near zero the LQA update scales a unit by ||W^-1 s||_W / (n lambda_k), s being
// the score with that unit removed. Below one the unit only reaches epsilon
// geometrically, often after hundreds of steps; a unit that shrank on the last
// two steps and passes this test is set to its limit, zero.
int zero_vanishing(FitState& st, const ScoreHessian& sh, const DesignContext& design, const PenaltyConfig& pen,
                   double n, const std::vector<int>& shrinking) {
  const CoefficientLayout& lay = design.layout;
  int zeroed = 0;
  for (Eigen::Index j = 0; j < lay.p; ++j) {
    if (shrinking[j] < 2 || st.theta(j) == 0.0) continue;
    const double s = sh.S(j) + sh.H(j, j) * st.theta(j);
    if (std::abs(s) < n * pen.lambda) {
      st.theta(j) = 0.0;
      st.active[j] = false;
      ++zeroed;
    }
  }
  for (Eigen::Index k = 0; k < lay.r(); ++k) {
    const Eigen::Index off = lay.group_offset[k], h = lay.group_size[k];
    if (shrinking[lay.p + k] < 2 || st.theta.segment(off, h).cwiseAbs().maxCoeff() == 0.0) continue;
    const Eigen::VectorXd s = sh.S.segment(off, h) + sh.H.block(off, off, h, h) * st.theta.segment(off, h);
    const Eigen::VectorXd Winv_s = design.norm_matrices[k].completeOrthogonalDecomposition().solve(s);
    if (std::sqrt(std::max(0.0, s.dot(Winv_s))) < n * pen.group_lambda(k)) {
      st.theta.segment(off, h).setZero();
      for (Eigen::Index c = off; c < off + h; ++c) st.active[c] = false;
      ++zeroed;
    }
  }
  return zeroed;
}

FitState fit(const DesignContext& design, const ModelSpec& spec, const SolverConfig& cfg, double lambda,
             const FitState* warm) {
  cfg.validate();
  spec.mc.validate();
  const PenaltyConfig pen = make_penalty(design, spec, lambda);
  const double n = penalty_multiplier(design, spec);

  FitState st = warm ? *warm : initialize(design, spec, cfg);
  if (st.theta.size() != design.dim()) throw DimensionError("warm start does not match the design");
  st.layout = design.layout;
  st.lambda = lambda;
  st.active.assign(static_cast<std::size_t>(design.dim()), true);
  st.trace.clear();
  st.converged = false;
  st.iterations = 0;
  st.polish_iterations = 0;
  if (!spec.random_effects) st.Sigma = Eigen::MatrixXd::Zero(design.q(), design.q());

  Eigen::VectorXd start = (warm && spec.random_effects) ? last_draw(warm->draws) : Eigen::VectorXd();
  if (start.size() != design.n_subjects() * design.q()) start.resize(0);

  const bool can_refresh_rho = cfg.refresh_rho && spec.corr != CorrStructure::independent && design.max_cluster >= 2;
  const bool can_refresh_phi = cfg.refresh_phi && spec.family.kind() == FamilyKind::gaussian &&
                               spec.family.estimates_dispersion();

  // Common random numbers: every chain reuses one seed and one start, so the
  // draws move smoothly with (theta, Sigma) and the iteration can settle.
  const std::uint64_t chain_seed = mix_seed(spec.mc.seed, kChainSalt);
  int N = warm ? std::clamp(warm->n_draws, spec.mc.n_draws, spec.mc.max_draws) : spec.mc.n_draws;
  int hits = 0;
  for (int t = 0; t < cfg.max_outer_iter; ++t) {
    const InverseCorrelationCache cache({spec.corr, st.rho}, design.max_cluster);
    const ChainDraws draws = sample_effects(design, spec, st, N, chain_seed, start);

    const ScoreHessian sh = assemble_S_H(st.theta, design, cache, spec.family, kScoreDispersion, draws);
    const Eigen::MatrixXd E = lqa_weight_matrix(st.theta, st.layout, design.norm_matrices, pen, st.active);
    NewtonResult nr = newton_step(st.theta, sh, E, n, st.active);
    threshold_groups(nr.theta, st.layout, design.norm_matrices, pen, st.active);
    const Eigen::VectorXd step = nr.theta - st.theta;
    const double change = fit_change(step, design);
    const double change_raw = step.size() ? step.cwiseAbs().maxCoeff() : 0.0;
    st.theta = std::move(nr.theta);

    if (spec.random_effects && cfg.refresh_sigma) st.Sigma = update_sigma(draws);
    if (can_refresh_rho || can_refresh_phi) {
      const ResidualMoments rm = residual_moments(st.theta, design, spec.family, draws);
      if (can_refresh_rho) st.rho = estimate_rho(rm.pearson, spec.corr);
      if (can_refresh_phi) {
        const double dof = static_cast<double>(design.n_obs() - count_active(st.active));
        if (dof > 0.0) st.phi = std::max(1e-10, rm.draw_pearson_ss / dof);
      }
    }

    IterationRecord rec;
    rec.iteration = t + 1;
    rec.max_change = change;
    rec.max_change_raw = change_raw;
    rec.acceptance = spec.random_effects ? draws.mean_acceptance() : 1.0;
    rec.n_draws = static_cast<int>(draws.n_draws());
    rec.ridge = nr.ridge;
    rec.active = count_active(st.active);
    rec.rho = st.rho;
    rec.phi = st.phi;
    st.trace.push_back(rec);
    st.iterations = t + 1;

    hits = change < cfg.tol ? hits + 1 : 0;
    if (hits >= cfg.consecutive_hits) {
      st.converged = true;
      break;
    }
    N = std::min(spec.mc.max_draws, static_cast<int>(std::ceil(N * spec.mc.growth)));
  }
  st.n_draws = N;

  st.draws = sample_effects(design, spec, st, N, chain_seed, start);
  if (st.iterations > 0) {
    const InverseCorrelationCache cache({spec.corr, st.rho}, design.max_cluster);
    std::vector<double> norms = unit_norms(st.theta, design);
    std::vector<int> shrinking(norms.size(), 0);
    for (int it = 0; it < cfg.polish_max_iter; ++it) {
      const ScoreHessian sh = assemble_S_H(st.theta, design, cache, spec.family, kScoreDispersion, st.draws);
      const int zeroed = zero_vanishing(st, sh, design, pen, n, shrinking);
      const Eigen::MatrixXd E = lqa_weight_matrix(st.theta, st.layout, design.norm_matrices, pen, st.active);
      NewtonResult nr = newton_step(st.theta, sh, E, n, st.active);
      threshold_groups(nr.theta, st.layout, design.norm_matrices, pen, st.active);
      const double change = fit_change(nr.theta - st.theta, design);
      st.theta = std::move(nr.theta);
      st.polish_iterations = it + 1;
      const std::vector<double> next = unit_norms(st.theta, design);
      for (std::size_t u = 0; u < next.size(); ++u) shrinking[u] = next[u] < norms[u] ? shrinking[u] + 1 : 0;
      norms = next;
      if (zeroed == 0 && change < cfg.polish_tol) break;
    }
  }
  return st;
}

}  // namespace pgamm
