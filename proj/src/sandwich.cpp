#include "pgamm/sandwich.hpp"

#include "pgamm/errors.hpp"

#include <Eigen/Cholesky>

namespace pgamm {

namespace {

Eigen::MatrixXd gather_columns(const Eigen::Ref<const Eigen::MatrixXd>& M, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(M.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = M.col(cols[c]);
  return out;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& M, bool& ridge) {
  const Eigen::Index d = M.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    ridge = true;
    const double scale = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
    llt.compute(M + 1e-8 * scale * Eigen::MatrixXd::Identity(d, d));
    if (llt.info() != Eigen::Success) throw SolverError("projection matrix is singular after ridge repair");
  }
  return llt.solve(Eigen::MatrixXd::Identity(d, d));
}

}  // namespace

SandwichResult sandwich_covariance(const FitState& state, const DesignContext& design, const ModelSpec& spec) {
  const CoefficientLayout& layout = design.layout;
  std::vector<Eigen::Index> xcols;
  std::vector<Eigen::Index> bcols;
  for (Eigen::Index j = 0; j < layout.p; ++j) {
    if (state.theta(j) != 0.0) xcols.push_back(j);
  }
  for (Eigen::Index k = 0; k < layout.r(); ++k) {
    if (state.alpha(k).cwiseAbs().maxCoeff() == 0.0) continue;
    for (Eigen::Index l = 0; l < layout.group_size[k]; ++l) bcols.push_back(layout.group_offset[k] + l);
  }
  if (xcols.empty()) throw ContractError("sandwich covariance needs at least one selected linear coefficient");
  const ChainDraws& draws = state.draws;
  if (draws.n_draws() < 1) throw ContractError("sandwich covariance needs the fit's final draws");

  const auto px = static_cast<Eigen::Index>(xcols.size());
  const auto pb = static_cast<Eigen::Index>(bcols.size());
  const Eigen::Index n = design.n_subjects();
  const Eigen::Index N = draws.n_draws();
  const InverseCorrelationCache corr({spec.corr, state.rho}, design.max_cluster);
  const Eigen::VectorXd eta_fixed = design.D * state.theta;

  std::vector<Eigen::MatrixXd> omega(static_cast<std::size_t>(n));
  std::vector<Eigen::MatrixXd> middle(static_cast<std::size_t>(n));
  SubjectEval ev;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index ni = design.size(i);
    const Eigen::MatrixXd& Ri = corr.inverse(ni);
    Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(ni, ni);
    Eigen::MatrixXd ww = Eigen::MatrixXd::Zero(ni, ni);
    for (Eigen::Index k = 0; k < N; ++k) {
      evaluate_subject(design, spec.family, state.phi, i, eta_fixed, draws.subject(k, i), ev);
      const Eigen::VectorXd w = ev.s.cwiseProduct(Ri * ev.e);
      ss.noalias() += ev.s * ev.s.transpose();
      ww.noalias() += w * w.transpose();
    }
    omega[i] = Ri.cwiseProduct(ss / static_cast<double>(N));
    middle[i] = ww / static_cast<double>(N);
  }

  SandwichResult out;
  for (auto j : xcols) out.linear_indices.push_back(static_cast<int>(j));

  Eigen::MatrixXd Gamma = Eigen::MatrixXd::Zero(pb, px);
  if (pb > 0) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(pb, pb);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(pb, px);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::MatrixXd Bi = gather_columns(design.rows(i), bcols);
      const Eigen::MatrixXd Xi = gather_columns(design.rows(i), xcols);
      const Eigen::MatrixXd OB = omega[i] * Bi;
      G.noalias() += Bi.transpose() * OB;
      C.noalias() += OB.transpose() * Xi;
    }
    G = 0.5 * (G + G.transpose());
    Gamma = spd_inverse(G, out.ridge) * C;
  }

  Eigen::MatrixXd Hs = Eigen::MatrixXd::Zero(px, px);
  Eigen::MatrixXd Ms = Eigen::MatrixXd::Zero(px, px);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd Xs = gather_columns(design.rows(i), xcols);
    if (pb > 0) Xs.noalias() -= gather_columns(design.rows(i), bcols) * Gamma;
    Hs.noalias() += Xs.transpose() * omega[i] * Xs;
    Ms.noalias() += Xs.transpose() * middle[i] * Xs;
  }
  Hs = 0.5 * (Hs + Hs.transpose());
  bool unused = false;
  const Eigen::MatrixXd Hinv = spd_inverse(Hs, unused);
  out.model_based = 0.5 * (Hinv + Hinv.transpose());
  Eigen::MatrixXd cov = Hinv * Ms * Hinv;
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

}  // namespace pgamm
