#include "pgamm/design.hpp"

#include "pgamm/errors.hpp"

#include <cmath>

namespace pgamm {

DesignContext DesignContext::make(const LongitudinalDataset& ds, const BasisSet& basis, const Family& family) {
  if (basis.size() != ds.r()) throw DimensionError("basis set does not match the smooth covariates");
  DesignContext c;
  c.offsets = ds.row_offsets();
  const Eigen::Index N = ds.n_obs();
  const Eigen::Index p = ds.p();
  c.layout = CoefficientLayout::make(p, basis);
  c.D.resize(N, c.layout.dim());
  if (p > 0) c.D.leftCols(p) = ds.stacked_linear();
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    if (basis.blocks[k].rows() != N) throw DimensionError("basis block rows do not match observations");
    c.D.middleCols(c.layout.group_offset[k], c.layout.group_size[k]) = basis.blocks[k];
  }
  c.norm_matrices = basis.norm_matrices;
  c.y.resize(N);
  c.y_mean.resize(N);
  c.weights.resize(N);
  c.Z.resize(N, ds.q());
  for (Eigen::Index i = 0; i < ds.n_subjects(); ++i) {
    const auto& s = ds.subjects[i];
    const Eigen::Index off = c.offsets[i];
    c.ids.push_back(s.id);
    c.y.segment(off, s.size()) = s.y;
    c.weights.segment(off, s.size()) = s.weights;
    c.Z.middleRows(off, s.size()) = s.Z;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      c.y_mean(off + j) = family.response_scale(s.y(j), s.weights(j));
    }
  }
  c.max_cluster = ds.max_cluster_size();
  return c;
}

void evaluate_subject(const DesignContext& design, const Family& family, double phi, Eigen::Index i,
                      const Eigen::VectorXd& eta_fixed, const Eigen::VectorXd& u, SubjectEval& out) {
  const Eigen::Index off = design.start(i);
  const Eigen::Index ni = design.size(i);
  out.eta = eta_fixed.segment(off, ni);
  if (u.size()) out.eta.noalias() += design.Z.middleRows(off, ni) * u;
  out.mu.resize(ni);
  out.s.resize(ni);
  out.e.resize(ni);
  for (Eigen::Index j = 0; j < ni; ++j) {
    const double mu = family.mean(out.eta(j));
    const double nu = family.unit_variance(mu);
    if (!(nu > 0.0) || !std::isfinite(nu)) {
      throw NumericalError("variance function vanished", static_cast<long>(i), static_cast<long>(j));
    }
    const double w = design.weights(off + j);
    out.mu(j) = mu;
    out.s(j) = std::sqrt(w * nu / phi);
    out.e(j) = (design.y_mean(off + j) - mu) * std::sqrt(w / (phi * nu));
  }
}

}  // namespace pgamm
