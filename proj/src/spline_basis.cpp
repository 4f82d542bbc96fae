#include "pgamm/spline_basis.hpp"

#include "pgamm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pgamm {

SplineBasisSpec SplineBasisSpec::equally_spaced(int degree, int interior_knots) {
  if (interior_knots < 0) throw ContractError("number of interior knots must be >= 0");
  SplineBasisSpec spec;
  spec.degree = degree;
  for (int j = 1; j <= interior_knots; ++j) {
    spec.knots.push_back(static_cast<double>(j) / (interior_knots + 1));
  }
  spec.validate();
  return spec;
}

SplineBasisSpec SplineBasisSpec::at_quantiles(int degree, int interior_knots, const Eigen::VectorXd& x) {
  if (interior_knots < 0) throw ContractError("number of interior knots must be >= 0");
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  SplineBasisSpec spec;
  spec.degree = degree;
  for (int j = 1; j <= interior_knots; ++j) {
    const double pos = static_cast<double>(j) / (interior_knots + 1) * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double v = sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    if (spec.knots.empty() || v > spec.knots.back()) spec.knots.push_back(v);
  }
  spec.validate();
  return spec;
}

void SplineBasisSpec::validate() const {
  if (degree < 1 || degree > 3) throw ContractError("spline degree must be 1, 2 or 3");
  for (std::size_t j = 0; j < knots.size(); ++j) {
    if (!(knots[j] > 0.0 && knots[j] < 1.0)) throw ContractError("knots must lie strictly inside (0,1)");
    if (j > 0 && !(knots[j] > knots[j - 1])) throw ContractError("knots must be strictly increasing");
  }
}

int default_knot_count(long n, int r_smooth) {
  if (n < 2) throw ContractError("default_knot_count needs n >= 2");
  if (r_smooth < 1) throw ContractError("smoothness order must be >= 1");
  const double L = std::round(std::pow(static_cast<double>(n), 1.0 / (2.0 * r_smooth + 1.0)));
  return std::max(1, static_cast<int>(L));
}

Eigen::MatrixXd raw_basis(const Eigen::VectorXd& x, const SplineBasisSpec& spec) {
  spec.validate();
  const Eigen::Index N = x.size();
  const int d = spec.degree;
  Eigen::MatrixXd b(N, spec.dim());
  for (Eigen::Index row = 0; row < N; ++row) {
    const double v = x(row);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("spline argument " + std::to_string(v) + " outside [0,1]");
    }
    double power = 1.0;
    for (int e = 1; e <= d; ++e) {
      power *= v;
      b(row, e - 1) = power;
    }
    for (int l = 0; l < spec.interior_knots(); ++l) {
      const double t = std::max(0.0, v - spec.knots[l]);
      b(row, d + l) = std::pow(t, d);
    }
  }
  return b;
}

BasisBlock build_basis(const Eigen::VectorXd& x, const SplineBasisSpec& spec) {
  BasisBlock out;
  out.design = raw_basis(x, spec);
  out.means = out.design.colwise().mean().transpose();
  out.design.rowwise() -= out.means.transpose();
  return out;
}

Eigen::Index BasisSet::total_dim() const {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.cols();
  return total;
}

Eigen::MatrixXd norm_matrix(const Eigen::MatrixXd& block, const std::vector<Eigen::Index>& row_offsets) {
  const Eigen::Index h = block.cols();
  const auto n = static_cast<Eigen::Index>(row_offsets.size()) - 1;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(h, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index start = row_offsets[i];
    const Eigen::Index ni = row_offsets[i + 1] - start;
    const auto rows = block.middleRows(start, ni);
    W.noalias() += (rows.transpose() * rows) / static_cast<double>(ni);
  }
  W /= static_cast<double>(n);
  return 0.5 * (W + W.transpose());
}

BasisSet build_basis_set(const LongitudinalDataset& ds, const SplineBasisSpec& spec,
                         const std::optional<std::vector<SplineBasisSpec>>& overrides) {
  if (overrides && static_cast<Eigen::Index>(overrides->size()) != ds.r()) {
    throw ContractError("per-component spline overrides must match the number of smooth covariates");
  }
  const Eigen::MatrixXd sm = ds.stacked_smooth();
  const auto offsets = ds.row_offsets();
  BasisSet set;
  for (Eigen::Index k = 0; k < ds.r(); ++k) {
    const SplineBasisSpec& sk = overrides ? (*overrides)[k] : spec;
    BasisBlock block = build_basis(sm.col(k), sk);
    set.norm_matrices.push_back(norm_matrix(block.design, offsets));
    set.specs.push_back(sk);
    set.centering_means.push_back(std::move(block.means));
    set.blocks.push_back(std::move(block.design));
  }
  return set;
}

Eigen::VectorXd evaluate_g_hat(const Eigen::VectorXd& alpha, const SplineBasisSpec& spec,
                               const Eigen::VectorXd& means, const Eigen::VectorXd& x_grid) {
  if (alpha.size() != spec.dim() || means.size() != spec.dim()) {
    throw DimensionError("coefficient/centering length does not match basis dimension");
  }
  Eigen::MatrixXd b = raw_basis(x_grid, spec);
  b.rowwise() -= means.transpose();
  return b * alpha;
}

}  // namespace pgamm
