#pragma once

#include "pgamm/data_model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace pgamm {

/// Truncated power basis {x, ..., x^d, (x - k_1)_+^d, ..., (x - k_L)_+^d}
/// on [0,1].
struct SplineBasisSpec {
  int degree = 3;
  std::vector<double> knots;  // strictly increasing, inside (0,1)

  /// L interior knots at j/(L+1), j = 1..L.
  static SplineBasisSpec equally_spaced(int degree, int interior_knots);
  /// L interior knots at the empirical j/(L+1) quantiles of x.
  static SplineBasisSpec at_quantiles(int degree, int interior_knots, const Eigen::VectorXd& x);

  int interior_knots() const { return static_cast<int>(knots.size()); }
  int dim() const { return interior_knots() + degree; }
  void validate() const;
};

/// Rounded n^{1/(2 r_smooth + 1)}, at least 1.
int default_knot_count(long n, int r_smooth = 2);

/// Uncentered basis rows b(x).
Eigen::MatrixXd raw_basis(const Eigen::VectorXd& x, const SplineBasisSpec& spec);

struct BasisBlock {
  Eigen::MatrixXd design;  // N x h, centered columns
  Eigen::VectorXd means;   // column means removed from raw_basis
};

BasisBlock build_basis(const Eigen::VectorXd& x, const SplineBasisSpec& spec);

/// One centered design block and group-norm matrix per smooth component.
struct BasisSet {
  std::vector<SplineBasisSpec> specs;
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<Eigen::VectorXd> centering_means;
  std::vector<Eigen::MatrixXd> norm_matrices;

  Eigen::Index size() const { return static_cast<Eigen::Index>(blocks.size()); }
  Eigen::Index dim(Eigen::Index k) const { return blocks[k].cols(); }
  Eigen::Index total_dim() const;
};

/// W_k = (1/n) sum_i (1/n_i) sum_j B_k(x_ijk) B_k(x_ijk)^T using the
/// centered rows of the supplied block.
Eigen::MatrixXd norm_matrix(const Eigen::MatrixXd& block, const std::vector<Eigen::Index>& row_offsets);

/// `overrides`, when given, must hold one spec per smooth component.
BasisSet build_basis_set(const LongitudinalDataset& ds, const SplineBasisSpec& spec,
                         const std::optional<std::vector<SplineBasisSpec>>& overrides = std::nullopt);

/// g_hat(x) = B(x) alpha with the frozen training-sample centering.
Eigen::VectorXd evaluate_g_hat(const Eigen::VectorXd& alpha, const SplineBasisSpec& spec,
                               const Eigen::VectorXd& means, const Eigen::VectorXd& x_grid);

}  // namespace pgamm
