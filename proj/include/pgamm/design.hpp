#pragma once

#include "pgamm/data_model.hpp"
#include "pgamm/exponential_family.hpp"
#include "pgamm/penalty_scad.hpp"
#include "pgamm/spline_basis.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pgamm {

/// Stacked D = [X | B_1 | ... | B_r] and everything else the estimating
/// equations read from the data.
struct DesignContext {
  Eigen::MatrixXd D;
  Eigen::MatrixXd Z;
  Eigen::VectorXd y;          // raw response
  Eigen::VectorXd y_mean;     // response on the mean scale
  Eigen::VectorXd weights;
  std::vector<Eigen::Index> offsets;
  std::vector<std::string> ids;
  CoefficientLayout layout;
  std::vector<Eigen::MatrixXd> norm_matrices;
  Eigen::Index max_cluster = 0;

  static DesignContext make(const LongitudinalDataset& ds, const BasisSet& basis, const Family& family);

  Eigen::Index n_subjects() const { return static_cast<Eigen::Index>(ids.size()); }
  Eigen::Index n_obs() const { return D.rows(); }
  Eigen::Index dim() const { return D.cols(); }
  Eigen::Index q() const { return Z.cols(); }
  Eigen::Index start(Eigen::Index i) const { return offsets[i]; }
  Eigen::Index size(Eigen::Index i) const { return offsets[i + 1] - offsets[i]; }
  auto rows(Eigen::Index i) const { return D.middleRows(offsets[i], size(i)); }
};

/// Per-observation quantities of one subject under one draw:
/// mu, s = sqrt(w nu(mu) / phi) and e = (y~ - mu) sqrt(w / (phi nu(mu))).
struct SubjectEval {
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
  Eigen::VectorXd s;
  Eigen::VectorXd e;
};

/// Fills `out` for subject i at linear predictor eta_fixed_i + Z_i u.
void evaluate_subject(const DesignContext& design, const Family& family, double phi, Eigen::Index i,
                      const Eigen::VectorXd& eta_fixed, const Eigen::VectorXd& u, SubjectEval& out);

}  // namespace pgamm
