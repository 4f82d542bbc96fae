#pragma once

#include "pgamm/spline_basis.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pgamm {

/// Position of beta and of each alpha_k inside the stacked theta.
struct CoefficientLayout {
  Eigen::Index p = 0;
  std::vector<Eigen::Index> group_offset;
  std::vector<Eigen::Index> group_size;

  static CoefficientLayout make(Eigen::Index p, const BasisSet& basis);
  Eigen::Index r() const { return static_cast<Eigen::Index>(group_size.size()); }
  Eigen::Index dim() const;
};

enum class GroupWeightRule { trace, dimension };

GroupWeightRule group_weight_rule_from_name(const std::string& name);

struct PenaltyConfig {
  double lambda = 0.0;
  double a = 3.7;
  double epsilon = 1e-6;
  std::vector<double> group_weights;  // w_k, lambda_k = lambda * w_k

  double group_lambda(Eigen::Index k) const;
  void validate() const;
};

/// sqrt(trace W_k) or sqrt(h_k).
std::vector<double> group_weights(const BasisSet& basis, GroupWeightRule rule);

/// SCAD penalty p_lambda(theta), theta >= 0.
double scad_penalty(double theta, double lambda, double a);

/// q_lambda(theta) = p'_lambda(theta), theta >= 0.
double scad_derivative(double theta, double lambda, double a);

/// sqrt(alpha^T W alpha). Rejects W with an eigenvalue below -1e-12.
double group_norm(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& W);

/// Quadratic surrogate of p_lambda(||alpha||_W) expanded at alpha0.
double lqa_group_penalty(const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha0, const Eigen::MatrixXd& W,
                         double lambda, double a);

/// E_n: q(|beta_j|)/(eps + |beta_j|) on the linear diagonal and
/// q(||alpha_k||)/(eps + ||alpha_k||) * W_k on each active group block.
/// Inactive coordinates get zero rows and columns.
Eigen::MatrixXd lqa_weight_matrix(const Eigen::VectorXd& theta, const CoefficientLayout& layout,
                                  const std::vector<Eigen::MatrixXd>& W, const PenaltyConfig& cfg,
                                  const std::vector<bool>& active);

struct ThresholdResult {
  int zeroed_linear = 0;
  int zeroed_groups = 0;
};

/// Sets |beta_j| <= eps and groups with ||alpha_k||_W <= eps to exactly zero
/// and clears them from `active`.
ThresholdResult threshold_groups(Eigen::VectorXd& theta, const CoefficientLayout& layout,
                                 const std::vector<Eigen::MatrixXd>& W, const PenaltyConfig& cfg,
                                 std::vector<bool>& active);

}  // namespace pgamm
