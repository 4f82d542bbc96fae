#include "pgamm/penalty_scad.hpp"

#include "pgamm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace pgamm {

CoefficientLayout CoefficientLayout::make(Eigen::Index p, const BasisSet& basis) {
  CoefficientLayout layout;
  layout.p = p;
  Eigen::Index offset = p;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    layout.group_offset.push_back(offset);
    layout.group_size.push_back(basis.dim(k));
    offset += basis.dim(k);
  }
  return layout;
}

Eigen::Index CoefficientLayout::dim() const {
  Eigen::Index total = p;
  for (auto h : group_size) total += h;
  return total;
}

GroupWeightRule group_weight_rule_from_name(const std::string& name) {
  if (name == "trace") return GroupWeightRule::trace;
  if (name == "dimension" || name == "dim") return GroupWeightRule::dimension;
  throw ContractError("unknown group weight rule '" + name + "' (expected trace or dimension)");
}

double PenaltyConfig::group_lambda(Eigen::Index k) const {
  const double w = group_weights.empty() ? 1.0 : group_weights.at(static_cast<std::size_t>(k));
  return lambda * w;
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0)) throw ContractError("lambda must be >= 0");
  if (!(a > 2.0)) throw ContractError("SCAD parameter a must exceed 2");
  if (!(epsilon > 0.0)) throw ContractError("threshold epsilon must be positive");
  for (double w : group_weights) {
    if (!(w >= 0.0)) throw ContractError("group weights must be >= 0");
  }
}

std::vector<double> group_weights(const BasisSet& basis, GroupWeightRule rule) {
  std::vector<double> w;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    if (rule == GroupWeightRule::trace) {
      w.push_back(std::sqrt(std::max(0.0, basis.norm_matrices[k].trace())));
    } else {
      w.push_back(std::sqrt(static_cast<double>(basis.dim(k))));
    }
  }
  return w;
}

double scad_penalty(double theta, double lambda, double a) {
  if (theta < 0.0) throw ContractError("SCAD penalty argument must be >= 0");
  if (theta <= lambda) return lambda * theta;
  if (theta <= a * lambda) {
    return -(theta * theta - 2.0 * a * lambda * theta + lambda * lambda) / (2.0 * (a - 1.0));
  }
  return 0.5 * (a + 1.0) * lambda * lambda;
}

double scad_derivative(double theta, double lambda, double a) {
  if (theta < 0.0) throw ContractError("SCAD derivative argument must be >= 0");
  if (lambda < 0.0 || !(a > 2.0)) throw ContractError("SCAD needs lambda >= 0 and a > 2");
  if (lambda == 0.0) return 0.0;
  if (theta <= lambda) return lambda;
  return std::max(0.0, a * lambda - theta) / (a - 1.0);
}

double group_norm(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols() || W.rows() != alpha.size()) {
    throw DimensionError("group norm: coefficient length does not match W");
  }
  if (alpha.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12) throw ContractError("group norm matrix is not positive semidefinite");
  return std::sqrt(std::max(0.0, alpha.dot(W * alpha)));
}

double lqa_group_penalty(const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha0, const Eigen::MatrixXd& W,
                         double lambda, double a) {
  const double n0 = group_norm(alpha0, W);
  if (!(n0 > 0.0)) throw ContractError("LQA expansion point must have a positive norm");
  const double quad = alpha.dot(W * alpha) - alpha0.dot(W * alpha0);
  return scad_penalty(n0, lambda, a) + 0.5 * scad_derivative(n0, lambda, a) / n0 * quad;
}

Eigen::MatrixXd lqa_weight_matrix(const Eigen::VectorXd& theta, const CoefficientLayout& layout,
                                  const std::vector<Eigen::MatrixXd>& W, const PenaltyConfig& cfg,
                                  const std::vector<bool>& active) {
  const Eigen::Index dim = layout.dim();
  if (theta.size() != dim || static_cast<Eigen::Index>(active.size()) != dim) {
    throw DimensionError("LQA weight matrix: theta/mask length does not match layout");
  }
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(dim, dim);
  if (cfg.lambda == 0.0) return E;
  for (Eigen::Index j = 0; j < layout.p; ++j) {
    if (!active[j]) continue;
    const double b = std::abs(theta(j));
    E(j, j) = scad_derivative(b, cfg.lambda, cfg.a) / (cfg.epsilon + b);
  }
  for (Eigen::Index k = 0; k < layout.r(); ++k) {
    const Eigen::Index off = layout.group_offset[k];
    const Eigen::Index h = layout.group_size[k];
    if (!active[off]) continue;
    const double norm = group_norm(theta.segment(off, h), W[k]);
    const double c = scad_derivative(norm, cfg.group_lambda(k), cfg.a) / (cfg.epsilon + norm);
    E.block(off, off, h, h) = c * W[k];
  }
  return E;
}

ThresholdResult threshold_groups(Eigen::VectorXd& theta, const CoefficientLayout& layout,
                                 const std::vector<Eigen::MatrixXd>& W, const PenaltyConfig& cfg,
                                 std::vector<bool>& active) {
  ThresholdResult result;
  for (Eigen::Index j = 0; j < layout.p; ++j) {
    if (active[j] && std::abs(theta(j)) <= cfg.epsilon) {
      theta(j) = 0.0;
      active[j] = false;
      ++result.zeroed_linear;
    }
  }
  for (Eigen::Index k = 0; k < layout.r(); ++k) {
    const Eigen::Index off = layout.group_offset[k];
    const Eigen::Index h = layout.group_size[k];
    if (!active[off]) continue;
    if (group_norm(theta.segment(off, h), W[k]) <= cfg.epsilon) {
      theta.segment(off, h).setZero();
      for (Eigen::Index l = 0; l < h; ++l) active[off + l] = false;
      ++result.zeroed_groups;
    }
  }
  return result;
}

}  // namespace pgamm
