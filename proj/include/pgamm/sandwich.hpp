#pragma once

#include "pgamm/pgee_solver.hpp"

#include <Eigen/Dense>

#include <vector>

namespace pgamm {

struct SandwichResult {
  std::vector<int> linear_indices;  // selected beta coordinates, in order
  Eigen::MatrixXd covariance;       // H*^{-1} M* H*^{-1}
  Eigen::MatrixXd model_based;      // H*^{-1}
  bool ridge = false;               // B^T Omega B needed repair

  Eigen::VectorXd standard_errors() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Sandwich covariance of the selected linear coefficients after projecting
/// out the selected spline columns: X* = X - B (B^T Omega B)^{-1} B^T Omega X
/// with Omega_i = E[A^{1/2} R^{-1} A^{1/2}] and the middle term built from
/// the Monte Carlo mean of the score outer products. Uses state.draws.
SandwichResult sandwich_covariance(const FitState& state, const DesignContext& design, const ModelSpec& spec);

}  // namespace pgamm
