#pragma once

#include "pgamm/data_model.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>

namespace pgamm::fixtures {

// Unbalanced toy panel: subject i has 2 + (i % 4) rows, uniform covariates,
// y = 0.8 x0 - 0.5 x1 + sin(2 pi s0) + noise.
inline LongitudinalDataset toy_panel(int n, int p, int r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  LongitudinalDataset ds;
  for (int c = 0; c < p; ++c) ds.linear_names.push_back("x" + std::to_string(c));
  for (int c = 0; c < r; ++c) ds.smooth_names.push_back("s" + std::to_string(c));
  for (int i = 0; i < n; ++i) {
    const int ni = 2 + (i % 4);
    SubjectBlock b;
    b.id = "s" + std::to_string(i);
    b.X_linear.resize(ni, p);
    b.X_smooth.resize(ni, r);
    b.y.resize(ni);
    const double u = 0.5 * normal(rng);
    for (int j = 0; j < ni; ++j) {
      for (int c = 0; c < p; ++c) b.X_linear(j, c) = unif(rng);
      for (int c = 0; c < r; ++c) b.X_smooth(j, c) = unif(rng);
      double eta = u;
      if (p > 0) eta += 0.8 * b.X_linear(j, 0);
      if (p > 1) eta -= 0.5 * b.X_linear(j, 1);
      if (r > 0) eta += std::sin(6.283185307179586 * b.X_smooth(j, 0));
      b.y(j) = eta + 0.3 * normal(rng);
    }
    b.Z = Eigen::MatrixXd::Ones(ni, 1);
    b.weights = Eigen::VectorXd::Ones(ni);
    ds.subjects.push_back(std::move(b));
  }
  ds.validate();
  return ds;
}

}  // namespace pgamm::fixtures
