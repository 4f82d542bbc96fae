#include "pgamm/errors.hpp"
#include "pgamm/spline_basis.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pgamm;

TEST(SplineBasis, DefaultKnotCount) {
  EXPECT_EQ(default_knot_count(100), 3);
  EXPECT_EQ(default_knot_count(500), 3);
  EXPECT_EQ(default_knot_count(100000), 10);
  EXPECT_THROW(default_knot_count(1), ContractError);
}

TEST(SplineBasis, TruncatedLinearRows) {
  SplineBasisSpec spec{1, {0.5}};
  Eigen::VectorXd x(2);
  x << 0.75, 0.25;
  const Eigen::MatrixXd B = raw_basis(x, spec);
  EXPECT_DOUBLE_EQ(B(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(B(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(B(1, 0), 0.25);
  EXPECT_DOUBLE_EQ(B(1, 1), 0.0);
  const BasisBlock blk = build_basis(x, spec);
  EXPECT_DOUBLE_EQ(blk.design(0, 0), 0.75 - 0.5);
  EXPECT_DOUBLE_EQ(blk.design(0, 1), 0.25 - 0.125);
}

TEST(SplineBasis, DimensionIsKnotsPlusDegree) {
  const auto spec = SplineBasisSpec::equally_spaced(3, 3);
  EXPECT_EQ(spec.dim(), 6);
  EXPECT_NEAR(spec.knots[0], 0.25, 1e-15);
  EXPECT_NEAR(spec.knots[2], 0.75, 1e-15);
}

TEST(SplineBasis, OutsideUnitIntervalIsDomainError) {
  Eigen::VectorXd x(1);
  x << 1.2;
  EXPECT_THROW(build_basis(x, SplineBasisSpec::equally_spaced(3, 2)), DomainError);
}

TEST(SplineBasis, EmptySmoothSet) {
  const auto [ds, rec] = standardize(fixtures::toy_panel(10, 2, 0, 1));
  const BasisSet bs = build_basis_set(ds, SplineBasisSpec::equally_spaced(3, 2));
  EXPECT_EQ(bs.size(), 0);
  EXPECT_EQ(bs.total_dim(), 0);
}

// Property: columns are centered over all N rows.
TEST(SplineBasisProperty, ColumnsAreCentered) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [ds, rec] = standardize(fixtures::toy_panel(40, 1, 3, seed));
    for (int degree = 1; degree <= 3; ++degree) {
      const BasisSet bs = build_basis_set(ds, SplineBasisSpec::equally_spaced(degree, 3));
      const double N = static_cast<double>(ds.n_obs());
      for (const auto& B : bs.blocks) {
        EXPECT_LT(B.colwise().sum().cwiseAbs().maxCoeff(), 1e-8 * N);
      }
    }
  }
}

// Property: W_k equals the double sum over (i, j) with 1/n_i weights.
TEST(SplineBasisProperty, NormMatrixMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [ds, rec] = standardize(fixtures::toy_panel(25, 1, 2, seed));
    const BasisSet bs = build_basis_set(ds, SplineBasisSpec::equally_spaced(3, 2));
    const auto offsets = ds.row_offsets();
    for (Eigen::Index k = 0; k < bs.size(); ++k) {
      const Eigen::MatrixXd& B = bs.blocks[k];
      Eigen::MatrixXd brute = Eigen::MatrixXd::Zero(B.cols(), B.cols());
      for (Eigen::Index i = 0; i < ds.n_subjects(); ++i) {
        const double ni = static_cast<double>(offsets[i + 1] - offsets[i]);
        for (Eigen::Index row = offsets[i]; row < offsets[i + 1]; ++row) {
          for (Eigen::Index a = 0; a < B.cols(); ++a) {
            for (Eigen::Index b = 0; b < B.cols(); ++b) brute(a, b) += B(row, a) * B(row, b) / ni;
          }
        }
      }
      brute /= static_cast<double>(ds.n_subjects());
      EXPECT_LT((brute - bs.norm_matrices[k]).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LT((bs.norm_matrices[k] - bs.norm_matrices[k].transpose()).cwiseAbs().maxCoeff(), 1e-15);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bs.norm_matrices[k]);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
    }
  }
}

TEST(SplineBasis, BalancedNormMatrixIsGramOverN) {
  LongitudinalDataset raw = fixtures::toy_panel(12, 1, 1, 3);
  for (auto& s : raw.subjects) {  // trim to 2 rows each
    s.y.conservativeResize(2);
    s.X_linear.conservativeResize(2, Eigen::NoChange);
    s.X_smooth.conservativeResize(2, Eigen::NoChange);
    s.Z.conservativeResize(2, Eigen::NoChange);
    s.weights.conservativeResize(2);
  }
  const auto [ds, rec] = standardize(raw);
  const BasisSet bs = build_basis_set(ds, SplineBasisSpec::equally_spaced(2, 2));
  const Eigen::MatrixXd& B = bs.blocks[0];
  const Eigen::MatrixXd gram = B.transpose() * B / static_cast<double>(ds.n_obs());
  EXPECT_LT((gram - bs.norm_matrices[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SplineBasis, GHatLinearityAndCentering) {
  const auto [ds, rec] = standardize(fixtures::toy_panel(30, 1, 1, 4));
  const auto spec = SplineBasisSpec::equally_spaced(3, 3);
  const BasisSet bs = build_basis_set(ds, spec);
  const Eigen::VectorXd x = ds.stacked_smooth().col(0);
  Eigen::VectorXd alpha(spec.dim());
  alpha << 0.3, -1.0, 2.0, 0.5, -0.2, 1.1;
  EXPECT_EQ(evaluate_g_hat(Eigen::VectorXd::Zero(spec.dim()), spec, bs.centering_means[0], x).cwiseAbs().maxCoeff(),
            0.0);
  const Eigen::VectorXd g = evaluate_g_hat(alpha, spec, bs.centering_means[0], x);
  EXPECT_NEAR(g.mean(), 0.0, 1e-12);
  const Eigen::VectorXd g3 = evaluate_g_hat(3.0 * alpha, spec, bs.centering_means[0], x);
  EXPECT_LT((g3 - 3.0 * g).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((g - bs.blocks[0] * alpha).cwiseAbs().maxCoeff(), 1e-12);
}
