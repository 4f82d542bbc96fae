#include "pgamm/errors.hpp"
#include "pgamm/exponential_family.hpp"
#include "pgamm/working_correlation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace pgamm;

TEST(Family, MeansAndVariances) {
  EXPECT_DOUBLE_EQ(Family::binomial().mean(0.0), 0.5);
  EXPECT_DOUBLE_EQ(Family::gaussian().mean(3.2), 3.2);
  EXPECT_DOUBLE_EQ(Family::poisson().mean(0.0), 1.0);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  EXPECT_DOUBLE_EQ(Family::binomial().variance(Eigen::VectorXd::Constant(1, 0.5), 1.0, one)(0), 0.25);
  EXPECT_DOUBLE_EQ(Family::gaussian().variance(Eigen::VectorXd::Constant(1, -7.0), 2.0, one)(0), 2.0);
  EXPECT_DOUBLE_EQ(Family::poisson().variance(Eigen::VectorXd::Constant(1, 3.0), 1.0, one)(0), 3.0);
  EXPECT_THROW(Family::poisson().variance(Eigen::VectorXd::Constant(1, -1.0), 1.0, one), DomainError);
}

TEST(Family, LogDensities) {
  EXPECT_NEAR(Family::binomial().log_density(1.0, 0.5, 1.0, 1.0), std::log(0.5), 1e-14);
  EXPECT_NEAR(Family::gaussian().log_density(1.3, 1.3, 1.0, 1.0), -0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(Family::poisson().log_density(0.0, 1.0, 1.0, 1.0), -1.0, 1e-14);
  EXPECT_THROW(Family::binomial().log_density(2.0, 0.5, 1.0, 1.0), SupportError);
  EXPECT_THROW(Family::poisson().log_density(-1.0, 0.5, 1.0, 1.0), SupportError);
}

TEST(Family, DispersionEstimate) {
  EXPECT_DOUBLE_EQ(estimate_dispersion(Eigen::VectorXd::Zero(3), 3), 0.0);
  Eigen::VectorXd r(2);
  r << 1.0, -1.0;
  EXPECT_DOUBLE_EQ(estimate_dispersion(r, 2), 1.0);
  EXPECT_THROW(estimate_dispersion(r, 0), Error);
}

TEST(FamilyProperty, LinkRoundTripAndDerivative) {
  for (const Family& f : {Family::gaussian(), Family::binomial(), Family::poisson()}) {
    for (double eta = -6.0; eta <= 6.0; eta += 0.25) {
      EXPECT_NEAR(f.link_fn(f.mean(eta)), eta, 1e-10) << f.name();
      const double h = 1e-5;
      const double fd = (f.mean(eta + h) - f.mean(eta - h)) / (2.0 * h);
      EXPECT_NEAR(f.mean_derivative(eta), fd, 1e-6) << f.name();
    }
  }
}

TEST(FamilyProperty, LoglikMaximizedAtObservation) {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  for (double y : {-1.5, 0.0, 2.5}) {
    const Eigen::VectorXd yy = Eigen::VectorXd::Constant(1, y);
    const double at_y = Family::gaussian().conditional_loglik(yy, yy, 1.0, w);
    for (double mu = y - 1.0; mu <= y + 1.0; mu += 0.01) {
      EXPECT_LE(Family::gaussian().conditional_loglik(yy, Eigen::VectorXd::Constant(1, mu), 1.0, w), at_y + 1e-14);
    }
  }
  // binomial count 3 of 10: maximized at mu = 0.3
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 3.0);
  const Eigen::VectorXd den = Eigen::VectorXd::Constant(1, 10.0);
  const double best = Family::binomial().conditional_loglik(y, Eigen::VectorXd::Constant(1, 0.3), 1.0, den);
  for (double mu = 0.01; mu < 1.0; mu += 0.01) {
    EXPECT_LE(Family::binomial().conditional_loglik(y, Eigen::VectorXd::Constant(1, mu), 1.0, den), best + 1e-12);
  }
}

TEST(Correlation, Ar1Matrix) {
  const Eigen::MatrixXd R = correlation_matrix({CorrStructure::ar1, 0.7}, 3);
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0.7, 0.49, 0.7, 1, 0.7, 0.49, 0.7, 1;
  EXPECT_LT((R - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(correlation_matrix({CorrStructure::exchangeable, 0.0}, 4).isIdentity(0.0));
  EXPECT_THROW(correlation_matrix({CorrStructure::ar1, 1.0}, 3), ParameterError);
  EXPECT_THROW(correlation_matrix({CorrStructure::exchangeable, -0.5}, 4), ParameterError);
}

// Property: R is symmetric PD on a (structure, rho, m) grid, and its closed
// form inverse is exact.
TEST(CorrelationProperty, PositiveDefiniteGrid) {
  for (CorrStructure s : {CorrStructure::independent, CorrStructure::exchangeable, CorrStructure::ar1}) {
    for (Eigen::Index m = 1; m <= 20; ++m) {
      const auto [lo, hi] = rho_bounds(s, m);
      for (int g = 1; g < 20; ++g) {
        const double rho = s == CorrStructure::independent ? 0.0 : lo + (hi - lo) * g / 20.0;
        const Eigen::MatrixXd R = correlation_matrix({s, rho}, m);
        EXPECT_LT((R - R.transpose()).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((R.diagonal().array() - 1.0).abs().maxCoeff(), 1e-15);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
        EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0) << corr_structure_name(s) << " m=" << m << " rho=" << rho;
        const Eigen::MatrixXd Rinv = inverse_correlation({s, rho}, m);
        EXPECT_LT((R * Rinv - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff(), 1e-8);
      }
    }
  }
}

TEST(CorrelationProperty, Ar1InverseIsTridiagonal) {
  const Eigen::MatrixXd Rinv = inverse_correlation({CorrStructure::ar1, 0.6}, 6);
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      if (std::abs(a - b) > 1) EXPECT_EQ(Rinv(a, b), 0.0);
    }
  }
  EXPECT_LT((correlation_matrix({CorrStructure::ar1, 0.6}, 6) * Rinv - Eigen::MatrixXd::Identity(6, 6))
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
}

TEST(Correlation, MomentEstimators) {
  // r_ij = c_i within subject: exchangeable rho hits the upper clamp
  std::vector<Eigen::VectorXd> rep = {Eigen::VectorXd::Constant(3, 1.0), Eigen::VectorXd::Constant(3, -2.0)};
  const double phi = (3 * 1.0 + 3 * 4.0) / 6.0;
  EXPECT_NEAR(estimate_rho(rep, CorrStructure::exchangeable, phi), 1.0 - 1e-6, 1e-12);
  EXPECT_EQ(estimate_rho(rep, CorrStructure::independent), 0.0);
  std::vector<Eigen::VectorXd> alt = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)};
  alt[0] << 1.0, 0.0, 1.0;
  alt[1] << 0.0, 2.0, 0.0;
  EXPECT_EQ(estimate_rho(alt, CorrStructure::ar1), 0.0);
  std::vector<Eigen::VectorXd> single = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  EXPECT_THROW(estimate_rho(single, CorrStructure::ar1), EstimationError);
}

TEST(CorrelationProperty, MomentEstimateIsScaleInvariant) {
  std::vector<Eigen::VectorXd> r = {Eigen::VectorXd(4), Eigen::VectorXd(3), Eigen::VectorXd(5)};
  r[0] << 0.3, 0.5, -0.2, 0.1;
  r[1] << -1.0, -0.4, 0.2;
  r[2] << 0.7, 0.9, 0.1, -0.3, -0.6;
  for (CorrStructure s : {CorrStructure::exchangeable, CorrStructure::ar1}) {
    const double base = estimate_rho(r, s);
    auto scaled = r;
    for (auto& v : scaled) v *= 7.5;
    EXPECT_NEAR(estimate_rho(scaled, s), base, 1e-12);
  }
}
