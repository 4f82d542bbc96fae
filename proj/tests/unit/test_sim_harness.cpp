#include "pgamm/sim_harness.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pgamm;

TEST(SimHarness, TrueFunctionVertex) {
  EXPECT_DOUBLE_EQ(true_function(1, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(true_function(0, 0.3), 0.0);
}

TEST(SimHarness, Example1Defaults) {
  const SimDesign d = SimDesign::make(Example::ex1_gaussian_moderate);
  EXPECT_EQ(d.n, 100);
  EXPECT_EQ(d.m, 5);
  ASSERT_EQ(d.true_beta.size(), 10);
  EXPECT_EQ(d.true_beta(0), -1.0);
  EXPECT_EQ(d.true_beta(1), -1.0);
  EXPECT_EQ(d.true_beta(2), 2.0);
  EXPECT_EQ(d.true_beta.tail(7).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(d.linear_support(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(d.smooth_support(), (std::vector<int>{0, 1, 2}));
}

// Property: with no signal and no random intercept, y is the AR-1 error.
TEST(SimHarnessProperty, GaussianErrorMoments) {
  SimDesign d = SimDesign::make(Example::ex1_gaussian_moderate, 5000, 3);
  d.true_beta.setZero();
  std::fill(d.g_ids.begin(), d.g_ids.end(), 0);
  d.sigma_u = 0.0;
  const SimData sim = generate(d);
  double s2 = 0.0, lag = 0.0;
  long count = 0, pairs = 0;
  for (const auto& s : sim.data.subjects) {
    for (Eigen::Index j = 0; j < s.size(); ++j) {
      s2 += s.y(j) * s.y(j);
      ++count;
      if (j > 0) {
        lag += s.y(j) * s.y(j - 1);
        ++pairs;
      }
    }
  }
  const double var = s2 / count;
  const double corr = lag / pairs / var;
  // clustering inflates the plain SE; five times the iid SE is a conservative 3-SE band
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / count) * 2.0);
  EXPECT_NEAR(corr, 0.7, 3.0 * std::sqrt(1.0 / pairs) * 2.0);
}

TEST(SimHarnessProperty, BinaryMarginalAtZeroPredictor) {
  SimDesign d = SimDesign::make(Example::ex3_binary, 5000, 5);
  d.true_beta.setZero();
  std::fill(d.g_ids.begin(), d.g_ids.end(), 0);
  d.sigma_u = 0.0;
  const SimData sim = generate(d);
  double ones = 0.0;
  long count = 0;
  for (const auto& s : sim.data.subjects) {
    ones += s.y.sum();
    count += s.size();
  }
  const double p = ones / count;
  // cluster-robust: 4 observations per subject at most double the variance
  EXPECT_NEAR(p, 0.5, 3.0 * std::sqrt(0.25 / count * 2.0));
}

TEST(SimHarness, GeneratorIsSeeded) {
  const SimDesign d = SimDesign::make(Example::ex1_gaussian_moderate, 20, 9);
  const SimData a = generate(d);
  const SimData b = generate(d);
  EXPECT_EQ(a.data.stacked_response(), b.data.stacked_response());
  SimDesign e = d;
  e.seed = 10;
  EXPECT_NE(a.data.stacked_response(), generate(e).data.stacked_response());
}

TEST(SimHarness, TruthCheatScoresPerfectly) {
  HarnessConfig cfg;
  cfg.estimator = Estimator::truth_cheat;
  cfg.reps = 3;
  const ReplicationReport rep = run_replications(SimDesign::make(Example::ex1_gaussian_moderate, 40), cfg);
  EXPECT_EQ(rep.metrics.n_ok, 3);
  EXPECT_EQ(rep.metrics.mse, 0.0);
  EXPECT_LT(rep.metrics.taise, 1e-20);
  EXPECT_EQ(rep.metrics.c_fit, 1.0);
}

TEST(SimHarness, AllZeroUnderfits) {
  HarnessConfig cfg;
  cfg.estimator = Estimator::all_zero;
  cfg.reps = 2;
  const ReplicationReport rep = run_replications(SimDesign::make(Example::ex1_gaussian_moderate, 40), cfg);
  EXPECT_EQ(rep.metrics.fzs, 3.0);
  EXPECT_EQ(rep.metrics.fzf, 3.0);
  EXPECT_EQ(rep.metrics.u_fit, 1.0);
  EXPECT_GT(rep.metrics.mse, 0.0);
}

// Property: metrics are nonnegative and the fit classes partition the runs.
TEST(SimHarnessProperty, MetricSanity) {
  HarnessConfig cfg;
  cfg.estimator = Estimator::scad;
  cfg.lambda = 0.3;
  cfg.reps = 2;
  cfg.mc.n_draws = 20;
  cfg.mc.max_draws = 40;
  cfg.mc.burn_in = 20;
  const ReplicationReport rep = run_replications(SimDesign::make(Example::ex1_gaussian_moderate, 40), cfg);
  EXPECT_EQ(rep.metrics.n_ok + rep.metrics.n_failed, 2);
  EXPECT_GE(rep.metrics.mse, 0.0);
  EXPECT_GE(rep.metrics.taise, 0.0);
  EXPECT_NEAR(rep.metrics.u_fit + rep.metrics.c_fit + rep.metrics.o_fit, 1.0, 1e-15);
  for (const auto& r : rep.records) {
    EXPECT_TRUE(r.fit_class == 'U' || r.fit_class == 'C' || r.fit_class == 'O');
  }
  const ReplicationReport again = run_replications(SimDesign::make(Example::ex1_gaussian_moderate, 40), cfg);
  EXPECT_EQ(rep.metrics.mse, again.metrics.mse);
  EXPECT_EQ(rep.metrics.taise, again.metrics.taise);
}
