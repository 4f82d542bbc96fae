#include "pgamm/errors.hpp"
#include "pgamm/tuning_gcv.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pgamm;

namespace {

struct Problem {
  LongitudinalDataset ds;
  BasisSet basis;
  DesignContext design;
};

Problem make_problem(int n, int p, int r, std::uint64_t seed) {
  Problem pr;
  pr.ds = standardize(fixtures::toy_panel(n, p, r, seed), true).first;
  pr.basis = build_basis_set(pr.ds, SplineBasisSpec::equally_spaced(2, 2));
  pr.design = DesignContext::make(pr.ds, pr.basis, Family::gaussian());
  return pr;
}

}  // namespace

TEST(Tuning, UnpenalizedDofIsActiveDimension) {
  const Problem pr = make_problem(40, 3, 2, 1);
  const FitState st = fit(pr.design, ModelSpec{}, SolverConfig{}, 0.0);
  EXPECT_NEAR(effective_dof(st, pr.design, ModelSpec{}, st.draws), static_cast<double>(st.active_indices().size()),
              1e-9);
}

TEST(Tuning, IdentityCovarianceRssIsMeanSquaredError) {
  const Problem pr = make_problem(30, 2, 1, 2);
  const FitState st = fit(pr.design, ModelSpec{}, SolverConfig{}, 0.1);
  std::vector<Eigen::MatrixXd> I;
  double brute = 0.0;
  const Eigen::VectorXd eta = pr.design.D * st.theta;
  for (Eigen::Index i = 0; i < pr.design.n_subjects(); ++i) {
    const Eigen::Index off = pr.design.start(i), ni = pr.design.size(i);
    I.push_back(Eigen::MatrixXd::Identity(ni, ni));
    for (Eigen::Index k = 0; k < st.draws.n_draws(); ++k) {
      const Eigen::VectorXd r =
          pr.design.y_mean.segment(off, ni) - eta.segment(off, ni) - Eigen::VectorXd::Constant(ni, st.draws.draws(k, i));
      brute += r.squaredNorm() / static_cast<double>(st.draws.n_draws());
    }
  }
  EXPECT_NEAR(residual_sum_of_squares(st, pr.design, ModelSpec{}, st.draws, I), brute, 1e-12 * (1.0 + brute));
}

TEST(Tuning, GcvIsDeterministic) {
  const Problem pr = make_problem(30, 3, 2, 3);
  const FitState st = fit(pr.design, ModelSpec{}, SolverConfig{}, 0.1);
  const GcvPoint a = gcv(st, pr.design, ModelSpec{});
  const GcvPoint b = gcv(st, pr.design, ModelSpec{});
  EXPECT_EQ(a.gcv, b.gcv);
  EXPECT_EQ(a.rss, b.rss);
  EXPECT_GT(a.dof, 0.0);
  EXPECT_LE(a.dof, static_cast<double>(st.active_indices().size()) + 1e-9);
}

TEST(Tuning, DofGuardRejectsSaturatedFits) {
  // 6 subjects and 2 + 2 * 4 coefficients: d/n > 0.99 at lambda = 0
  const Problem pr = make_problem(6, 2, 2, 4);
  ModelSpec spec;
  spec.corr = CorrStructure::independent;
  const FitState st = fit(pr.design, spec, SolverConfig{}, 0.0);
  EXPECT_THROW(gcv(st, pr.design, spec), TuningError);
  const TuneResult res = select_lambda(pr.design, spec, SolverConfig{}, {0.0, 50.0});
  EXPECT_FALSE(res.report.valid[0]);
  EXPECT_TRUE(res.report.valid[1]);
  EXPECT_EQ(res.report.index_opt, 1u);
}

TEST(Tuning, SingletonGridAndTies) {
  const Problem pr = make_problem(30, 2, 1, 5);
  const TuneResult one = select_lambda(pr.design, ModelSpec{}, SolverConfig{}, {0.2});
  EXPECT_EQ(one.report.lambda_opt, 0.2);
  EXPECT_EQ(one.best.lambda, 0.2);
  // without random effects two huge lambdas both end at theta = 0 with identical
  // RSS and dof, so the smaller one wins
  ModelSpec fixed;
  fixed.random_effects = false;
  TuneConfig cold;
  cold.parallel_grid = true;
  const TuneResult tie = select_lambda(pr.design, fixed, SolverConfig{}, {1e3, 1e4}, cold);
  EXPECT_EQ(tie.report.gcv_values[0], tie.report.gcv_values[1]);
  EXPECT_EQ(tie.report.index_opt, 0u);
}

TEST(Tuning, HugeLambdaHasLargerRss) {
  const Problem pr = make_problem(40, 3, 2, 6);
  const TuneResult res = select_lambda(pr.design, ModelSpec{}, SolverConfig{}, {0.0, 1e3});
  ASSERT_TRUE(res.report.valid[0] && res.report.valid[1]);
  EXPECT_GE(res.report.rss_values[1], res.report.rss_values[0]);
  EXPECT_TRUE(res.report.selected_linear[1].empty());
  EXPECT_EQ(res.report.dof_values[1], 0.0);
}

TEST(Tuning, GridValidation) {
  const Problem pr = make_problem(20, 2, 1, 7);
  EXPECT_THROW(select_lambda(pr.design, ModelSpec{}, SolverConfig{}, {}), TuningError);
  EXPECT_THROW(select_lambda(pr.design, ModelSpec{}, SolverConfig{}, {0.5, 0.1}), TuningError);
  const auto grid = default_grid(2.0, 20, 1e-3);
  ASSERT_EQ(grid.size(), 20u);
  EXPECT_NEAR(grid.front(), 2e-3, 1e-15);
  EXPECT_EQ(grid.back(), 2.0);
  for (std::size_t g = 1; g < grid.size(); ++g) EXPECT_GT(grid[g], grid[g - 1]);
}

// Property: d(lambda) is non-increasing along the grid in most steps.
TEST(TuningProperty, DofDecreasesAlongGrid) {
  int pairs = 0, good = 0;
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const Problem pr = make_problem(50, 4, 2, seed);
    ModelSpec spec;
    spec.random_effects = false;
    const TuneResult res = select_lambda(pr.design, spec, SolverConfig{}, default_grid(2.0, 10, 1e-2));
    for (std::size_t g = 1; g < res.report.lambda_grid.size(); ++g) {
      if (!res.report.valid[g] || !res.report.valid[g - 1]) continue;
      ++pairs;
      good += res.report.dof_values[g] <= res.report.dof_values[g - 1] + 1e-9;
    }
  }
  ASSERT_GT(pairs, 0);
  EXPECT_GE(static_cast<double>(good) / pairs, 0.9);
}

TEST(Tuning, MarginalCovarianceSingleDrawAndNoRandomEffect) {
  const Problem pr = make_problem(20, 2, 1, 8);
  ModelSpec spec;
  spec.corr = CorrStructure::ar1;
  FitState st = fit(pr.design, spec, SolverConfig{}, 0.0);
  ChainDraws one = st.draws;
  one.draws = st.draws.draws.topRows(1);
  const auto W = marginal_covariance(st, pr.design, spec, one);
  for (Eigen::Index i = 0; i < pr.design.n_subjects(); ++i) {
    const Eigen::MatrixXd V = st.phi * correlation_matrix({spec.corr, st.rho}, pr.design.size(i));
    EXPECT_LT((W[i] - V).cwiseAbs().maxCoeff(), 1e-12);
  }
}

// q = 1 gaussian: W_i = phi I + v Z Z^T with v the posterior variance of u_i.
TEST(Tuning, MarginalCovarianceMatchesConjugateForm) {
  Problem pr = make_problem(4, 1, 0, 9);
  ModelSpec spec;
  spec.corr = CorrStructure::independent;
  FitState st = initialize(pr.design, spec, SolverConfig{});
  st.phi = 0.8;
  st.rho = 0.0;
  st.Sigma = Eigen::MatrixXd::Constant(1, 1, 0.6);
  const ChainTarget target = make_chain_target(pr.design, spec.family, st.phi, st.theta);
  st.draws = run_chain(target, {st.Sigma}, 20000, 200, 1, 31);
  const auto W = marginal_covariance(st, pr.design, spec, st.draws);
  for (Eigen::Index i = 0; i < pr.design.n_subjects(); ++i) {
    const Eigen::Index ni = pr.design.size(i);
    const double v = 1.0 / (1.0 / 0.6 + static_cast<double>(ni) / 0.8);
    const Eigen::VectorXd u = st.draws.draws.col(i);
    const double sample_var = (u.array() - u.mean()).square().mean();
    EXPECT_NEAR(sample_var, v, 0.1 * v);
    const Eigen::MatrixXd expected =
        0.8 * Eigen::MatrixXd::Identity(ni, ni) + sample_var * Eigen::MatrixXd::Ones(ni, ni);
    EXPECT_LT((W[i] - expected).cwiseAbs().maxCoeff(), 1e-10);
  }
}
