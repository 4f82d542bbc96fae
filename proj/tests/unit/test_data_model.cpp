#include "pgamm/data_model.hpp"
#include "pgamm/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pgamm;

namespace {

ColumnRoleConfig roles(std::vector<std::string> linear, std::vector<std::string> smooth = {}) {
  ColumnRoleConfig c;
  c.subject_id = "id";
  c.response = "y";
  c.linear = std::move(linear);
  c.smooth = std::move(smooth);
  return c;
}

}  // namespace

TEST(DataModel, GroupsRowsBySubjectInFileOrder) {
  const auto ds = parse_csv("id,y,x1\na,1.0,2\na,2.0,3\nb,0.5,1\n", roles({"x1"}));
  ASSERT_EQ(ds.n_subjects(), 2);
  EXPECT_EQ(ds.subjects[0].id, "a");
  EXPECT_EQ(ds.subjects[0].size(), 2);
  EXPECT_EQ(ds.subjects[1].size(), 1);
  EXPECT_DOUBLE_EQ(ds.subjects[0].y(1), 2.0);
  EXPECT_DOUBLE_EQ(ds.subjects[1].X_linear(0, 0), 1.0);
  // default random intercept and unit weights
  EXPECT_EQ(ds.subjects[0].Z.cols(), 1);
  EXPECT_DOUBLE_EQ(ds.subjects[0].Z(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(ds.subjects[1].weights(0), 1.0);
}

TEST(DataModel, MissingResponseColumnNamesIt) {
  try {
    parse_csv("id,z,x1\na,1,2\nb,2,3\n", roles({"x1"}));
    FAIL() << "expected RoleError";
  } catch (const RoleError& e) {
    EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos);
  }
}

TEST(DataModel, SingleSubjectIsRejected) {
  EXPECT_THROW(parse_csv("id,y,x1\na,1,2\na,2,3\n", roles({"x1"})), ValidationError);
}

TEST(DataModel, NonNumericCellReportsRow) {
  try {
    parse_csv("id,y,x1\na,1,2\nb,oops,3\n", roles({"x1"}));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3);
  }
}

TEST(DataModel, StandardizeLinearColumn) {
  const auto ds = parse_csv("id,y,x1,s\na,0,1,-2\na,0,2,0\nb,0,3,2\n", roles({"x1"}, {"s"}));
  const auto [std_ds, rec] = standardize(ds);
  const Eigen::VectorXd x = std_ds.stacked_linear().col(0);
  EXPECT_NEAR(x.mean(), 0.0, 1e-12);
  EXPECT_NEAR((x.array() - x.mean()).square().mean(), 1.0, 1e-10);
  const Eigen::VectorXd s = std_ds.stacked_smooth().col(0);
  EXPECT_NEAR(s(0), 0.0, 1e-15);
  EXPECT_NEAR(s(1), 0.5, 1e-15);
  EXPECT_NEAR(s(2), 1.0, 1e-15);
  EXPECT_EQ(std_ds.n_obs(), ds.n_obs());
}

TEST(DataModel, ConstantColumnIsDegenerate) {
  const auto ds = parse_csv("id,y,x1\na,0,4\na,1,4\nb,0,4\n", roles({"x1"}));
  try {
    standardize(ds);
    FAIL() << "expected DegenerateCovariateError";
  } catch (const DegenerateCovariateError& e) {
    EXPECT_EQ(e.column(), "x1");
  }
}

TEST(DataModel, StandardizationRoundTrip) {
  const auto ds = fixtures::toy_panel(30, 3, 2, 11);
  const auto [std_ds, rec] = standardize(ds, true);
  const auto back = unstandardize(std_ds, rec);
  EXPECT_LT((back.stacked_linear() - ds.stacked_linear()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((back.stacked_smooth() - ds.stacked_smooth()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((back.stacked_response() - ds.stacked_response()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(back.n_obs(), ds.n_obs());
  const Eigen::MatrixXd X = std_ds.stacked_linear();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double var = (X.col(c).array() - X.col(c).mean()).square().mean();
    EXPECT_NEAR(var, 1.0, 1e-10);
  }
  const Eigen::MatrixXd S = std_ds.stacked_smooth();
  EXPECT_GE(S.minCoeff(), 0.0);
  EXPECT_LE(S.maxCoeff(), 1.0);
}
