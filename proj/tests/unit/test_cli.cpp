#include "pgamm/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = pgamm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pgamm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    // small simulated dataset plus its truth
    const Outcome r = run({"simulate", "--example", "1", "--n", "30", "--reps", "1", "--estimator", "truth", "--write-data",
                       "--log-level", "quiet", "--out", (dir_ / "sim").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    data_ = (dir_ / "sim" / "data.csv").string();
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::string> fit_args(const std::string& out) const {
    return {"fit", "--data", data_, "--linear", "x1,x2,x3,x4", "--smooth", "z1,z2", "--lambda", "0.2",
            "--mc-draws", "20", "--max-draws", "40", "--burnin", "20", "--seed", "5", "--log-level", "quiet",
            "--out", (dir_ / out).string()};
  }

  fs::path dir_;
  std::string data_;
};

}  // namespace

TEST_F(CliTest, MissingDataFlag) {
  const Outcome r = run({"fit", "--linear", "x1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--data"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, FitWritesParsableDocument) {
  const Outcome r = run(fit_args("fit"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(slurp(dir_ / "fit" / "fit.json"));
  EXPECT_EQ(doc.at("version"), "pgamm 0.1.0");
  EXPECT_EQ(doc.at("seed"), 5);
  EXPECT_EQ(doc.at("config").at("lambda"), 0.2);
  EXPECT_EQ(doc.at("fit").at("beta").size(), 4u);
  EXPECT_EQ(doc.at("fit").at("components").at(0).at("g_hat").size(), 201u);
  EXPECT_EQ(json::parse(doc.dump()), doc);
  EXPECT_TRUE(fs::exists(dir_ / "fit" / "summary.txt"));
}

TEST_F(CliTest, ZeroIterationsExitsTwo) {
  auto args = fit_args("cap");
  args.insert(args.end(), {"--max-iter", "0"});
  EXPECT_EQ(run(args).code, 2);
}

TEST_F(CliTest, EmptyGridIsAnError) {
  auto args = fit_args("tune");
  args[0] = "tune";
  args.insert(args.end(), {"--grid", ""});
  const Outcome r = run(args);
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, SingletonGridMatchesFit) {
  ASSERT_EQ(run(fit_args("fit")).code, 0);
  auto args = fit_args("tune");
  args[0] = "tune";
  args.insert(args.end(), {"--grid", "0.2"});
  const Outcome r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const json f = json::parse(slurp(dir_ / "fit" / "fit.json"));
  const json t = json::parse(slurp(dir_ / "tune" / "fit.json"));
  EXPECT_EQ(f.at("fit"), t.at("fit"));
  const json g = json::parse(slurp(dir_ / "tune" / "gcv.json"));
  EXPECT_EQ(g.at("gcv").at("points").size(), 1u);
  EXPECT_EQ(g.at("gcv").at("lambda_opt"), 0.2);
}

TEST_F(CliTest, ConfigFileDefaultsAndFlagPrecedence) {
  {
    std::ofstream cfg(dir_ / "cfg.json");
    cfg << R"({"lambda": "5", "corr": "ind", "linear": ["x1", "x2"]})";
  }
  auto args = fit_args("cfg");
  // --linear and --lambda on the command line win; corr comes from the file
  args.insert(args.end(), {"--config", (dir_ / "cfg.json").string()});
  ASSERT_EQ(run(args).code, 0);
  const json doc = json::parse(slurp(dir_ / "cfg" / "fit.json"));
  EXPECT_EQ(doc.at("config").at("lambda"), 0.2);
  EXPECT_EQ(doc.at("config").at("corr"), "ind");
  EXPECT_EQ(doc.at("fit").at("beta").size(), 4u);

  {
    std::ofstream cfg(dir_ / "bad.json");
    cfg << R"({"no-such-flag": 1})";
  }
  auto bad = fit_args("bad");
  bad.insert(bad.end(), {"--config", (dir_ / "bad.json").string()});
  EXPECT_EQ(run(bad).code, 1);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  ASSERT_EQ(run(fit_args("a")).code, 0);
  ASSERT_EQ(run(fit_args("b")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "fit.json"), slurp(dir_ / "b" / "fit.json"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.txt"), slurp(dir_ / "b" / "summary.txt"));
  for (const char* sub : {"s1", "s2"}) {
    ASSERT_EQ(run({"simulate", "--example", "1", "--n", "30", "--reps", "1", "--seed", "7", "--lambda", "0.3",
                   "--mc-draws", "20", "--max-draws", "40", "--burnin", "20", "--log-level", "quiet", "--out",
                   (dir_ / sub).string()})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(dir_ / "s1" / "aggregate.csv"), slurp(dir_ / "s2" / "aggregate.csv"));
  EXPECT_EQ(slurp(dir_ / "s1" / "replications.json"), slurp(dir_ / "s2" / "replications.json"));
}

TEST_F(CliTest, EvaluateAgainstTruth) {
  const fs::path truth = dir_ / "sim" / "truth.json";
  // a fit document built from the truth itself scores zero
  const json t = json::parse(slurp(truth));
  json fit;
  json beta = json::array();
  for (const auto& b : t.at("beta")) beta.push_back({{"estimate", b}});
  json comps = json::array();
  for (const auto& c : t.at("components")) comps.push_back({{"g_hat", c.at("g")}});
  fit["fit"] = {{"beta", beta}, {"components", comps}};
  std::ofstream(dir_ / "perfect.json") << fit.dump();
  const Outcome ok = run({"evaluate", "--fit", (dir_ / "perfect.json").string(), "--truth", truth.string(), "--out",
                      (dir_ / "eval").string()});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const json ev = json::parse(slurp(dir_ / "eval" / "evaluation.json"));
  EXPECT_EQ(ev.at("metrics").at("mse"), 0.0);
  EXPECT_EQ(ev.at("metrics").at("c_fit"), 1.0);

  fit["fit"]["beta"].erase(0);
  std::ofstream(dir_ / "short.json") << fit.dump();
  const Outcome bad = run({"evaluate", "--fit", (dir_ / "short.json").string(), "--truth", truth.string(), "--out",
                       (dir_ / "eval2").string()});
  EXPECT_EQ(bad.code, 1);
}
