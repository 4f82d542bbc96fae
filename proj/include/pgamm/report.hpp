#pragma once

#include "pgamm/data_model.hpp"
#include "pgamm/pgee_solver.hpp"
#include "pgamm/sandwich.hpp"
#include "pgamm/sim_harness.hpp"
#include "pgamm/spline_basis.hpp"
#include "pgamm/tuning_gcv.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pgamm {

inline constexpr const char* kVersion = "pgamm 0.1.0";
inline constexpr int kComponentGridPoints = 201;

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& m);
nlohmann::json to_json(const GcvReport& report);
nlohmann::json to_json(const MetricsReport& metrics);
nlohmann::json to_json(const ReplicationRecord& record);
nlohmann::json to_json(const std::vector<IterationRecord>& trace);

Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// Everything fit.json reports about one fitted model.
struct FitArtifacts {
  const FitState* state = nullptr;
  const BasisSet* basis = nullptr;
  const StandardizationRecord* standardization = nullptr;
  std::vector<std::string> linear_names;
  std::vector<std::string> smooth_names;
  std::optional<SandwichResult> sandwich;
  std::string sandwich_error;
};

/// Coefficients on the original covariate scale and each g_hat on a
/// 201-point grid spanning the observed covariate range.
nlohmann::json fit_to_json(const FitArtifacts& fit);

/// Original-scale grid of smooth covariate k used by fit_to_json.
Eigen::VectorXd component_grid(const StandardizationRecord& rec, Eigen::Index k);

std::string gcv_csv(const GcvReport& report);

std::string aggregate_csv_header();
std::string aggregate_csv_row(int example, const std::string& estimator, const std::string& corr, int degree, int n,
                              int reps, const MetricsReport& m);

}  // namespace pgamm
