#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pgamm {

/// Observations of a single subject (cluster). Row order is time order.
struct SubjectBlock {
  std::string id;
  Eigen::VectorXd y;
  Eigen::MatrixXd X_linear;  // n_i x p
  Eigen::MatrixXd X_smooth;  // n_i x r
  Eigen::MatrixXd Z;         // n_i x q, random-effect design
  Eigen::VectorXd weights;   // prior weights, binomial denominators

  Eigen::Index size() const { return y.size(); }
};

/// A validated collection of subjects sharing one covariate layout.
struct LongitudinalDataset {
  std::vector<SubjectBlock> subjects;
  std::vector<std::string> linear_names;
  std::vector<std::string> smooth_names;
  int random_effect_dim = 1;

  Eigen::Index n_subjects() const { return static_cast<Eigen::Index>(subjects.size()); }
  Eigen::Index n_obs() const;
  Eigen::Index p() const { return static_cast<Eigen::Index>(linear_names.size()); }
  Eigen::Index r() const { return static_cast<Eigen::Index>(smooth_names.size()); }
  Eigen::Index q() const { return random_effect_dim; }
  Eigen::Index max_cluster_size() const;

  /// Starting row of every subject in the stacked (subject-major) layout,
  /// plus a final entry equal to n_obs().
  std::vector<Eigen::Index> row_offsets() const;

  Eigen::MatrixXd stacked_linear() const;
  Eigen::MatrixXd stacked_smooth() const;
  Eigen::VectorXd stacked_response() const;

  /// Throws ValidationError on any broken invariant.
  void validate() const;
};

/// Maps CSV columns onto dataset roles. An empty random_effect list means a
/// random intercept.
struct ColumnRoleConfig {
  std::string subject_id;
  std::string response;
  std::vector<std::string> linear;
  std::vector<std::string> smooth;
  std::vector<std::string> random_effect;
  std::optional<std::string> weight;
};

LongitudinalDataset load_csv(const std::string& path, const ColumnRoleConfig& config);

/// Same as load_csv but reads from an in-memory buffer.
LongitudinalDataset parse_csv(const std::string& text, const ColumnRoleConfig& config);

/// Everything needed to map standardized quantities back to the input scale.
struct StandardizationRecord {
  Eigen::VectorXd linear_mean;
  Eigen::VectorXd linear_scale;  // population standard deviation
  Eigen::VectorXd smooth_min;
  Eigen::VectorXd smooth_range;
  double response_center = 0.0;

  double linear_to_original(Eigen::Index column, double standardized) const {
    return standardized * linear_scale(column) + linear_mean(column);
  }
  double smooth_to_original(Eigen::Index column, double unit) const {
    return unit * smooth_range(column) + smooth_min(column);
  }
  double smooth_to_unit(Eigen::Index column, double original) const {
    return (original - smooth_min(column)) / smooth_range(column);
  }
  /// Coefficient of a standardized column expressed per unit of the
  /// original covariate.
  double beta_to_original(Eigen::Index column, double beta_std) const {
    return beta_std / linear_scale(column);
  }
};

/// Z-scores linear covariates (population variance 1), maps smooth
/// covariates onto [0,1]. When `center_response` is set the response is
/// centered at its grand mean as well (used for Gaussian fits, whose model
/// carries no intercept).
std::pair<LongitudinalDataset, StandardizationRecord> standardize(const LongitudinalDataset& ds,
                                                                  bool center_response = false);

/// Inverse of standardize on the covariate blocks and response.
LongitudinalDataset unstandardize(const LongitudinalDataset& ds, const StandardizationRecord& rec);

/// Keeps only the listed linear and smooth columns (in the given order).
LongitudinalDataset select_columns(const LongitudinalDataset& ds, const std::vector<int>& linear,
                                   const std::vector<int>& smooth);

}  // namespace pgamm
