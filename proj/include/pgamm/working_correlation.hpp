#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace pgamm {

enum class CorrStructure { independent, exchangeable, ar1 };

CorrStructure corr_structure_from_name(const std::string& name);  // "ind", "ex", "ar1"
std::string corr_structure_name(CorrStructure s);

struct CorrelationSpec {
  CorrStructure structure = CorrStructure::independent;
  double rho = 0.0;
};

/// Open interval of admissible rho for the structure and the largest
/// cluster size.
std::pair<double, double> rho_bounds(CorrStructure structure, Eigen::Index m_max);

/// Moves rho inside rho_bounds with a 1e-6 margin.
double clamp_rho(double rho, CorrStructure structure, Eigen::Index m_max);

/// R(rho) for a cluster of size m. Throws ParameterError when rho is out of
/// range for (structure, m).
Eigen::MatrixXd correlation_matrix(const CorrelationSpec& spec, Eigen::Index m);

/// Closed-form inverse of R(rho).
Eigen::MatrixXd inverse_correlation(const CorrelationSpec& spec, Eigen::Index m);

/// Moment estimate of rho from per-subject Pearson residuals. `phi` <= 0
/// selects the Pearson scale matching the residuals themselves, which makes
/// the estimate invariant to rescaling of the residuals.
double estimate_rho(const std::vector<Eigen::VectorXd>& pearson_residuals, CorrStructure structure,
                    double phi = -1.0);

/// Inverse correlation matrices for every cluster size up to m_max at a fixed
/// rho; the solver rebuilds it whenever rho changes.
class InverseCorrelationCache {
 public:
  InverseCorrelationCache() = default;
  InverseCorrelationCache(const CorrelationSpec& spec, Eigen::Index m_max);

  const Eigen::MatrixXd& inverse(Eigen::Index m) const { return inverses_.at(static_cast<std::size_t>(m)); }
  const Eigen::MatrixXd& correlation(Eigen::Index m) const {
    return matrices_.at(static_cast<std::size_t>(m));
  }
  const CorrelationSpec& spec() const { return spec_; }

 private:
  CorrelationSpec spec_;
  std::vector<Eigen::MatrixXd> matrices_;
  std::vector<Eigen::MatrixXd> inverses_;
};

}  // namespace pgamm
