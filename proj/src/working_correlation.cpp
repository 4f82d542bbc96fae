#include "pgamm/working_correlation.hpp"

#include "pgamm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pgamm {

namespace {
constexpr double kRhoMargin = 1e-6;
}

CorrStructure corr_structure_from_name(const std::string& name) {
  if (name == "ind" || name == "independent") return CorrStructure::independent;
  if (name == "ex" || name == "exchangeable") return CorrStructure::exchangeable;
  if (name == "ar1" || name == "AR1" || name == "ar-1") return CorrStructure::ar1;
  throw ContractError("unknown correlation structure '" + name + "' (expected ind, ex or ar1)");
}

std::string corr_structure_name(CorrStructure s) {
  switch (s) {
    case CorrStructure::independent: return "ind";
    case CorrStructure::exchangeable: return "ex";
    case CorrStructure::ar1: return "ar1";
  }
  return "ind";
}

std::pair<double, double> rho_bounds(CorrStructure structure, Eigen::Index m_max) {
  switch (structure) {
    case CorrStructure::independent:
      return {0.0, 0.0};
    case CorrStructure::exchangeable:
      if (m_max <= 1) return {-1.0, 1.0};
      return {-1.0 / static_cast<double>(m_max - 1), 1.0};
    case CorrStructure::ar1:
      return {-1.0, 1.0};
  }
  return {0.0, 0.0};
}

double clamp_rho(double rho, CorrStructure structure, Eigen::Index m_max) {
  if (structure == CorrStructure::independent) return 0.0;
  const auto [lo, hi] = rho_bounds(structure, m_max);
  return std::clamp(rho, lo + kRhoMargin, hi - kRhoMargin);
}

namespace {

void check_rho(const CorrelationSpec& spec, Eigen::Index m) {
  if (spec.structure == CorrStructure::independent) return;
  const auto [lo, hi] = rho_bounds(spec.structure, m);
  if (!(spec.rho > lo && spec.rho < hi)) {
    throw ParameterError("rho = " + std::to_string(spec.rho) + " outside (" + std::to_string(lo) + ", " +
                         std::to_string(hi) + ") for " + corr_structure_name(spec.structure));
  }
}

}  // namespace

Eigen::MatrixXd correlation_matrix(const CorrelationSpec& spec, Eigen::Index m) {
  check_rho(spec, m);
  switch (spec.structure) {
    case CorrStructure::independent:
      return Eigen::MatrixXd::Identity(m, m);
    case CorrStructure::exchangeable: {
      Eigen::MatrixXd R = Eigen::MatrixXd::Constant(m, m, spec.rho);
      R.diagonal().setOnes();
      return R;
    }
    case CorrStructure::ar1: {
      Eigen::MatrixXd R(m, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index k = 0; k < m; ++k) {
          R(j, k) = std::pow(spec.rho, static_cast<double>(std::abs(j - k)));
        }
      }
      return R;
    }
  }
  return Eigen::MatrixXd::Identity(m, m);
}

Eigen::MatrixXd inverse_correlation(const CorrelationSpec& spec, Eigen::Index m) {
  check_rho(spec, m);
  const double rho = spec.rho;
  switch (spec.structure) {
    case CorrStructure::independent:
      return Eigen::MatrixXd::Identity(m, m);
    case CorrStructure::exchangeable: {
      // (1-rho)^{-1} [I - rho / (1 + (m-1) rho) J]
      const double c = rho / (1.0 + static_cast<double>(m - 1) * rho);
      Eigen::MatrixXd Ri = Eigen::MatrixXd::Constant(m, m, -c);
      Ri.diagonal().array() += 1.0;
      return Ri / (1.0 - rho);
    }
    case CorrStructure::ar1: {
      // tridiagonal
      Eigen::MatrixXd Ri = Eigen::MatrixXd::Zero(m, m);
      const double s = 1.0 / (1.0 - rho * rho);
      for (Eigen::Index j = 0; j < m; ++j) {
        Ri(j, j) = (j == 0 || j == m - 1) ? s : (1.0 + rho * rho) * s;
        if (j + 1 < m) Ri(j, j + 1) = Ri(j + 1, j) = -rho * s;
      }
      if (m == 1) Ri(0, 0) = 1.0;
      return Ri;
    }
  }
  return Eigen::MatrixXd::Identity(m, m);
}

double estimate_rho(const std::vector<Eigen::VectorXd>& pearson_residuals, CorrStructure structure, double phi) {
  if (structure == CorrStructure::independent) return 0.0;

  Eigen::Index m_max = 0;
  double sum_sq = 0.0;
  long n_obs = 0;
  for (const auto& r : pearson_residuals) {
    m_max = std::max(m_max, r.size());
    sum_sq += r.squaredNorm();
    n_obs += r.size();
  }
  if (m_max < 2) throw EstimationError("rho needs at least one subject with two or more observations");
  if (phi <= 0.0) phi = sum_sq / static_cast<double>(n_obs);
  if (!(phi > 0.0)) return clamp_rho(0.0, structure, m_max);

  double cross = 0.0;
  double pairs = 0.0;
  for (const auto& r : pearson_residuals) {
    const Eigen::Index ni = r.size();
    if (structure == CorrStructure::exchangeable) {
      // sum_{j<k} r_j r_k = ((sum r)^2 - sum r^2) / 2
      const double s = r.sum();
      cross += 0.5 * (s * s - r.squaredNorm());
      pairs += 0.5 * static_cast<double>(ni * (ni - 1));
    } else {
      for (Eigen::Index j = 0; j + 1 < ni; ++j) cross += r(j) * r(j + 1);
      pairs += static_cast<double>(std::max<Eigen::Index>(ni - 1, 0));
    }
  }
  return clamp_rho(cross / (phi * pairs), structure, m_max);
}

InverseCorrelationCache::InverseCorrelationCache(const CorrelationSpec& spec, Eigen::Index m_max) : spec_(spec) {
  matrices_.resize(static_cast<std::size_t>(m_max) + 1);
  inverses_.resize(static_cast<std::size_t>(m_max) + 1);
  for (Eigen::Index m = 1; m <= m_max; ++m) {
    matrices_[m] = correlation_matrix(spec, m);
    inverses_[m] = inverse_correlation(spec, m);
  }
}

}  // namespace pgamm
