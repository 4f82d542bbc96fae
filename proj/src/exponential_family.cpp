#include "pgamm/exponential_family.hpp"

#include "pgamm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pgamm {

namespace {
constexpr double kEtaCap = 700.0;
}

Family Family::gaussian(bool estimate_dispersion) {
  return Family(FamilyKind::gaussian, Link::identity, estimate_dispersion);
}
Family Family::binomial() { return Family(FamilyKind::binomial, Link::logit, false); }
Family Family::poisson() { return Family(FamilyKind::poisson, Link::log, false); }

Family Family::from_name(const std::string& name) {
  if (name == "gaussian") return gaussian();
  if (name == "binomial") return binomial();
  if (name == "poisson") return poisson();
  throw ContractError("unknown family '" + name + "' (expected gaussian, binomial or poisson)");
}

std::string Family::name() const {
  switch (kind_) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::binomial: return "binomial";
    case FamilyKind::poisson: return "poisson";
  }
  return "unknown";
}

double Family::mean(double eta) const {
  switch (link_) {
    case Link::identity:
      return eta;
    case Link::logit: {
      double mu;
      if (eta >= 0.0) {
        mu = 1.0 / (1.0 + std::exp(-eta));
      } else {
        const double e = std::exp(eta);
        mu = e / (1.0 + e);
      }
      return std::clamp(mu, kMuFloor, 1.0 - kMuFloor);
    }
    case Link::log:
      return std::max(kMuFloor, std::exp(std::min(eta, kEtaCap)));
  }
  return eta;
}

Eigen::VectorXd Family::mean(const Eigen::VectorXd& eta) const {
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) mu(k) = mean(eta(k));
  return mu;
}

double Family::link_fn(double mu) const {
  check_mean(mu);
  switch (link_) {
    case Link::identity: return mu;
    case Link::logit: return std::log(mu / (1.0 - mu));
    case Link::log: return std::log(mu);
  }
  return mu;
}

double Family::mean_derivative(double eta) const {
  switch (link_) {
    case Link::identity:
      return 1.0;
    case Link::logit: {
      const double e = std::exp(-std::abs(eta));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case Link::log:
      return std::exp(std::min(eta, kEtaCap));
  }
  return 1.0;
}

void Family::check_mean(double mu) const {
  const bool ok = [&] {
    switch (kind_) {
      case FamilyKind::gaussian: return std::isfinite(mu);
      case FamilyKind::binomial: return mu > 0.0 && mu < 1.0;
      case FamilyKind::poisson: return mu > 0.0 && std::isfinite(mu);
    }
    return false;
  }();
  if (!ok) throw DomainError("mean " + std::to_string(mu) + " outside the " + name() + " domain");
}

double Family::unit_variance(double mu) const {
  check_mean(mu);
  switch (kind_) {
    case FamilyKind::gaussian: return 1.0;
    case FamilyKind::binomial: return mu * (1.0 - mu);
    case FamilyKind::poisson: return mu;
  }
  return 1.0;
}

Eigen::VectorXd Family::variance(const Eigen::VectorXd& mu, double phi, const Eigen::VectorXd& weights) const {
  if (mu.size() != weights.size()) throw DimensionError("mean and weight vectors differ in length");
  Eigen::VectorXd v(mu.size());
  for (Eigen::Index k = 0; k < mu.size(); ++k) v(k) = phi * unit_variance(mu(k)) / weights(k);
  return v;
}

double Family::log_density(double y, double mu, double phi, double weight) const {
  switch (kind_) {
    case FamilyKind::gaussian: {
      const double var = phi / weight;
      const double r = y - mu;
      return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
    }
    case FamilyKind::binomial: {
      if (!(y >= 0.0 && y <= weight)) {
        throw SupportError("binomial response " + std::to_string(y) + " outside [0, " + std::to_string(weight) + "]");
      }
      const double log_choose = std::lgamma(weight + 1.0) - std::lgamma(y + 1.0) - std::lgamma(weight - y + 1.0);
      double ll = log_choose;
      if (y > 0.0) ll += y * std::log(mu);
      if (weight - y > 0.0) ll += (weight - y) * std::log1p(-mu);
      return ll;
    }
    case FamilyKind::poisson: {
      if (!(y >= 0.0)) throw SupportError("poisson response " + std::to_string(y) + " is negative");
      return weight * (y * std::log(mu) - mu) - std::lgamma(y + 1.0);
    }
  }
  return 0.0;
}

double Family::conditional_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi,
                                  const Eigen::VectorXd& weights) const {
  if (y.size() != mu.size() || y.size() != weights.size()) {
    throw DimensionError("response, mean and weight vectors differ in length");
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < y.size(); ++k) total += log_density(y(k), mu(k), phi, weights(k));
  return total;
}

double estimate_dispersion(const Eigen::VectorXd& pearson_residuals, long dof) {
  if (dof <= 0) throw EstimationError("dispersion needs positive residual degrees of freedom");
  return pearson_residuals.squaredNorm() / static_cast<double>(dof);
}

}  // namespace pgamm
