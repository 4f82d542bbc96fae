#pragma once

#include <Eigen/Dense>

#include <string>

namespace pgamm {

enum class FamilyKind { gaussian, binomial, poisson };
enum class Link { identity, logit, log };

/// Canonical-link exponential family. Binomial responses are counts out of
/// the prior weight (the denominator); the mean mu is a probability.
class Family {
 public:
  /// Logit means are clamped into [kMuFloor, 1 - kMuFloor].
  static constexpr double kMuFloor = 1e-12;

  static Family gaussian(bool estimate_dispersion = true);
  static Family binomial();
  static Family poisson();
  static Family from_name(const std::string& name);

  FamilyKind kind() const { return kind_; }
  Link link() const { return link_; }
  bool estimates_dispersion() const { return estimate_dispersion_; }
  std::string name() const;

  double mean(double eta) const;
  Eigen::VectorXd mean(const Eigen::VectorXd& eta) const;
  double link_fn(double mu) const;
  /// d mu / d eta.
  double mean_derivative(double eta) const;
  /// Unit variance nu(mu).
  double unit_variance(double mu) const;
  /// phi * nu(mu) / weight, elementwise.
  Eigen::VectorXd variance(const Eigen::VectorXd& mu, double phi, const Eigen::VectorXd& weights) const;

  /// Response on the mean scale (count / denominator for binomial).
  double response_scale(double y, double weight) const {
    return kind_ == FamilyKind::binomial ? y / weight : y;
  }

  /// Log density of one observation. Throws SupportError off-support.
  double log_density(double y, double mu, double phi, double weight) const;
  double conditional_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi,
                            const Eigen::VectorXd& weights) const;

  void check_mean(double mu) const;

 private:
  Family(FamilyKind kind, Link link, bool estimate) : kind_(kind), link_(link), estimate_dispersion_(estimate) {}

  FamilyKind kind_;
  Link link_;
  bool estimate_dispersion_;
};

/// Pearson estimate sum(r^2) / dof.
double estimate_dispersion(const Eigen::VectorXd& pearson_residuals, long dof);

}  // namespace pgamm
