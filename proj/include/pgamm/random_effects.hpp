#pragma once

#include "pgamm/errors.hpp"
#include "pgamm/exponential_family.hpp"

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace pgamm {

/// Sampler schedule. n_draws is the size at the first outer iteration; the
/// solver grows it by `growth` per iteration up to `max_draws`.
struct McConfig {
  int n_draws = 100;
  int burn_in = 200;
  int thinning = 5;
  double growth = 1.3;
  int max_draws = 2000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// u_i ~ N(0, Sigma), independent across subjects.
struct RandomEffectsModel {
  Eigen::MatrixXd Sigma;

  Eigen::Index q() const { return Sigma.rows(); }
  void validate() const;
};

/// Retained draws of the stacked U = (u_1, ..., u_n). Row k is draw k; subject
/// i occupies columns [i*q, (i+1)*q).
struct ChainDraws {
  Eigen::MatrixXd draws;
  Eigen::VectorXd acceptance_rate;  // per coordinate
  Eigen::Index q = 1;
  int burn_in = 0;
  int thinning = 1;
  std::uint64_t seed = 0;

  Eigen::Index n_draws() const { return draws.rows(); }
  Eigen::Index n_subjects() const { return q == 0 ? 0 : draws.cols() / q; }
  auto subject(Eigen::Index k, Eigen::Index i) const { return draws.row(k).segment(i * q, q).transpose(); }
  double mean_acceptance() const { return acceptance_rate.size() ? acceptance_rate.mean() : 1.0; }

  /// A single all-zero draw: random effects switched off.
  static ChainDraws zeros(Eigen::Index n_subjects, Eigen::Index q);
};

/// Conditional likelihood inputs of every subject at a fixed theta.
struct ChainTarget {
  Family family = Family::gaussian();
  double phi = 1.0;
  std::vector<std::string> ids;
  std::vector<Eigen::Index> offsets;  // n + 1 row offsets
  Eigen::VectorXd y;                  // raw response (counts for binomial)
  Eigen::VectorXd weights;
  Eigen::MatrixXd Z;                  // stacked N x q
  Eigen::VectorXd eta_fixed;          // D theta, stacked

  Eigen::Index n_subjects() const { return static_cast<Eigen::Index>(ids.size()); }
  Eigen::Index q() const { return Z.cols(); }
  /// log p(y_i | u_i) up to terms free of u_i.
  double subject_loglik(Eigen::Index i, const Eigen::VectorXd& eta_i) const;
};

/// min(1, exp(delta)) without evaluating exp of a positive argument.
inline double acceptance_probability(double delta_loglik) {
  if (std::isnan(delta_loglik)) throw NumericalError("NaN log-likelihood ratio", -1, -1);
  if (delta_loglik >= 0.0) return 1.0;
  return std::exp(delta_loglik);
}

/// One RNG per subject, keyed by (seed, subject id) so a subject's stream does
/// not depend on its position in the dataset.
/// xoshiro256++ seeded through splitmix64. Several times faster than
/// mt19937_64, which matters because the sampler draws two variates per
/// proposal.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed) {
    for (auto& w : s_) {
      seed += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      w = z ^ (z >> 31);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t out = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Engine plus normal generator; the generator keeps its spare variate, so
/// the stream is only reproducible when consumed through this object.
struct SubjectRng {
  Xoshiro256pp engine;
  boost::random::normal_distribution<double> normal{0.0, 1.0};  // ziggurat
  std::uniform_real_distribution<double> unif{0.0, 1.0};

  explicit SubjectRng(std::uint64_t seed) : engine(seed) {}
  double gaussian() { return normal(engine); }
  double uniform() { return unif(engine); }
};

class SubjectStreams {
 public:
  SubjectStreams(std::uint64_t seed, const std::vector<std::string>& ids);
  SubjectRng& operator[](Eigen::Index i) { return streams_[static_cast<std::size_t>(i)]; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(streams_.size()); }

 private:
  std::vector<SubjectRng> streams_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// One coordinate-wise sweep over all subjects. Each u_ic is proposed from its
/// prior conditional given the other coordinates of u_i and accepted with the
/// likelihood ratio. `accepted`, when given, is incremented per coordinate.
void metropolis_sweep(Eigen::VectorXd& U, const ChainTarget& target, const RandomEffectsModel& model,
                      SubjectStreams& streams, Eigen::VectorXi* accepted = nullptr);

/// burn_in sweeps, then every `thinning`-th sweep until n_draws are kept.
/// `start`, when non-empty, is the initial stacked U (otherwise zeros).
ChainDraws run_chain(const ChainTarget& target, const RandomEffectsModel& model, int n_draws, int burn_in,
                     int thinning, std::uint64_t seed, const Eigen::VectorXd& start = Eigen::VectorXd());

/// (1/(nN)) sum_k sum_i u_i u_i^T with eigenvalues clipped at 1e-10.
Eigen::MatrixXd update_sigma(const ChainDraws& draws);

/// Eigenvalue floor repair of a symmetric matrix.
Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& M, double floor);

/// Mean of f over the retained draws; f receives the stacked U of one draw.
template <class F>
auto mc_expectation(const ChainDraws& draws, F&& f) {
  using Result = std::decay_t<decltype(f(Eigen::VectorXd(draws.draws.row(0).transpose())))>;
  if (draws.n_draws() < 1) throw ContractError("mc_expectation needs at least one draw");
  Result acc{};
  for (Eigen::Index k = 0; k < draws.n_draws(); ++k) {
    Result v = f(Eigen::VectorXd(draws.draws.row(k).transpose()));
    bool finite;
    if constexpr (std::is_arithmetic_v<Result>) {
      finite = std::isfinite(v);
    } else {
      finite = v.allFinite();
    }
    if (!finite) throw NumericalError("non-finite Monte Carlo functional", -1, static_cast<long>(k));
    if (k == 0) {
      acc = v;
    } else {
      acc += v;
    }
  }
  if constexpr (std::is_arithmetic_v<Result>) {
    return acc / static_cast<double>(draws.n_draws());
  } else {
    Result out = acc / static_cast<double>(draws.n_draws());
    return out;
  }
}

}  // namespace pgamm
