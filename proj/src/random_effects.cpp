#include "pgamm/random_effects.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pgamm {

namespace {

constexpr double kSigmaFloor = 1e-10;
constexpr double kEtaCap = 700.0;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Prior full conditional of coordinate c: N(-sum_{j != c} P_cj u_j / P_cc, 1 / P_cc),
// P = Sigma^{-1}.
struct PriorConditionals {
  Eigen::MatrixXd P;
  Eigen::VectorXd sd;

  explicit PriorConditionals(const Eigen::MatrixXd& Sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Sigma);
    const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(kSigmaFloor);
    P = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    sd = P.diagonal().cwiseInverse().cwiseSqrt();
  }

  double mean(Eigen::Index c, const Eigen::VectorXd& u) const {
    const double dot = P.row(c).dot(u) - P(c, c) * u(c);
    return -dot / P(c, c);
  }
};

// Log-likelihood of one subject evaluated through eta; works for every family.
class EtaKernel {
 public:
  EtaKernel(const ChainTarget& target, Eigen::Index i, const Eigen::VectorXd& u)
      : target_(target), i_(i), off_(target.offsets[i]), ni_(target.offsets[i + 1] - off_) {
    eta_ = target.eta_fixed.segment(off_, ni_) + target.Z.middleRows(off_, ni_) * u;
    eta_new_.resize(ni_);
    ll_ = target.subject_loglik(i, eta_);
  }

  // ll(u + d e_c) - ll(u); caches the candidate for accept().
  double delta(Eigen::Index c, double d) {
    eta_new_ = eta_ + d * target_.Z.block(off_, c, ni_, 1);
    ll_new_ = target_.subject_loglik(i_, eta_new_);
    if (std::isnan(ll_new_) || ll_new_ == std::numeric_limits<double>::infinity()) {
      throw NumericalError("non-finite conditional log-likelihood", static_cast<long>(i_), static_cast<long>(c));
    }
    return ll_new_ - ll_;
  }

  void accept(Eigen::Index, double) {
    eta_.swap(eta_new_);
    ll_ = ll_new_;
  }

 private:
  const ChainTarget& target_;
  Eigen::Index i_, off_, ni_;
  Eigen::VectorXd eta_, eta_new_;
  double ll_ = 0.0, ll_new_ = 0.0;
};

// Gaussian log-likelihood is b'u - u'Au/2 + const with A = Z'WZ/phi and
// b = Z'W(y - eta_fixed)/phi, so a coordinate move costs O(q).
class QuadraticKernel {
 public:
  QuadraticKernel(const ChainTarget& target, Eigen::Index i, const Eigen::VectorXd& u) {
    const Eigen::Index off = target.offsets[i];
    const Eigen::Index ni = target.offsets[i + 1] - off;
    const auto Zi = target.Z.middleRows(off, ni);
    const Eigen::VectorXd w = target.weights.segment(off, ni) / target.phi;
    A_ = Zi.transpose() * w.asDiagonal() * Zi;
    b_ = Zi.transpose() * (w.array() * (target.y.segment(off, ni) - target.eta_fixed.segment(off, ni)).array()).matrix();
    Au_ = A_ * u;
  }

  double delta(Eigen::Index c, double d) const { return d * (b_(c) - Au_(c)) - 0.5 * A_(c, c) * d * d; }

  void accept(Eigen::Index c, double d) { Au_ += d * A_.col(c); }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_, Au_;
};

template <class Kernel>
void sweep_subject(Eigen::Index i, Eigen::VectorXd& u, Kernel& kernel, const PriorConditionals& prior,
                   SubjectRng& rng, Eigen::VectorXi* accepted) {
  const Eigen::Index q = u.size();
  for (Eigen::Index c = 0; c < q; ++c) {
    const double proposal = prior.mean(c, u) + prior.sd(c) * rng.gaussian();
    const double d = proposal - u(c);
    const double delta = kernel.delta(c, d);
    if (std::isnan(delta)) {
      throw NumericalError("non-finite log-likelihood ratio", static_cast<long>(i), static_cast<long>(c));
    }
    const double prob = acceptance_probability(delta);
    // Draw the uniform unconditionally so streams stay aligned.
    const double v = rng.uniform();
    if (v < prob) {
      u(c) = proposal;
      kernel.accept(c, d);
      if (accepted) ++(*accepted)(i * q + c);
    }
  }
}

template <class Kernel>
void sweep_one(Eigen::VectorXd& U, Eigen::Index i, const ChainTarget& target, const PriorConditionals& prior,
               SubjectRng& rng, Eigen::VectorXi* accepted) {
  const Eigen::Index q = prior.P.rows();
  Eigen::VectorXd u = U.segment(i * q, q);
  Kernel kernel(target, i, u);
  sweep_subject(i, u, kernel, prior, rng, accepted);
  U.segment(i * q, q) = u;
}

// Whole chain of subject i; kept draws go to row k, columns i*q..i*q+q-1.
template <class Kernel>
void chain_subject(Eigen::Index i, Eigen::VectorXd u, const ChainTarget& target, const PriorConditionals& prior,
                   SubjectRng& rng, int burn_in, int thinning, long total_sweeps, ChainDraws& out,
                   Eigen::VectorXi& accepted) {
  const Eigen::Index q = u.size();
  Kernel kernel(target, i, u);
  Eigen::Index kept = 0;
  for (long s = 1; s <= total_sweeps; ++s) {
    Eigen::VectorXi* acc = s > burn_in ? &accepted : nullptr;
    sweep_subject(i, u, kernel, prior, rng, acc);
    if (s > burn_in && (s - burn_in) % thinning == 0) out.draws.row(kept++).segment(i * q, q) = u.transpose();
  }
}

}  // namespace

void McConfig::validate() const {
  if (n_draws < 1) throw ContractError("Monte Carlo draws must be >= 1");
  if (burn_in < 0) throw ContractError("burn-in must be >= 0");
  if (thinning < 1) throw ContractError("thinning must be >= 1");
  if (!(growth >= 1.0)) throw ContractError("draw growth factor must be >= 1");
  if (max_draws < n_draws) throw ContractError("max draws must be >= initial draws");
}

void RandomEffectsModel::validate() const {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() < 1) throw DimensionError("Sigma must be square and nonempty");
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Sigma.cwiseAbs().maxCoeff())) {
    throw ContractError("Sigma must be symmetric");
  }
}

ChainDraws ChainDraws::zeros(Eigen::Index n_subjects, Eigen::Index q) {
  ChainDraws d;
  d.q = q;
  d.draws = Eigen::MatrixXd::Zero(1, n_subjects * q);
  d.acceptance_rate = Eigen::VectorXd::Zero(n_subjects * q);
  return d;
}

double ChainTarget::subject_loglik(Eigen::Index i, const Eigen::VectorXd& eta_i) const {
  const Eigen::Index off = offsets[i];
  const Eigen::Index ni = offsets[i + 1] - off;
  double total = 0.0;
  switch (family.kind()) {
    case FamilyKind::gaussian:
      for (Eigen::Index j = 0; j < ni; ++j) {
        const double r = y(off + j) - eta_i(j);
        total -= 0.5 * weights(off + j) * r * r / phi;
      }
      break;
    case FamilyKind::binomial:
      // y log mu + (w - y) log(1 - mu) = y eta - w log(1 + e^eta)
      for (Eigen::Index j = 0; j < ni; ++j) total += y(off + j) * eta_i(j) - weights(off + j) * softplus(eta_i(j));
      break;
    case FamilyKind::poisson:
      for (Eigen::Index j = 0; j < ni; ++j) {
        const double e = std::min(eta_i(j), kEtaCap);
        total += weights(off + j) * (y(off + j) * e - std::exp(e));
      }
      break;
  }
  return total;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SubjectStreams::SubjectStreams(std::uint64_t seed, const std::vector<std::string>& ids) {
  streams_.reserve(ids.size());
  for (const auto& id : ids) streams_.emplace_back(mix_seed(seed, fnv1a(id)));
}

void metropolis_sweep(Eigen::VectorXd& U, const ChainTarget& target, const RandomEffectsModel& model,
                      SubjectStreams& streams, Eigen::VectorXi* accepted) {
  const Eigen::Index n = target.n_subjects();
  const Eigen::Index q = model.q();
  if (U.size() != n * q || target.q() != q) throw DimensionError("random-effect vector does not match the target");
  if (streams.size() != n) throw DimensionError("one RNG stream per subject is required");
  const PriorConditionals prior(model.Sigma);
  const bool quadratic = target.family.kind() == FamilyKind::gaussian;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (quadratic) {
      sweep_one<QuadraticKernel>(U, i, target, prior, streams[i], accepted);
    } else {
      sweep_one<EtaKernel>(U, i, target, prior, streams[i], accepted);
    }
  }
}

ChainDraws run_chain(const ChainTarget& target, const RandomEffectsModel& model, int n_draws, int burn_in,
                     int thinning, std::uint64_t seed, const Eigen::VectorXd& start) {
  if (n_draws < 1) throw ContractError("run_chain needs n_draws >= 1");
  if (burn_in < 0 || thinning < 1) throw ContractError("run_chain needs burn_in >= 0 and thinning >= 1");
  model.validate();
  const Eigen::Index n = target.n_subjects();
  const Eigen::Index q = model.q();
  if (target.q() != q) throw DimensionError("Z columns do not match Sigma");
  if (start.size() != 0 && start.size() != n * q) throw DimensionError("chain start has the wrong length");

  ChainDraws out;
  out.q = q;
  out.burn_in = burn_in;
  out.thinning = thinning;
  out.seed = seed;
  out.draws.resize(n_draws, n * q);
  Eigen::VectorXi accepted = Eigen::VectorXi::Zero(n * q);

  const PriorConditionals prior(model.Sigma);
  SubjectStreams streams(seed, target.ids);
  const long total_sweeps = static_cast<long>(burn_in) + static_cast<long>(n_draws) * thinning;

  // Subjects are conditionally independent, so running each subject's chain
  // to completion equals interleaved full sweeps with the same streams.
  const bool quadratic = target.family.kind() == FamilyKind::gaussian;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd u = start.size() ? Eigen::VectorXd(start.segment(i * q, q)) : Eigen::VectorXd::Zero(q);
    if (quadratic) {
      chain_subject<QuadraticKernel>(i, u, target, prior, streams[i], burn_in, thinning, total_sweeps, out, accepted);
    } else {
      chain_subject<EtaKernel>(i, u, target, prior, streams[i], burn_in, thinning, total_sweeps, out, accepted);
    }
  }
  const double post = static_cast<double>(total_sweeps - burn_in);
  out.acceptance_rate = accepted.cast<double>() / std::max(1.0, post);
  return out;
}

Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& M, double floor) {
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.eigenvalues().minCoeff() >= floor) return S;
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd update_sigma(const ChainDraws& draws) {
  const Eigen::Index N = draws.n_draws();
  const Eigen::Index n = draws.n_subjects();
  const Eigen::Index q = draws.q;
  if (N < 1 || n < 1) throw ContractError("update_sigma needs at least one draw and one subject");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index k = 0; k < N; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd u = draws.draws.row(k).segment(i * q, q).transpose();
      acc.noalias() += u * u.transpose();
    }
  }
  acc /= static_cast<double>(n * N);
  return clip_eigenvalues(acc, kSigmaFloor);
}

}  // namespace pgamm
