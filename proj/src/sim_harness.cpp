#include "pgamm/sim_harness.hpp"

#include "pgamm/errors.hpp"
#include "pgamm/random_effects.hpp"
#include "pgamm/spline_basis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace pgamm {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) v[k] = k;
  return v;
}

Eigen::VectorXd aise_grid(const HarnessConfig& cfg) {
  if (cfg.aise_points < 1 || !(cfg.aise_lo <= cfg.aise_hi)) throw ContractError("invalid AISE grid");
  if (cfg.aise_points == 1) return Eigen::VectorXd::Constant(1, cfg.aise_lo);
  return Eigen::VectorXd::LinSpaced(cfg.aise_points, cfg.aise_lo, cfg.aise_hi);
}

// Truth on the grid, shifted by its mean over the training covariate values so
// it matches the centering of the fitted components.
Eigen::VectorXd centered_truth(const SimDesign& d, const SimData& sim, int k, const Eigen::VectorXd& grid) {
  const int id = d.g_ids[k];
  Eigen::VectorXd out(grid.size());
  if (id == 0) return out.setZero();
  double mean = 0.0;
  long count = 0;
  for (const auto& s : sim.data.subjects) {
    for (Eigen::Index j = 0; j < s.size(); ++j) mean += true_function(id, s.X_smooth(j, k));
    count += s.size();
  }
  mean /= static_cast<double>(count);
  for (Eigen::Index g = 0; g < grid.size(); ++g) out(g) = true_function(id, grid(g)) - mean;
  return out;
}

}  // namespace

Example example_from_number(int number) {
  switch (number) {
    case 1: return Example::ex1_gaussian_moderate;
    case 2: return Example::ex2_gaussian_highdim;
    case 3: return Example::ex3_binary;
  }
  throw ContractError("example must be 1, 2 or 3");
}

int example_number(Example ex) {
  switch (ex) {
    case Example::ex1_gaussian_moderate: return 1;
    case Example::ex2_gaussian_highdim: return 2;
    case Example::ex3_binary: return 3;
  }
  return 1;
}

double true_function(int id, double x) {
  constexpr double pi = std::numbers::pi;
  switch (id) {
    case 0: return 0.0;
    case 1: return (2.0 * x - 1.0) * (2.0 * x - 1.0);
    case 2: return 8.0 * std::pow(x - 0.5, 3);
    case 3: return std::sin(2.0 * pi * x);
    // binary design; id 11 integrates to zero on [0,1]
    case 11: return std::exp(x + 1.0) - (std::exp(2.0) - std::exp(1.0));
    case 12: return std::cos(2.0 * pi * x) / 4.0;
    case 13: return x * (1.0 - x) - 1.0 / 6.0;
    case 14: return 2.0 * std::pow(x - 0.5, 3);
  }
  throw ContractError("unknown test function id " + std::to_string(id));
}

SimDesign SimDesign::make(Example ex, int n, std::uint64_t seed) {
  SimDesign d;
  d.example = ex;
  d.seed = seed;
  d.p_linear = 10;
  d.true_beta = Eigen::VectorXd::Zero(10);
  d.true_beta.head(3) << -1.0, -1.0, 2.0;
  d.sigma_u = 0.5;
  switch (ex) {
    case Example::ex1_gaussian_moderate:
      d.n = 100;
      d.m = 5;
      d.p_smooth = 10;
      d.error_rho = 0.7;
      d.g_ids = {1, 2, 3};
      break;
    case Example::ex2_gaussian_highdim:
      d.n = 200;
      d.m = 5;
      d.p_smooth = 100;
      d.error_rho = 0.7;
      d.g_ids = {1, 2, 3};
      break;
    case Example::ex3_binary:
      d.n = 200;
      d.m = 4;
      d.p_smooth = 10;
      d.error_rho = 0.5;
      d.g_ids = {11, 12, 13, 14};
      break;
  }
  d.g_ids.resize(static_cast<std::size_t>(d.p_smooth), 0);
  if (n > 0) d.n = n;
  return d;
}

Family SimDesign::family() const {
  return example == Example::ex3_binary ? Family::binomial() : Family::gaussian();
}

std::vector<int> SimDesign::linear_support() const {
  std::vector<int> s;
  for (int j = 0; j < p_linear; ++j) {
    if (true_beta(j) != 0.0) s.push_back(j);
  }
  return s;
}

std::vector<int> SimDesign::smooth_support() const {
  std::vector<int> s;
  for (int k = 0; k < p_smooth; ++k) {
    if (g_ids[k] != 0) s.push_back(k);
  }
  return s;
}

void SimDesign::validate() const {
  if (n < 2 || m < 1) throw ContractError("simulation needs n >= 2 subjects and m >= 1 observations");
  if (p_linear < 0 || p_smooth < 0) throw ContractError("covariate dimensions must be >= 0");
  if (true_beta.size() != p_linear) throw ContractError("true beta length must equal p_linear");
  if (static_cast<int>(g_ids.size()) != p_smooth) throw ContractError("one function id per smooth covariate");
  if (!(error_rho > -1.0 && error_rho < 1.0)) throw ContractError("error correlation must lie in (-1, 1)");
  if (!(error_var > 0.0) || !(sigma_u >= 0.0)) throw ContractError("variances must be nonnegative");
}

SimData generate(const SimDesign& d) {
  d.validate();
  std::mt19937_64 rng(mix_seed(d.seed, 0x5151));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool binary = d.example == Example::ex3_binary;
  const double innov = std::sqrt(1.0 - d.error_rho * d.error_rho);

  SimData out;
  auto& ds = out.data;
  for (int j = 0; j < d.p_linear; ++j) ds.linear_names.push_back("x" + std::to_string(j + 1));
  for (int k = 0; k < d.p_smooth; ++k) ds.smooth_names.push_back("z" + std::to_string(k + 1));
  ds.random_effect_dim = 1;

  double cross = 0.0;
  double ss = 0.0;
  double mean = 0.0;
  long pairs = 0;
  long total = 0;
  for (int i = 0; i < d.n; ++i) {
    SubjectBlock s;
    s.id = std::to_string(i + 1);
    s.X_linear.resize(d.m, d.p_linear);
    s.X_smooth.resize(d.m, d.p_smooth);
    for (int j = 0; j < d.m; ++j) {
      for (int c = 0; c < d.p_linear; ++c) s.X_linear(j, c) = unif(rng);
      for (int c = 0; c < d.p_smooth; ++c) s.X_smooth(j, c) = unif(rng);
    }
    s.Z = Eigen::MatrixXd::Ones(d.m, 1);
    s.weights = Eigen::VectorXd::Ones(d.m);
    const double u = std::sqrt(d.sigma_u) * normal(rng);
    s.y.resize(d.m);
    double latent = normal(rng);
    for (int j = 0; j < d.m; ++j) {
      if (j > 0) latent = d.error_rho * latent + innov * normal(rng);
      double eta = u;
      for (int c = 0; c < d.p_linear; ++c) eta += s.X_linear(j, c) * d.true_beta(c);
      for (int c = 0; c < d.p_smooth; ++c) eta += true_function(d.g_ids[c], s.X_smooth(j, c));
      if (binary) {
        const double p = 1.0 / (1.0 + std::exp(-eta));
        s.y(j) = normal_cdf(latent) < p ? 1.0 : 0.0;
      } else {
        s.y(j) = eta + std::sqrt(d.error_var) * latent;
      }
    }
    if (binary) {
      for (int j = 0; j < d.m; ++j) {
        mean += s.y(j);
        ++total;
      }
    }
    ds.subjects.push_back(std::move(s));
  }
  if (binary && total > 0) {
    mean /= static_cast<double>(total);
    for (const auto& s : ds.subjects) {
      for (Eigen::Index j = 0; j < s.size(); ++j) {
        ss += (s.y(j) - mean) * (s.y(j) - mean);
        if (j + 1 < s.size()) {
          cross += (s.y(j) - mean) * (s.y(j + 1) - mean);
          ++pairs;
        }
      }
    }
    if (ss > 0.0 && pairs > 0) {
      out.binary_lag1_correlation = (cross / static_cast<double>(pairs)) / (ss / static_cast<double>(total));
    }
  }
  ds.validate();
  return out;
}

Estimator estimator_from_name(const std::string& name) {
  if (name == "scad") return Estimator::scad;
  if (name == "oracle") return Estimator::oracle;
  if (name == "full") return Estimator::full;
  if (name == "truth") return Estimator::truth_cheat;
  if (name == "zero") return Estimator::all_zero;
  throw ContractError("unknown estimator '" + name + "' (expected scad, oracle, full, truth or zero)");
}

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::scad: return "scad";
    case Estimator::oracle: return "oracle";
    case Estimator::full: return "full";
    case Estimator::truth_cheat: return "truth";
    case Estimator::all_zero: return "zero";
  }
  return "scad";
}

ReplicationRecord score(const SimDesign& d, const SimData& sim, const StandardizationRecord& rec,
                        const Estimate& est, const Eigen::VectorXd& grid) {
  if (est.beta.size() != d.p_linear || static_cast<int>(est.g.size()) != d.p_smooth) {
    throw DimensionError("estimate does not match the simulation design");
  }
  ReplicationRecord r;
  r.ok = true;
  r.beta_hat = est.beta;
  r.beta_true = d.true_beta.cwiseProduct(rec.linear_scale);
  r.mse = (r.beta_hat - r.beta_true).norm();
  r.lambda = est.lambda;
  r.converged = est.converged;
  r.iterations = est.iterations;
  for (int k = 0; k < d.p_smooth; ++k) {
    const Eigen::VectorXd truth = centered_truth(d, sim, k, grid);
    const double aise = (est.g[k] - truth).squaredNorm() / static_cast<double>(grid.size());
    r.aise.push_back(aise);
    r.taise += aise;
  }
  for (int j = 0; j < d.p_linear; ++j) {
    const bool selected = est.beta(j) != 0.0;
    const bool signal = d.true_beta(j) != 0.0;
    if (selected) r.selected_linear.push_back(j);
    if (signal && !selected) ++r.fzs;
    if (!signal && selected) ++r.fns;
  }
  for (int k = 0; k < d.p_smooth; ++k) {
    const bool selected = est.g[k].size() > 0 && est.g[k].cwiseAbs().maxCoeff() > 0.0;
    const bool signal = d.g_ids[k] != 0;
    if (selected) r.selected_smooth.push_back(k);
    if (signal && !selected) ++r.fzf;
    if (!signal && selected) ++r.fnf;
  }
  if (r.fzs + r.fzf > 0) {
    r.fit_class = 'U';
  } else if (r.fns + r.fnf == 0) {
    r.fit_class = 'C';
  } else {
    r.fit_class = 'O';
  }
  return r;
}

ReplicationRecord run_one(const SimDesign& design, const HarnessConfig& cfg, int rep) {
  const std::uint64_t rep_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  ReplicationRecord failed;
  failed.rep = rep;
  failed.seed = rep_seed;
  try {
    SimDesign d = design;
    d.seed = rep_seed;
    const SimData sim = generate(d);
    const Family family = d.family();
    const auto [std_ds, rec] = standardize(sim.data, family.kind() == FamilyKind::gaussian);
    const Eigen::VectorXd grid = aise_grid(cfg);

    Estimate est;
    est.beta = Eigen::VectorXd::Zero(d.p_linear);
    est.g.assign(static_cast<std::size_t>(d.p_smooth), Eigen::VectorXd::Zero(grid.size()));
    switch (cfg.estimator) {
      case Estimator::all_zero:
        break;
      case Estimator::truth_cheat:
        est.beta = d.true_beta.cwiseProduct(rec.linear_scale);
        for (int k = 0; k < d.p_smooth; ++k) est.g[k] = centered_truth(d, sim, k, grid);
        break;
      case Estimator::scad:
      case Estimator::oracle:
      case Estimator::full: {
        const bool oracle = cfg.estimator == Estimator::oracle;
        const std::vector<int> lin = oracle ? d.linear_support() : iota_vec(d.p_linear);
        const std::vector<int> sm = oracle ? d.smooth_support() : iota_vec(d.p_smooth);
        const LongitudinalDataset ds = oracle ? select_columns(std_ds, lin, sm) : std_ds;
        const int L = cfg.knots ? *cfg.knots : default_knot_count(static_cast<long>(d.n));
        const BasisSet basis = build_basis_set(ds, SplineBasisSpec::equally_spaced(cfg.degree, L));
        const DesignContext ctx = DesignContext::make(ds, basis, family);
        ModelSpec spec;
        spec.family = family;
        spec.corr = cfg.corr;
        spec.mc = cfg.mc;
        spec.mc.seed = mix_seed(rep_seed, 0xC4A1);
        spec.random_effects = cfg.random_effects;
        spec.scad_a = cfg.scad_a;
        spec.epsilon = cfg.epsilon;
        spec.weight_rule = cfg.weight_rule;
        spec.penalty_count = cfg.penalty_count;
        FitState st;
        if (cfg.estimator == Estimator::scad) {
          st = cfg.lambda ? fit(ctx, spec, cfg.solver, *cfg.lambda) : tune(ctx, spec, cfg.solver, cfg.tune).best;
        } else {
          st = fit(ctx, spec, cfg.solver, 0.0);
        }
        est.lambda = st.lambda;
        est.converged = st.converged;
        est.iterations = st.iterations;
        for (std::size_t j = 0; j < lin.size(); ++j) est.beta(lin[j]) = st.theta(static_cast<Eigen::Index>(j));
        for (std::size_t c = 0; c < sm.size(); ++c) {
          const int k = sm[c];
          Eigen::VectorXd xu(grid.size());
          for (Eigen::Index g = 0; g < grid.size(); ++g) xu(g) = std::clamp(rec.smooth_to_unit(k, grid(g)), 0.0, 1.0);
          const auto kc = static_cast<Eigen::Index>(c);
          est.g[k] = evaluate_g_hat(st.alpha(kc), basis.specs[c], basis.centering_means[c], xu);
        }
        break;
      }
    }
    ReplicationRecord r = score(d, sim, rec, est, grid);
    r.rep = rep;
    r.seed = rep_seed;
    return r;
  } catch (const Error& e) {
    failed.ok = false;
    failed.error = e.what();
    return failed;
  }
}

MetricsReport aggregate(const std::vector<ReplicationRecord>& records) {
  MetricsReport m;
  for (const auto& r : records) {
    if (!r.ok) {
      ++m.n_failed;
      continue;
    }
    ++m.n_ok;
    m.mse += r.mse;
    m.taise += r.taise;
    m.fzs += r.fzs;
    m.fns += r.fns;
    m.fzf += r.fzf;
    m.fnf += r.fnf;
    m.u_fit += r.fit_class == 'U';
    m.c_fit += r.fit_class == 'C';
    m.o_fit += r.fit_class == 'O';
  }
  if (m.n_ok > 0) {
    const double k = static_cast<double>(m.n_ok);
    for (double* v : {&m.mse, &m.taise, &m.fzs, &m.fns, &m.fzf, &m.fnf, &m.u_fit, &m.c_fit, &m.o_fit}) *v /= k;
  }
  return m;
}

ReplicationReport run_replications(const SimDesign& design, const HarnessConfig& cfg) {
  if (cfg.reps < 1) throw ContractError("reps must be >= 1");
  if (cfg.jobs < 1) throw ContractError("jobs must be >= 1");
  ReplicationReport out;
  out.records.resize(static_cast<std::size_t>(cfg.reps));
  if (cfg.jobs == 1) {
    for (int r = 0; r < cfg.reps; ++r) out.records[r] = run_one(design, cfg, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(cfg.jobs, cfg.reps); ++t) {
      pool.emplace_back([&] {
        for (int r = next++; r < cfg.reps; r = next++) out.records[r] = run_one(design, cfg, r);
      });
    }
    for (auto& th : pool) th.join();
  }
  out.metrics = aggregate(out.records);
  return out;
}

std::vector<ComparisonRow> compare_models(const SimDesign& design, const HarnessConfig& base) {
  std::vector<ComparisonRow> rows;
  for (int degree : {1, 3}) {
    for (CorrStructure corr : {CorrStructure::ar1, CorrStructure::exchangeable, CorrStructure::independent}) {
      for (Estimator e : {Estimator::scad, Estimator::oracle, Estimator::full}) {
        HarnessConfig cfg = base;
        cfg.degree = degree;
        cfg.corr = corr;
        cfg.estimator = e;
        rows.push_back({estimator_name(e), corr_structure_name(corr), degree, run_replications(design, cfg).metrics});
      }
    }
  }
  return rows;
}

}  // namespace pgamm
