#include "pgamm/cli.hpp"

#include "pgamm/data_model.hpp"
#include "pgamm/errors.hpp"
#include "pgamm/pgee_solver.hpp"
#include "pgamm/report.hpp"
#include "pgamm/sandwich.hpp"
#include "pgamm/sim_harness.hpp"
#include "pgamm/spline_basis.hpp"
#include "pgamm/tuning_gcv.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace pgamm::cli {

using nlohmann::json;

namespace {

struct Options {
  std::string subcommand;
  std::string data;
  std::string config;
  std::string out = ".";
  std::string log_level = "warn";
  std::string family = "gaussian";
  std::string corr = "ar1";
  int degree = 3;
  std::string knots = "auto";
  std::string lambda = "auto";
  int mc_draws = 100;
  int max_draws = 2000;
  int burnin = 200;
  int thin = 5;
  std::uint64_t seed = 1;
  int jobs = 1;
  int max_iter = 100;
  double tol = 1e-3;
  double scad_a = 3.7;
  double threshold = 1e-6;
  std::string group_weight = "dimension";
  std::string penalty_n = "observations";
  bool no_random_effects = false;

  std::string id_col = "id";
  std::string response = "y";
  std::vector<std::string> linear;
  std::vector<std::string> smooth;
  std::vector<std::string> random;
  std::string weight;

  std::string grid;
  int grid_size = 20;
  std::string gcv_n = "subjects";
  bool parallel_grid = false;

  int example = 1;
  int n = 0;
  int m = 0;
  int reps = 1;
  std::string estimator = "scad";
  bool compare = false;
  bool write_data = false;

  std::string fit_path;
  std::string truth_path;
};

const std::set<std::string> kFlags = {"no-random-effects", "parallel-grid", "compare", "write-data"};

void add_model_options(CLI::App* s, Options& o) {
  s->add_option("--config", o.config, "JSON file of flag defaults (flags win)");
  s->add_option("--out", o.out, "output directory");
  s->add_option("--log-level", o.log_level, "quiet, warn or info")->check(CLI::IsMember({"quiet", "warn", "info"}));
  s->add_option("--family", o.family, "gaussian, binomial or poisson");
  s->add_option("--corr", o.corr, "working correlation: ind, ex or ar1");
  s->add_option("--degree", o.degree, "spline degree (1-3)");
  s->add_option("--knots", o.knots, "interior knots: auto or an integer");
  s->add_option("--lambda", o.lambda, "auto (GCV) or a fixed value");
  s->add_option("--mc-draws", o.mc_draws, "Monte Carlo draws at the first iteration");
  s->add_option("--max-draws", o.max_draws, "cap on Monte Carlo draws");
  s->add_option("--burnin", o.burnin, "burn-in sweeps per chain");
  s->add_option("--thin", o.thin, "thinning interval");
  s->add_option("--seed", o.seed, "master seed");
  s->add_option("--jobs", o.jobs, "worker threads");
  s->add_option("--max-iter", o.max_iter, "outer Newton iterations");
  s->add_option("--tol", o.tol, "convergence tolerance on the fit change (W-norm for smooth groups)");
  s->add_option("--scad-a", o.scad_a, "SCAD shape parameter");
  s->add_option("--threshold", o.threshold, "zero threshold epsilon");
  s->add_option("--group-weight", o.group_weight, "trace or dimension");
  s->add_option("--penalty-n", o.penalty_n, "count multiplying the penalty: observations or subjects");
  s->add_flag("--no-random-effects", o.no_random_effects, "fix the random effects at zero");
  s->add_option("--grid-size", o.grid_size, "points in the default lambda grid");
  s->add_flag("--parallel-grid", o.parallel_grid, "fit grid points independently");
  s->add_option("--gcv-n", o.gcv_n, "n in the GCV formula: subjects or observations");
}

void add_data_options(CLI::App* s, Options& o) {
  s->add_option("--data", o.data, "CSV file, one row per observation")->required();
  s->add_option("--id", o.id_col, "subject id column");
  s->add_option("--response", o.response, "response column");
  s->add_option("--linear", o.linear, "linear covariate columns")->delimiter(',');
  s->add_option("--smooth", o.smooth, "smooth covariate columns")->delimiter(',');
  s->add_option("--random", o.random, "random-effect design columns (default: intercept)")->delimiter(',');
  s->add_option("--weight", o.weight, "prior weight / binomial denominator column");
}

std::unique_ptr<CLI::App> build_app(Options& o) {
  auto app = std::make_unique<CLI::App>("Penalized generalized additive mixed models", "pgamm");
  app->require_subcommand(1);
  app->set_version_flag("--version", kVersion);

  auto* fit = app->add_subcommand("fit", "fit at one lambda (or GCV-selected with --lambda auto)");
  add_model_options(fit, o);
  add_data_options(fit, o);

  auto* tune = app->add_subcommand("tune", "select lambda by GCV over a grid");
  add_model_options(tune, o);
  add_data_options(tune, o);
  tune->add_option("--grid", o.grid, "comma-separated ascending lambda values");

  auto* sim = app->add_subcommand("simulate", "replicated simulation study");
  add_model_options(sim, o);
  sim->add_option("--example", o.example, "design 1, 2 or 3")->check(CLI::Range(1, 3));
  sim->add_option("--n", o.n, "subjects (0: design default)");
  sim->add_option("--m", o.m, "observations per subject (0: design default)");
  sim->add_option("--reps", o.reps, "replications");
  sim->add_option("--estimator", o.estimator, "scad, oracle, full, truth or zero");
  sim->add_flag("--compare", o.compare, "SCAD/ORACLE/FULL x correlation x degree table");
  sim->add_flag("--write-data", o.write_data, "also write replication 0 as data.csv and truth.json");

  auto* ev = app->add_subcommand("evaluate", "score a fit.json against a truth.json");
  ev->add_option("--config", o.config, "JSON file of flag defaults (flags win)");
  ev->add_option("--fit", o.fit_path, "fit.json")->required();
  ev->add_option("--truth", o.truth_path, "truth.json")->required();
  ev->add_option("--out", o.out, "output directory");
  return app;
}

std::vector<char*> as_argv(std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return argv;
}

std::string config_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) joined += ",";
      joined += config_value(v[k]);
    }
    return joined;
  }
  return v.dump();
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what(), 0);
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write '" + path.string() + "'");
  out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json effective_config(const Options& o) {
  json c = {{"family", o.family},
            {"corr", o.corr},
            {"degree", o.degree},
            {"knots", o.knots},
            {"mc-draws", o.mc_draws},
            {"max-draws", o.max_draws},
            {"burnin", o.burnin},
            {"thin", o.thin},
            {"seed", o.seed},
            {"max-iter", o.max_iter},
            {"tol", o.tol},
            {"scad-a", o.scad_a},
            {"threshold", o.threshold},
            {"group-weight", o.group_weight},
            {"penalty-n", o.penalty_n},
            {"grid-size", o.grid_size},
            {"gcv-n", o.gcv_n},
            {"no-random-effects", o.no_random_effects}};
  return c;
}

ModelSpec model_spec(const Options& o) {
  ModelSpec spec;
  spec.family = Family::from_name(o.family);
  spec.corr = corr_structure_from_name(o.corr);
  spec.scad_a = o.scad_a;
  spec.epsilon = o.threshold;
  spec.weight_rule = group_weight_rule_from_name(o.group_weight);
  if (o.penalty_n == "subjects") {
    spec.penalty_count = PenaltyCount::subjects;
  } else if (o.penalty_n != "observations") {
    throw ContractError("--penalty-n must be observations or subjects");
  }
  spec.mc.n_draws = o.mc_draws;
  spec.mc.max_draws = std::max(o.max_draws, o.mc_draws);
  spec.mc.burn_in = o.burnin;
  spec.mc.thinning = o.thin;
  spec.mc.seed = o.seed;
  spec.random_effects = !o.no_random_effects;
  spec.mc.validate();
  return spec;
}

SolverConfig solver_config(const Options& o) {
  SolverConfig cfg;
  cfg.max_outer_iter = o.max_iter;
  cfg.tol = o.tol;
  cfg.validate();
  return cfg;
}

TuneConfig tune_config(const Options& o) {
  TuneConfig t;
  t.grid_size = o.grid_size;
  t.parallel_grid = o.parallel_grid;
  t.jobs = o.jobs;
  if (o.gcv_n == "observations") {
    t.sample_size = GcvSampleSize::observations;
  } else if (o.gcv_n != "subjects") {
    throw ContractError("--gcv-n must be subjects or observations");
  }
  return t;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ContractError("invalid " + what + " '" + s + "'");
  return v;
}

int knot_count(const Options& o, long n_subjects) {
  if (o.knots == "auto") return default_knot_count(n_subjects);
  const double v = parse_double(o.knots, "--knots");
  if (v < 0 || v != std::floor(v)) throw ContractError("--knots must be auto or a nonnegative integer");
  return static_cast<int>(v);
}

struct Prepared {
  LongitudinalDataset raw;
  LongitudinalDataset standardized;
  StandardizationRecord rec;
  BasisSet basis;
  DesignContext design;
  ModelSpec spec;
  SolverConfig solver;
};

Prepared prepare(const Options& o) {
  if (o.linear.empty() && o.smooth.empty()) throw RoleError("give at least one of --linear or --smooth");
  ColumnRoleConfig roles;
  roles.subject_id = o.id_col;
  roles.response = o.response;
  roles.linear = o.linear;
  roles.smooth = o.smooth;
  roles.random_effect = o.random;
  if (!o.weight.empty()) roles.weight = o.weight;
  Prepared p;
  p.spec = model_spec(o);
  p.solver = solver_config(o);
  p.raw = load_csv(o.data, roles);
  auto [std_ds, rec] = standardize(p.raw, p.spec.family.kind() == FamilyKind::gaussian);
  p.standardized = std::move(std_ds);
  p.rec = std::move(rec);
  const int L = knot_count(o, static_cast<long>(p.raw.n_subjects()));
  p.basis = build_basis_set(p.standardized, SplineBasisSpec::equally_spaced(o.degree, L));
  p.design = DesignContext::make(p.standardized, p.basis, p.spec.family);
  return p;
}

json fit_document(const Options& o, const Prepared& p, const FitState& st) {
  FitArtifacts art;
  art.state = &st;
  art.basis = &p.basis;
  art.standardization = &p.rec;
  art.linear_names = p.raw.linear_names;
  art.smooth_names = p.raw.smooth_names;
  try {
    art.sandwich = sandwich_covariance(st, p.design, p.spec);
  } catch (const Error& e) {
    art.sandwich_error = e.what();
  }
  json doc;
  doc["version"] = kVersion;
  doc["seed"] = o.seed;
  json cfg = effective_config(o);
  cfg["lambda"] = st.lambda;
  cfg["data"] = o.data;
  cfg["id"] = o.id_col;
  cfg["response"] = o.response;
  cfg["linear"] = o.linear;
  cfg["smooth"] = o.smooth;
  cfg["random"] = o.random;
  cfg["weight"] = o.weight;
  doc["config"] = cfg;
  doc["n_subjects"] = p.raw.n_subjects();
  doc["n_obs"] = p.raw.n_obs();
  doc["family"] = p.spec.family.name();
  doc["fit"] = fit_to_json(art);
  return doc;
}

std::string fit_summary(const json& doc) {
  std::ostringstream s;
  const json& f = doc["fit"];
  s << kVersion << "\n";
  s << "lambda " << f["lambda"].get<double>() << ", converged " << (f["converged"].get<bool>() ? "yes" : "no")
    << " after " << f["iterations"].get<int>() << " iterations\n";
  s << "rho " << f["rho"].get<double>() << ", phi " << f["phi"].get<double>() << "\n";
  s << "linear coefficients (original scale):\n";
  for (const auto& b : f["beta"]) {
    s << "  " << b["name"].get<std::string>() << " " << b["estimate"].get<double>()
      << (b["selected"].get<bool>() ? "" : "  (zero)") << "\n";
  }
  s << "smooth components:\n";
  for (const auto& c : f["components"]) {
    s << "  " << c["name"].get<std::string>() << (c["selected"].get<bool>() ? " selected" : " zero") << "\n";
  }
  return s.str();
}

std::filesystem::path out_dir(const Options& o) {
  std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  return dir;
}

int cmd_fit_or_tune(const Options& o, bool tune_mode, std::ostream& out) {
  const Prepared p = prepare(o);
  const auto dir = out_dir(o);
  FitState st;
  std::optional<GcvReport> report;
  const TuneConfig tcfg = tune_config(o);
  if (tune_mode && !o.grid.empty()) {
    std::vector<double> grid;
    std::stringstream ss(o.grid);
    std::string item;
    while (std::getline(ss, item, ',')) grid.push_back(parse_double(item, "--grid value"));
    TuneResult res = select_lambda(p.design, p.spec, p.solver, grid, tcfg);
    st = std::move(res.best);
    report = std::move(res.report);
  } else if (tune_mode || o.lambda == "auto") {
    TuneResult res = tune(p.design, p.spec, p.solver, tcfg);
    st = std::move(res.best);
    report = std::move(res.report);
  } else {
    const double lambda = parse_double(o.lambda, "--lambda");
    if (lambda < 0.0) throw ContractError("--lambda must be >= 0");
    st = fit(p.design, p.spec, p.solver, lambda);
  }

  const json doc = fit_document(o, p, st);
  write_file(dir / "fit.json", dump(doc));
  const std::string summary = fit_summary(doc);
  write_file(dir / "summary.txt", summary);
  if (report) {
    json g;
    g["version"] = kVersion;
    g["seed"] = o.seed;
    json cfg = effective_config(o);
    cfg["grid"] = o.grid;
    cfg["grid-size"] = o.grid_size;
    cfg["parallel-grid"] = o.parallel_grid;
    g["config"] = cfg;
    g["gcv"] = to_json(*report);
    write_file(dir / "gcv.json", dump(g));
    write_file(dir / "gcv.csv", gcv_csv(*report));
  }
  if (o.log_level != "quiet") out << summary;
  return st.converged ? kSuccess : kNotConverged;
}

std::string data_csv(const LongitudinalDataset& ds) {
  std::ostringstream s;
  s.precision(17);
  s << "id,y";
  for (const auto& n : ds.linear_names) s << "," << n;
  for (const auto& n : ds.smooth_names) s << "," << n;
  s << "\n";
  for (const auto& sub : ds.subjects) {
    for (Eigen::Index j = 0; j < sub.size(); ++j) {
      s << sub.id << "," << sub.y(j);
      for (Eigen::Index c = 0; c < sub.X_linear.cols(); ++c) s << "," << sub.X_linear(j, c);
      for (Eigen::Index c = 0; c < sub.X_smooth.cols(); ++c) s << "," << sub.X_smooth(j, c);
      s << "\n";
    }
  }
  return s.str();
}

json truth_document(const SimDesign& d, const SimData& sim) {
  const auto [unused, rec] = standardize(sim.data, false);
  json comps = json::array();
  for (int k = 0; k < d.p_smooth; ++k) {
    const Eigen::VectorXd grid = component_grid(rec, k);
    double mean = 0.0;
    long count = 0;
    for (const auto& s : sim.data.subjects) {
      for (Eigen::Index j = 0; j < s.size(); ++j) mean += true_function(d.g_ids[k], s.X_smooth(j, k));
      count += s.size();
    }
    mean /= static_cast<double>(count);
    Eigen::VectorXd g(grid.size());
    for (Eigen::Index t = 0; t < grid.size(); ++t) {
      g(t) = d.g_ids[k] == 0 ? 0.0 : true_function(d.g_ids[k], grid(t)) - mean;
    }
    comps.push_back({{"name", sim.data.smooth_names[k]}, {"grid", to_json(grid)}, {"g", to_json(g)}});
  }
  return {{"version", kVersion}, {"seed", d.seed}, {"beta", to_json(d.true_beta)}, {"components", comps}};
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto dir = out_dir(o);
  SimDesign design = SimDesign::make(example_from_number(o.example), o.n, o.seed);
  if (o.m > 0) design.m = o.m;
  HarnessConfig cfg;
  cfg.estimator = estimator_from_name(o.estimator);
  cfg.corr = corr_structure_from_name(o.corr);
  cfg.degree = o.degree;
  if (o.knots != "auto") cfg.knots = knot_count(o, design.n);
  if (o.lambda != "auto") cfg.lambda = parse_double(o.lambda, "--lambda");
  if (o.reps < 1) throw ContractError("--reps must be >= 1");
  cfg.reps = o.reps;
  cfg.jobs = std::max(1, o.jobs);
  cfg.seed = o.seed;
  cfg.random_effects = !o.no_random_effects;
  const ModelSpec spec = model_spec(o);
  cfg.mc = spec.mc;
  cfg.scad_a = spec.scad_a;
  cfg.epsilon = spec.epsilon;
  cfg.weight_rule = spec.weight_rule;
  cfg.penalty_count = spec.penalty_count;
  cfg.solver = solver_config(o);
  cfg.tune = tune_config(o);

  json doc;
  doc["version"] = kVersion;
  doc["seed"] = o.seed;
  json c = effective_config(o);
  c["family"] = design.family().name();
  c["example"] = o.example;
  c["n"] = design.n;
  c["m"] = design.m;
  c["reps"] = o.reps;
  c["estimator"] = o.estimator;
  c["lambda"] = o.lambda;
  c["compare"] = o.compare;
  c["grid-size"] = o.grid_size;
  doc["config"] = c;

  std::string csv = aggregate_csv_header();
  if (o.compare) {
    json rows = json::array();
    for (const auto& row : compare_models(design, cfg)) {
      csv += aggregate_csv_row(o.example, row.estimator, row.corr, row.degree, design.n, o.reps, row.metrics);
      rows.push_back({{"estimator", row.estimator}, {"corr", row.corr}, {"degree", row.degree},
                      {"metrics", to_json(row.metrics)}});
    }
    doc["comparison"] = rows;
  } else {
    const ReplicationReport rep = run_replications(design, cfg);
    csv += aggregate_csv_row(o.example, o.estimator, o.corr, o.degree, design.n, o.reps, rep.metrics);
    doc["metrics"] = to_json(rep.metrics);
    json recs = json::array();
    for (const auto& r : rep.records) recs.push_back(to_json(r));
    doc["records"] = recs;
  }
  write_file(dir / "replications.json", dump(doc));
  write_file(dir / "aggregate.csv", csv);

  if (o.write_data) {
    SimDesign d0 = design;
    d0.seed = mix_seed(o.seed, 0);
    const SimData sim = generate(d0);
    write_file(dir / "data.csv", data_csv(sim.data));
    write_file(dir / "truth.json", dump(truth_document(d0, sim)));
  }
  if (o.log_level != "quiet") out << csv;
  return kSuccess;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const json fitdoc = read_json(o.fit_path);
  const json truth = read_json(o.truth_path);
  try {
    const json& f = fitdoc.at("fit");
    std::vector<double> bh;
    for (const auto& b : f.at("beta")) bh.push_back(b.at("estimate").get<double>());
    const Eigen::VectorXd beta_true = vector_from_json(truth.at("beta"));
    if (static_cast<Eigen::Index>(bh.size()) != beta_true.size()) {
      throw DimensionError("fit has " + std::to_string(bh.size()) + " linear coefficients, truth has " +
                           std::to_string(beta_true.size()));
    }
    const Eigen::VectorXd beta_hat = Eigen::Map<const Eigen::VectorXd>(bh.data(), static_cast<Eigen::Index>(bh.size()));
    const json& fc = f.at("components");
    const json& tc = truth.at("components");
    if (fc.size() != tc.size()) {
      throw DimensionError("fit has " + std::to_string(fc.size()) + " smooth components, truth has " +
                           std::to_string(tc.size()));
    }
    MetricsReport m;
    json aise = json::array();
    int fzs = 0, fns = 0, fzf = 0, fnf = 0;
    for (Eigen::Index j = 0; j < beta_true.size(); ++j) {
      const bool sel = beta_hat(j) != 0.0;
      const bool sig = beta_true(j) != 0.0;
      fzs += sig && !sel;
      fns += !sig && sel;
    }
    for (std::size_t k = 0; k < fc.size(); ++k) {
      const Eigen::VectorXd gh = vector_from_json(fc[k].at("g_hat"));
      const Eigen::VectorXd gt = vector_from_json(tc[k].at("g"));
      if (gh.size() != gt.size()) throw DimensionError("component grids differ in length");
      const double a = (gh - gt).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, gh.size()));
      aise.push_back(a);
      m.taise += a;
      const bool sel = gh.size() && gh.cwiseAbs().maxCoeff() > 0.0;
      const bool sig = gt.size() && gt.cwiseAbs().maxCoeff() > 0.0;
      fzf += sig && !sel;
      fnf += !sig && sel;
    }
    m.mse = (beta_hat - beta_true).norm();
    m.fzs = fzs;
    m.fns = fns;
    m.fzf = fzf;
    m.fnf = fnf;
    m.n_ok = 1;
    if (fzs + fzf > 0) {
      m.u_fit = 1.0;
    } else if (fns + fnf == 0) {
      m.c_fit = 1.0;
    } else {
      m.o_fit = 1.0;
    }
    json doc;
    doc["version"] = kVersion;
    doc["config"] = {{"fit", o.fit_path}, {"truth", o.truth_path}};
    doc["seed"] = fitdoc.value("seed", json(nullptr));
    doc["metrics"] = to_json(m);
    doc["aise"] = aise;
    const auto dir = out_dir(o);
    write_file(dir / "evaluation.json", dump(doc));
    out << "MSE " << m.mse << "  TAISE " << m.taise << "\n";
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed fit or truth document: ") + e.what(), 0);
  }
  return kSuccess;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    std::vector<std::string> argv_store{"pgamm"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());

    Options first;
    auto app = build_app(first);
    {
      std::vector<std::string> tmp = argv_store;
      auto argv = as_argv(tmp);
      app->parse(static_cast<int>(argv.size()), argv.data());
    }

    // Config file values fill in flags absent from the command line.
    if (!first.config.empty()) {
      CLI::App* sub = app->get_subcommands().front();
      const json cfg = read_json(first.config);
      if (!cfg.is_object()) throw ContractError("config file must hold a JSON object");
      for (const auto& [key, value] : cfg.items()) {
        if (key == "config") continue;
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt) throw ContractError("unknown config key '" + key + "'");
        if (opt->count() > 0) continue;
        if (kFlags.count(key)) {
          if (value.is_boolean() && value.get<bool>()) argv_store.push_back("--" + key);
          continue;
        }
        argv_store.push_back("--" + key);
        argv_store.push_back(config_value(value));
      }
    }

    Options o;
    auto final_app = build_app(o);
    auto argv = as_argv(argv_store);
    final_app->parse(static_cast<int>(argv.size()), argv.data());
    o.subcommand = final_app->get_subcommands().front()->get_name();

    if (o.subcommand == "fit") return cmd_fit_or_tune(o, false, out);
    if (o.subcommand == "tune") {
      if (final_app->get_subcommands().front()->count("--grid") > 0 && o.grid.empty()) {
        throw TuningError("--grid is empty");
      }
      return cmd_fit_or_tune(o, true, out);
    }
    if (o.subcommand == "simulate") return cmd_simulate(o, out);
    return cmd_evaluate(o, out);
  } catch (const CLI::CallForHelp&) {
    Options o;
    auto app = build_app(o);
    const CLI::App* target = app.get();
    for (const auto* sub : app->get_subcommands({})) {
      if (!args.empty() && sub->get_name() == args.front()) target = sub;
    }
    out << target->help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kError;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return kError;
  }
}

}  // namespace pgamm::cli
