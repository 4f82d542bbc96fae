#include "pgamm/report.hpp"

#include "pgamm/errors.hpp"

#include <cmath>
#include <cstdio>

namespace pgamm {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// NaN and infinities are not valid JSON numbers.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(number_or_null(v(k)));
  return out;
}

json to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected a numeric array", 0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw ParseError("expected a numeric array", 0);
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

json to_json(const GcvReport& r) {
  json points = json::array();
  for (std::size_t g = 0; g < r.lambda_grid.size(); ++g) {
    points.push_back({{"lambda", r.lambda_grid[g]},
                      {"gcv", number_or_null(r.gcv_values[g])},
                      {"rss", number_or_null(r.rss_values[g])},
                      {"dof", number_or_null(r.dof_values[g])},
                      {"valid", static_cast<bool>(r.valid[g])},
                      {"note", r.notes[g]},
                      {"iterations", r.iterations[g]},
                      {"converged", static_cast<bool>(r.converged[g])},
                      {"selected_linear", r.selected_linear[g]},
                      {"selected_smooth", r.selected_groups[g]}});
  }
  return {{"lambda_opt", r.lambda_opt}, {"index_opt", r.index_opt}, {"lambda_max", r.lambda_max}, {"points", points}};
}

json to_json(const MetricsReport& m) {
  return {{"mse", m.mse},     {"taise", m.taise}, {"fzs", m.fzs},     {"fns", m.fns},
          {"fzf", m.fzf},     {"fnf", m.fnf},     {"u_fit", m.u_fit}, {"c_fit", m.c_fit},
          {"o_fit", m.o_fit}, {"n_ok", m.n_ok},   {"n_failed", m.n_failed}};
}

json to_json(const ReplicationRecord& r) {
  json j = {{"rep", r.rep}, {"seed", r.seed}, {"ok", r.ok}};
  if (!r.ok) {
    j["error"] = r.error;
    return j;
  }
  j["mse"] = r.mse;
  j["taise"] = r.taise;
  j["aise"] = r.aise;
  j["fzs"] = r.fzs;
  j["fns"] = r.fns;
  j["fzf"] = r.fzf;
  j["fnf"] = r.fnf;
  j["fit_class"] = std::string(1, r.fit_class);
  j["lambda"] = r.lambda;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["selected_linear"] = r.selected_linear;
  j["selected_smooth"] = r.selected_smooth;
  j["beta_hat_standardized"] = to_json(r.beta_hat);
  j["beta_true_standardized"] = to_json(r.beta_true);
  return j;
}

json to_json(const std::vector<IterationRecord>& trace) {
  json out = json::array();
  for (const auto& t : trace) {
    out.push_back({{"iteration", t.iteration},
                   {"max_change", t.max_change},
                   {"max_change_raw", t.max_change_raw},
                   {"acceptance", t.acceptance},
                   {"n_draws", t.n_draws},
                   {"ridge", t.ridge},
                   {"active", t.active},
                   {"rho", t.rho},
                   {"phi", t.phi}});
  }
  return out;
}

Eigen::VectorXd component_grid(const StandardizationRecord& rec, Eigen::Index k) {
  const Eigen::VectorXd unit = Eigen::VectorXd::LinSpaced(kComponentGridPoints, 0.0, 1.0);
  Eigen::VectorXd x(unit.size());
  for (Eigen::Index g = 0; g < unit.size(); ++g) x(g) = rec.smooth_to_original(k, unit(g));
  return x;
}

json fit_to_json(const FitArtifacts& a) {
  if (!a.state || !a.basis || !a.standardization) throw ContractError("fit artifacts are incomplete");
  const FitState& st = *a.state;
  const StandardizationRecord& rec = *a.standardization;
  json j;
  j["lambda"] = st.lambda;
  j["converged"] = st.converged;
  j["iterations"] = st.iterations;
  j["polish_iterations"] = st.polish_iterations;
  j["rho"] = st.rho;
  j["phi"] = st.phi;
  j["Sigma"] = to_json(st.Sigma);
  j["response_center"] = rec.response_center;

  json beta = json::array();
  std::vector<std::string> selected_linear;
  for (Eigen::Index c = 0; c < st.layout.p; ++c) {
    const double b = st.theta(c);
    beta.push_back({{"name", a.linear_names[c]},
                    {"estimate", rec.beta_to_original(c, b)},
                    {"estimate_standardized", b},
                    {"selected", b != 0.0}});
    if (b != 0.0) selected_linear.push_back(a.linear_names[c]);
  }
  j["beta"] = beta;

  json comps = json::array();
  std::vector<std::string> selected_smooth;
  const Eigen::VectorXd unit = Eigen::VectorXd::LinSpaced(kComponentGridPoints, 0.0, 1.0);
  for (Eigen::Index k = 0; k < st.layout.r(); ++k) {
    const Eigen::VectorXd alpha = st.alpha(k);
    const bool sel = alpha.cwiseAbs().maxCoeff() > 0.0;
    if (sel) selected_smooth.push_back(a.smooth_names[k]);
    const Eigen::VectorXd g = evaluate_g_hat(alpha, a.basis->specs[k], a.basis->centering_means[k], unit);
    json knots = a.basis->specs[k].knots;
    comps.push_back({{"name", a.smooth_names[k]},
                     {"selected", sel},
                     {"degree", a.basis->specs[k].degree},
                     {"knots_unit", knots},
                     {"alpha", to_json(alpha)},
                     {"grid", to_json(component_grid(rec, k))},
                     {"g_hat", to_json(g)}});
  }
  j["components"] = comps;
  j["selected_linear"] = selected_linear;
  j["selected_smooth"] = selected_smooth;

  if (a.sandwich) {
    json names = json::array();
    json se = json::array();
    const Eigen::VectorXd s = a.sandwich->standard_errors();
    for (std::size_t c = 0; c < a.sandwich->linear_indices.size(); ++c) {
      const int col = a.sandwich->linear_indices[c];
      names.push_back(a.linear_names[col]);
      se.push_back(rec.beta_to_original(col, s(static_cast<Eigen::Index>(c))));
    }
    j["sandwich"] = {{"names", names},
                     {"standard_errors", se},
                     {"covariance_standardized", to_json(a.sandwich->covariance)},
                     {"model_based_standardized", to_json(a.sandwich->model_based)},
                     {"ridge", a.sandwich->ridge}};
  } else {
    j["sandwich"] = {{"error", a.sandwich_error}};
  }
  j["trace"] = to_json(st.trace);
  j["final_acceptance"] = st.draws.mean_acceptance();
  j["final_draws"] = st.draws.n_draws();
  return j;
}

std::string gcv_csv(const GcvReport& r) {
  std::string out = "lambda,gcv,rss,dof,valid\n";
  for (std::size_t g = 0; g < r.lambda_grid.size(); ++g) {
    out += num(r.lambda_grid[g]) + "," + num(r.gcv_values[g]) + "," + num(r.rss_values[g]) + "," +
           num(r.dof_values[g]) + "," + (r.valid[g] ? "1" : "0") + "\n";
  }
  return out;
}

std::string aggregate_csv_header() {
  return "example,estimator,corr,degree,n,reps,MSE,TAISE,FZs,FNs,FZf,FNf,U.fit,C.fit,O.fit,failed\n";
}

std::string aggregate_csv_row(int example, const std::string& estimator, const std::string& corr, int degree, int n,
                              int reps, const MetricsReport& m) {
  return std::to_string(example) + "," + estimator + "," + corr + "," + std::to_string(degree) + "," +
         std::to_string(n) + "," + std::to_string(reps) + "," + num(m.mse) + "," + num(m.taise) + "," + num(m.fzs) +
         "," + num(m.fns) + "," + num(m.fzf) + "," + num(m.fnf) + "," + num(m.u_fit) + "," + num(m.c_fit) + "," +
         num(m.o_fit) + "," + std::to_string(m.n_failed) + "\n";
}

}  // namespace pgamm
