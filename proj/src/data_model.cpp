#include "pgamm/data_model.hpp"

#include "pgamm/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace pgamm {

Eigen::Index LongitudinalDataset::n_obs() const {
  Eigen::Index total = 0;
  for (const auto& s : subjects) total += s.size();
  return total;
}

Eigen::Index LongitudinalDataset::max_cluster_size() const {
  Eigen::Index m = 0;
  for (const auto& s : subjects) m = std::max(m, s.size());
  return m;
}

std::vector<Eigen::Index> LongitudinalDataset::row_offsets() const {
  std::vector<Eigen::Index> offsets;
  offsets.reserve(subjects.size() + 1);
  Eigen::Index row = 0;
  for (const auto& s : subjects) {
    offsets.push_back(row);
    row += s.size();
  }
  offsets.push_back(row);
  return offsets;
}

Eigen::MatrixXd LongitudinalDataset::stacked_linear() const {
  Eigen::MatrixXd out(n_obs(), p());
  Eigen::Index row = 0;
  for (const auto& s : subjects) {
    out.middleRows(row, s.size()) = s.X_linear;
    row += s.size();
  }
  return out;
}

Eigen::MatrixXd LongitudinalDataset::stacked_smooth() const {
  Eigen::MatrixXd out(n_obs(), r());
  Eigen::Index row = 0;
  for (const auto& s : subjects) {
    out.middleRows(row, s.size()) = s.X_smooth;
    row += s.size();
  }
  return out;
}

Eigen::VectorXd LongitudinalDataset::stacked_response() const {
  Eigen::VectorXd out(n_obs());
  Eigen::Index row = 0;
  for (const auto& s : subjects) {
    out.segment(row, s.size()) = s.y;
    row += s.size();
  }
  return out;
}

void LongitudinalDataset::validate() const {
  if (subjects.size() < 2) {
    throw ValidationError("dataset needs at least 2 subjects, found " +
                          std::to_string(subjects.size()));
  }
  if (random_effect_dim < 1) throw ValidationError("random-effect dimension must be >= 1");
  for (const auto& s : subjects) {
    const auto ni = s.size();
    if (ni < 1) throw ValidationError("subject '" + s.id + "' has no observations");
    if (s.X_linear.rows() != ni || s.X_smooth.rows() != ni || s.Z.rows() != ni ||
        s.weights.size() != ni) {
      throw ValidationError("subject '" + s.id + "' has inconsistent row counts");
    }
    if (s.X_linear.cols() != p() || s.X_smooth.cols() != r() || s.Z.cols() != q()) {
      throw ValidationError("subject '" + s.id + "' has inconsistent column counts");
    }
    if (!s.y.allFinite() || !s.X_linear.allFinite() || !s.X_smooth.allFinite() ||
        !s.Z.allFinite() || !s.weights.allFinite()) {
      throw ValidationError("subject '" + s.id + "' contains non-finite values");
    }
    if ((s.weights.array() <= 0.0).any()) {
      throw ValidationError("subject '" + s.id + "' has non-positive weights");
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          current.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& raw, long row, const std::string& column) {
  const std::string cell = trim(raw);
  double value = 0.0;
  const auto* begin = cell.data();
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError("non-numeric value '" + cell + "' in column '" + column + "'", row);
  }
  return value;
}

}  // namespace

LongitudinalDataset parse_csv(const std::string& text, const ColumnRoleConfig& config) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV: missing header", 1);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);

  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < header.size(); ++k) index.emplace(header[k], k);

  auto column = [&](const std::string& name, const char* role) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw RoleError(std::string("column '") + name + "' for role " + role + " not found in header");
    }
    return it->second;
  };

  if (config.subject_id.empty()) throw RoleError("no column configured for role subject_id");
  if (config.response.empty()) throw RoleError("no column configured for role response");
  const std::size_t id_col = column(config.subject_id, "subject_id");
  const std::size_t y_col = column(config.response, "response");
  std::vector<std::size_t> lin_cols, smooth_cols, re_cols;
  for (const auto& c : config.linear) lin_cols.push_back(column(c, "linear"));
  for (const auto& c : config.smooth) smooth_cols.push_back(column(c, "smooth"));
  for (const auto& c : config.random_effect) re_cols.push_back(column(c, "random_effect"));
  std::optional<std::size_t> w_col;
  if (config.weight) w_col = column(*config.weight, "weight");

  const Eigen::Index p = static_cast<Eigen::Index>(lin_cols.size());
  const Eigen::Index r = static_cast<Eigen::Index>(smooth_cols.size());
  const Eigen::Index q = re_cols.empty() ? 1 : static_cast<Eigen::Index>(re_cols.size());

  struct Rows {
    std::vector<double> y, w;
    std::vector<std::vector<double>> lin, smooth, z;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Rows> groups;

  long row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       row_number);
    }
    const std::string id = trim(fields[id_col]);
    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    Rows& g = it->second;
    g.y.push_back(parse_number(fields[y_col], row_number, header[y_col]));
    g.w.push_back(w_col ? parse_number(fields[*w_col], row_number, header[*w_col]) : 1.0);
    std::vector<double> lin, sm, z;
    for (auto c : lin_cols) lin.push_back(parse_number(fields[c], row_number, header[c]));
    for (auto c : smooth_cols) sm.push_back(parse_number(fields[c], row_number, header[c]));
    if (re_cols.empty()) {
      z.push_back(1.0);
    } else {
      for (auto c : re_cols) z.push_back(parse_number(fields[c], row_number, header[c]));
    }
    g.lin.push_back(std::move(lin));
    g.smooth.push_back(std::move(sm));
    g.z.push_back(std::move(z));
  }

  LongitudinalDataset ds;
  ds.linear_names = config.linear;
  ds.smooth_names = config.smooth;
  ds.random_effect_dim = static_cast<int>(q);
  for (const auto& id : order) {
    const Rows& g = groups.at(id);
    const auto ni = static_cast<Eigen::Index>(g.y.size());
    SubjectBlock s;
    s.id = id;
    s.y = Eigen::Map<const Eigen::VectorXd>(g.y.data(), ni);
    s.weights = Eigen::Map<const Eigen::VectorXd>(g.w.data(), ni);
    s.X_linear.resize(ni, p);
    s.X_smooth.resize(ni, r);
    s.Z.resize(ni, q);
    for (Eigen::Index j = 0; j < ni; ++j) {
      for (Eigen::Index c = 0; c < p; ++c) s.X_linear(j, c) = g.lin[j][c];
      for (Eigen::Index c = 0; c < r; ++c) s.X_smooth(j, c) = g.smooth[j][c];
      for (Eigen::Index c = 0; c < q; ++c) s.Z(j, c) = g.z[j][c];
    }
    ds.subjects.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

LongitudinalDataset load_csv(const std::string& path, const ColumnRoleConfig& config) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("cannot open data file '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_csv(buffer.str(), config);
}

std::pair<LongitudinalDataset, StandardizationRecord> standardize(const LongitudinalDataset& ds,
                                                                  bool center_response) {
  ds.validate();
  const Eigen::MatrixXd lin = ds.stacked_linear();
  const Eigen::MatrixXd sm = ds.stacked_smooth();
  const double N = static_cast<double>(ds.n_obs());

  StandardizationRecord rec;
  rec.linear_mean = lin.colwise().mean().transpose();
  rec.linear_scale.resize(ds.p());
  for (Eigen::Index c = 0; c < ds.p(); ++c) {
    const double var = (lin.col(c).array() - rec.linear_mean(c)).square().sum() / N;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * (1.0 + std::abs(rec.linear_mean(c))))) {
      throw DegenerateCovariateError(ds.linear_names[c]);
    }
    rec.linear_scale(c) = sd;
  }
  rec.smooth_min = sm.colwise().minCoeff().transpose();
  rec.smooth_range = (sm.colwise().maxCoeff().transpose() - rec.smooth_min);
  for (Eigen::Index c = 0; c < ds.r(); ++c) {
    if (!(rec.smooth_range(c) > 1e-12 * (1.0 + std::abs(rec.smooth_min(c))))) {
      throw DegenerateCovariateError(ds.smooth_names[c]);
    }
  }
  if (center_response) rec.response_center = ds.stacked_response().mean();

  LongitudinalDataset out = ds;
  for (auto& s : out.subjects) {
    for (Eigen::Index c = 0; c < ds.p(); ++c) {
      s.X_linear.col(c) = (s.X_linear.col(c).array() - rec.linear_mean(c)) / rec.linear_scale(c);
    }
    for (Eigen::Index c = 0; c < ds.r(); ++c) {
      s.X_smooth.col(c) = (s.X_smooth.col(c).array() - rec.smooth_min(c)) / rec.smooth_range(c);
      // the maximum maps to exactly 1 up to rounding; pin it
      s.X_smooth.col(c) = s.X_smooth.col(c).cwiseMax(0.0).cwiseMin(1.0);
    }
    s.y.array() -= rec.response_center;
  }
  return {std::move(out), std::move(rec)};
}

LongitudinalDataset unstandardize(const LongitudinalDataset& ds, const StandardizationRecord& rec) {
  LongitudinalDataset out = ds;
  for (auto& s : out.subjects) {
    for (Eigen::Index c = 0; c < ds.p(); ++c) {
      s.X_linear.col(c) = s.X_linear.col(c).array() * rec.linear_scale(c) + rec.linear_mean(c);
    }
    for (Eigen::Index c = 0; c < ds.r(); ++c) {
      s.X_smooth.col(c) = s.X_smooth.col(c).array() * rec.smooth_range(c) + rec.smooth_min(c);
    }
    s.y.array() += rec.response_center;
  }
  return out;
}

LongitudinalDataset select_columns(const LongitudinalDataset& ds, const std::vector<int>& linear,
                                   const std::vector<int>& smooth) {
  LongitudinalDataset out;
  out.random_effect_dim = ds.random_effect_dim;
  for (int c : linear) {
    if (c < 0 || c >= ds.p()) throw DimensionError("linear column index out of range");
    out.linear_names.push_back(ds.linear_names[c]);
  }
  for (int c : smooth) {
    if (c < 0 || c >= ds.r()) throw DimensionError("smooth column index out of range");
    out.smooth_names.push_back(ds.smooth_names[c]);
  }
  for (const auto& s : ds.subjects) {
    SubjectBlock b;
    b.id = s.id;
    b.y = s.y;
    b.Z = s.Z;
    b.weights = s.weights;
    b.X_linear.resize(s.size(), static_cast<Eigen::Index>(linear.size()));
    b.X_smooth.resize(s.size(), static_cast<Eigen::Index>(smooth.size()));
    for (std::size_t k = 0; k < linear.size(); ++k) b.X_linear.col(k) = s.X_linear.col(linear[k]);
    for (std::size_t k = 0; k < smooth.size(); ++k) b.X_smooth.col(k) = s.X_smooth.col(smooth[k]);
    out.subjects.push_back(std::move(b));
  }
  return out;
}

}  // namespace pgamm
