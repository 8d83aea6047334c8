#ifndef GVARSV_IO_CSV_HPP
#define GVARSV_IO_CSV_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/io/serialize.hpp"
#include "gvarsv/model.hpp"
#include "gvarsv/panel_model.hpp"
#include "gvarsv/yield_curve.hpp"

namespace gvarsv {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  int column(const std::string& name, const std::string& source) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UserError(source + ": missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
};

inline std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

/// Splits one line; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      throw UserError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw UserError(source + ": empty file");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open " + path.string());
  return parse_csv(in, path.string());
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw UserError(where + ": not a number: '" + s + "'");
  return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Monthly dates
// ---------------------------------------------------------------------------

/// "YYYY-MM" (a trailing "-DD" is accepted and ignored) -> months since year 0.
inline int parse_month(const std::string& s, const std::string& where) {
  int y = 0, m = 0;
  const auto bad = [&] { return UserError(where + ": date '" + s + "' is not YYYY-MM"); };
  if (s.size() < 7 || s[4] != '-') throw bad();
  if (std::from_chars(s.data(), s.data() + 4, y).ec != std::errc()) throw bad();
  if (std::from_chars(s.data() + 5, s.data() + 7, m).ec != std::errc() || m < 1 || m > 12) throw bad();
  if (s.size() > 7 && (s.size() != 10 || s[7] != '-')) throw bad();
  return y * 12 + (m - 1);
}

inline std::string format_month(int idx) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << idx / 12 << '-' << std::setw(2) << std::setfill('0') << idx % 12 + 1;
  return os.str();
}

/// Sorted distinct months; throws if a month is skipped.
inline std::vector<int> monthly_grid(std::vector<int> months, const std::string& source) {
  std::sort(months.begin(), months.end());
  months.erase(std::unique(months.begin(), months.end()), months.end());
  for (std::size_t i = 1; i < months.size(); ++i)
    if (months[i] != months[i - 1] + 1)
      throw UserError(source + ": non-monthly gap between " + format_month(months[i - 1]) + " and " + format_month(months[i]));
  return months;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class Transform { kLevel, kLog, kYoy };

inline Transform parse_transform(const std::string& s) {
  if (s == "level") return Transform::kLevel;
  if (s == "log") return Transform::kLog;
  if (s == "yoy") return Transform::kYoy;
  throw UserError("unknown transform '" + s + "' (expected level, log or yoy)");
}

inline const char* transform_name(Transform t) {
  switch (t) {
    case Transform::kLevel: return "level";
    case Transform::kLog: return "log";
    case Transform::kYoy: return "yoy";
  }
  return "?";
}

/// Names that, when listed as variables, are filled from the yields file.
inline const std::array<std::string, 3> kNsVariables{"ns_level", "ns_slope", "ns_curvature"};

inline bool is_ns_variable(const std::string& name) {
  return std::find(kNsVariables.begin(), kNsVariables.end(), name) != kNsVariables.end();
}

struct VariableSpec {
  std::string name;
  Transform transform = Transform::kLevel;
};

struct IrfDefaults {
  int horizon = 60;
  std::optional<double> delta;
  std::string mode = "rw";  // "rw" or "ar"
  double rho = 0.0;
  std::vector<double> quantiles{0.16, 0.5, 0.84};
};

struct RunConfig {
  std::filesystem::path panel_path;
  std::filesystem::path trade_path;   // may be empty for a single country
  std::filesystem::path yields_path;  // optional
  std::vector<std::string> countries;  // empty = order of first appearance
  std::vector<VariableSpec> variables;  // empty = every variable, level, first-appearance order
  std::string trade_measure = "total";
  double ns_lambda = kNelsonSiegelLambda;
  ModelSpec spec;
  McmcConfig mcmc;
  IrfDefaults irf;
  std::filesystem::path output_dir = "out";
  std::vector<ModelSpec> dic_grid;

  bool has_transform(Transform t) const {
    return std::any_of(variables.begin(), variables.end(), [&](const VariableSpec& v) { return v.transform == t; });
  }
};

/// Relative paths resolve against the directory holding the config file.
inline RunConfig run_config_from_json(const json& j, const std::filesystem::path& base = {}) {
  RunConfig c;
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
  };
  try {
    if (j.contains("data")) {
      const auto& d = j["data"];
      c.panel_path = resolve(d.value("panel", ""));
      c.trade_path = resolve(d.value("trade", ""));
      c.yields_path = resolve(d.value("yields", ""));
      c.trade_measure = d.value("trade_measure", c.trade_measure);
      c.ns_lambda = d.value("ns_lambda", c.ns_lambda);
      c.countries = d.value("countries", c.countries);
      if (d.contains("variables"))
        for (const auto& v : d["variables"]) {
          if (v.is_string()) c.variables.push_back({v.get<std::string>(), Transform::kLevel});
          else c.variables.push_back({v.at("name").get<std::string>(), parse_transform(v.value("transform", "level"))});
        }
    }
    if (j.contains("model")) c.spec = model_spec_from_json(j["model"]);
    if (j.contains("mcmc")) c.mcmc = mcmc_config_from_json(j["mcmc"]);
    if (j.contains("irf")) {
      const auto& r = j["irf"];
      c.irf.horizon = r.value("horizon", c.irf.horizon);
      if (r.contains("delta") && !r["delta"].is_null()) c.irf.delta = r["delta"].get<double>();
      c.irf.mode = r.value("mode", c.irf.mode);
      c.irf.rho = r.value("rho", c.irf.rho);
      c.irf.quantiles = r.value("quantiles", c.irf.quantiles);
    }
    if (j.contains("dic_grid"))
      for (const auto& g : j["dic_grid"]) c.dic_grid.push_back(model_spec_from_json(g, c.spec));
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
  } catch (const json::exception& e) {
    throw UserError(std::string("config: ") + e.what());
  }
  if (c.irf.mode != "rw" && c.irf.mode != "ar") throw UserError("config: irf.mode must be 'rw' or 'ar'");
  parse_trade_measure(c.trade_measure);
  for (std::size_t a = 0; a < c.variables.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b)
      if (c.variables[a].name == c.variables[b].name) throw UserError("config: variable '" + c.variables[a].name + "' listed twice");
    if (is_ns_variable(c.variables[a].name) && c.variables[a].transform != Transform::kLevel)
      throw UserError("config: Nelson-Siegel factor '" + c.variables[a].name + "' only supports the level transform");
  }
  c.mcmc.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw UserError("config " + path.string() + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j, path.parent_path());
  auto must_exist = [](const std::filesystem::path& p, const char* what) {
    if (!p.empty() && !std::filesystem::exists(p)) throw UserError(std::string("config: ") + what + " file " + p.string() + " does not exist");
  };
  must_exist(c.panel_path, "panel");
  must_exist(c.trade_path, "trade");
  must_exist(c.yields_path, "yields");
  return c;
}

// ---------------------------------------------------------------------------
// Yields and trade flows
// ---------------------------------------------------------------------------

/// Long-format yields: date,country,maturity_months,yield. Missing quotes are NaN.
inline YieldPanel load_yields(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::string src = path.string();
  const int cd = t.column("date", src), cc = t.column("country", src), cm = t.column("maturity_months", src),
            cy = t.column("yield", src);
  std::vector<std::string> countries;
  std::vector<double> mats;
  std::vector<int> months;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = src + ":" + std::to_string(t.line_numbers[r]);
    months.push_back(parse_month(t.rows[r][cd], where));
    if (std::find(countries.begin(), countries.end(), t.rows[r][cc]) == countries.end()) countries.push_back(t.rows[r][cc]);
    const double m = parse_double(t.rows[r][cm], where);
    if (std::find(mats.begin(), mats.end(), m) == mats.end()) mats.push_back(m);
  }
  if (t.rows.empty()) throw UserError(src + ": no rows");
  const auto grid = monthly_grid(months, src);
  std::sort(mats.begin(), mats.end());
  YieldPanel p;
  p.countries = countries;
  p.maturities = Eigen::Map<const Eigen::VectorXd>(mats.data(), static_cast<Eigen::Index>(mats.size()));
  const auto T = static_cast<Eigen::Index>(grid.size()), N = static_cast<Eigen::Index>(countries.size());
  p.yields = Eigen::MatrixXd::Constant(T * N, p.M(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = src + ":" + std::to_string(t.line_numbers[r]);
    const auto ti = parse_month(t.rows[r][cd], where) - grid.front();
    const auto ii = std::find(countries.begin(), countries.end(), t.rows[r][cc]) - countries.begin();
    const auto mi = std::find(mats.begin(), mats.end(), parse_double(t.rows[r][cm], where)) - mats.begin();
    p.yields(ti * N + ii, mi) = parse_double(t.rows[r][cy], where);
  }
  for (int m : grid) p.dates.push_back(format_month(m));
  p.validate();
  return p;
}

/// N x N flows with a header of country codes; row i, column j is the flow from i to j.
/// Rows and columns are reordered to `countries` when given.
inline Eigen::MatrixXd load_trade_flows(const std::filesystem::path& path, const std::vector<std::string>& countries = {}) {
  const CsvTable t = read_csv(path);
  const std::string src = path.string();
  auto header = t.header;
  // An optional leading label column (empty or "country") is allowed.
  const bool labelled = !header.empty() && (header.front().empty() || header.front() == "country");
  if (labelled) header.erase(header.begin());
  const auto n = static_cast<Eigen::Index>(header.size());
  if (static_cast<Eigen::Index>(t.rows.size()) != n) throw UserError(src + ": trade matrix must have one row per header country");
  Eigen::MatrixXd raw(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (labelled && t.rows[r].front() != header[r]) throw UserError(src + ": row label '" + t.rows[r].front() + "' does not match header order");
    for (Eigen::Index c = 0; c < n; ++c) {
      raw(r, c) = parse_double(t.rows[r][c + (labelled ? 1 : 0)], src + ":" + std::to_string(t.line_numbers[r]));
      if (!std::isfinite(raw(r, c)) || raw(r, c) < 0.0) throw UserError(src + ": trade flows must be finite and non-negative");
    }
  }
  if (countries.empty()) return raw;
  Eigen::MatrixXd out(countries.size(), countries.size());
  std::vector<Eigen::Index> idx;
  for (const auto& c : countries) {
    const auto it = std::find(header.begin(), header.end(), c);
    if (it == header.end()) throw UserError(src + ": country '" + c + "' missing from trade matrix");
    idx.push_back(it - header.begin());
  }
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = raw(idx[a], idx[b]);
  return out;
}

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

/// Long-format panel: date,country,variable,value. Pivots to T x (N*k) in the
/// configured country and variable order, applies transforms, and attaches the
/// trade flows. A yoy transform drops the first 12 months of the whole panel.
inline PanelData load_panel(const std::filesystem::path& path, const RunConfig& cfg) {
  const CsvTable t = read_csv(path);
  const std::string src = path.string();
  const int cd = t.column("date", src), cc = t.column("country", src), cv = t.column("variable", src),
            cx = t.column("value", src);

  std::vector<std::string> countries = cfg.countries, seen_vars;
  std::vector<int> months;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    months.push_back(parse_month(t.rows[r][cd], src + ":" + std::to_string(t.line_numbers[r])));
    if (cfg.countries.empty() && std::find(countries.begin(), countries.end(), t.rows[r][cc]) == countries.end())
      countries.push_back(t.rows[r][cc]);
    if (std::find(seen_vars.begin(), seen_vars.end(), t.rows[r][cv]) == seen_vars.end()) seen_vars.push_back(t.rows[r][cv]);
  }
  if (t.rows.empty()) throw UserError(src + ": no rows");
  std::vector<VariableSpec> vars = cfg.variables;
  if (vars.empty())
    for (const auto& v : seen_vars) vars.push_back({v, Transform::kLevel});
  const auto grid = monthly_grid(months, src);
  const int T = static_cast<int>(grid.size()), N = static_cast<int>(countries.size()), k = static_cast<int>(vars.size());

  auto var_index = [&](const std::string& name) -> int {
    for (int j = 0; j < k; ++j)
      if (vars[j].name == name) return j;
    return -1;
  };
  auto country_index = [&](const std::string& name) -> int {
    const auto it = std::find(countries.begin(), countries.end(), name);
    return it == countries.end() ? -1 : static_cast<int>(it - countries.begin());
  };

  Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(T, N * k, std::numeric_limits<double>::quiet_NaN());
  Eigen::MatrixXi filled = Eigen::MatrixXi::Zero(T, N * k);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto where = src + ":" + std::to_string(t.line_numbers[r]);
    const int i = country_index(t.rows[r][cc]), j = var_index(t.rows[r][cv]);
    if (i < 0 || j < 0) continue;  // not selected by the configuration
    const int ti = parse_month(t.rows[r][cd], where) - grid.front();
    if (filled(ti, i * k + j)) throw UserError(where + ": duplicate entry for (" + t.rows[r][cd] + ", " + t.rows[r][cc] + ", " + t.rows[r][cv] + ")");
    filled(ti, i * k + j) = 1;
    raw(ti, i * k + j) = parse_double(t.rows[r][cx], where);
  }

  // Nelson-Siegel factors come from the yields file, aligned on the panel dates.
  bool wants_ns = false;
  for (const auto& v : vars) wants_ns = wants_ns || is_ns_variable(v.name);
  if (wants_ns) {
    if (cfg.yields_path.empty()) throw UserError("config lists Nelson-Siegel factors but no yields file");
    const YieldPanel yp = load_yields(cfg.yields_path);
    const NsFactors f = fit_ns_factors(yp, cfg.ns_lambda);
    const int y0 = parse_month(yp.dates.front(), cfg.yields_path.string());
    for (int j = 0; j < k; ++j) {
      if (!is_ns_variable(vars[j].name)) continue;
      const Eigen::MatrixXd& src_f = vars[j].name == "ns_level" ? f.level : vars[j].name == "ns_slope" ? f.slope : f.curvature;
      for (int i = 0; i < N; ++i) {
        const auto it = std::find(yp.countries.begin(), yp.countries.end(), countries[i]);
        if (it == yp.countries.end()) throw UserError(cfg.yields_path.string() + ": no yields for country '" + countries[i] + "'");
        const auto yi = it - yp.countries.begin();
        for (int ti = 0; ti < T; ++ti) {
          const int row = grid.front() + ti - y0;
          if (row < 0 || row >= yp.T() || filled(ti, i * k + j)) continue;
          raw(ti, i * k + j) = src_f(row, yi);
          filled(ti, i * k + j) = 1;
        }
      }
    }
  }

  std::vector<std::string> missing;
  int n_missing = 0;
  for (int ti = 0; ti < T; ++ti)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < k; ++j)
        if (!filled(ti, i * k + j) || !std::isfinite(raw(ti, i * k + j))) {
          if (missing.size() < 10) missing.push_back("(" + format_month(grid[ti]) + ", " + countries[i] + ", " + vars[j].name + ")");
          ++n_missing;
        }
  if (n_missing > 0) {
    std::string msg = src + ": " + std::to_string(n_missing) + " missing cell(s):";
    for (const auto& m : missing) msg += " " + m;
    if (n_missing > static_cast<int>(missing.size())) msg += " ...";
    throw UserError(msg);
  }

  const int lead = std::any_of(vars.begin(), vars.end(), [](const VariableSpec& v) { return v.transform == Transform::kYoy; }) ? 12 : 0;
  if (T - lead < 1) throw UserError(src + ": too few months for a year-on-year transform");
  PanelData out;
  out.countries = countries;
  for (const auto& v : vars) out.variables.push_back(v.name);
  out.y.resize(T - lead, N * k);
  for (int ti = lead; ti < T; ++ti) {
    out.dates.push_back(format_month(grid[ti]));
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < k; ++j) {
        const int c = i * k + j;
        const double x = raw(ti, c);
        double v = x;
        switch (vars[j].transform) {
          case Transform::kLevel: break;
          case Transform::kLog:
            if (!(x > 0.0)) throw UserError(src + ": log of non-positive value at (" + format_month(grid[ti]) + ", " + countries[i] + ", " + vars[j].name + ")");
            v = std::log(x);
            break;
          case Transform::kYoy:
            if (raw(ti - 12, c) == 0.0) throw UserError(src + ": year-on-year base is zero at (" + format_month(grid[ti - 12]) + ", " + countries[i] + ", " + vars[j].name + ")");
            v = x / raw(ti - 12, c) - 1.0;
            break;
        }
        out.y(ti - lead, c) = v;
      }
  }

  if (!cfg.trade_path.empty()) {
    out.trade_flows = trade_matrix(load_trade_flows(cfg.trade_path, countries), parse_trade_measure(cfg.trade_measure));
  } else if (N == 1) {
    out.trade_flows = Eigen::MatrixXd::Zero(1, 1);
  } else {
    throw UserError("config: a trade flow file is required with more than one country");
  }
  out.validate();
  return out;
}

/// Writes the panel values (after transforms) in the long format read by load_panel.
inline std::string panel_to_csv(const PanelData& p) {
  std::ostringstream os;
  os << "date,country,variable,value\n";
  for (int t = 0; t < p.T(); ++t)
    for (int i = 0; i < p.N(); ++i)
      for (int j = 0; j < p.k(); ++j) {
        const std::string date = p.dates.empty() ? format_month(2000 * 12 + t) : p.dates[t];
        os << date << ',' << p.countries[i] << ',' << p.variables[j] << ',' << format_double(p.value(t, i, j)) << '\n';
      }
  return os.str();
}

inline std::string trade_to_csv(const Eigen::MatrixXd& flows, const std::vector<std::string>& countries) {
  std::ostringstream os;
  for (std::size_t i = 0; i < countries.size(); ++i) os << (i ? "," : "") << countries[i];
  os << '\n';
  for (Eigen::Index r = 0; r < flows.rows(); ++r) {
    for (Eigen::Index c = 0; c < flows.cols(); ++c) os << (c ? "," : "") << format_double(flows(r, c));
    os << '\n';
  }
  return os.str();
}

}  // namespace gvarsv

#endif  // GVARSV_IO_CSV_HPP
