#ifndef GVARSV_IO_SERIALIZE_HPP
#define GVARSV_IO_SERIALIZE_HPP

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/model.hpp"

namespace gvarsv {

using json = nlohmann::json;

/// 64-bit FNV-1a, used for spec hashes and file checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

/// Matrices travel as {"rows", "cols", "data"} with data in row-major order.
inline json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(v)}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw UserError("matrix payload has wrong length");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json to_json(const Dimensions& d) {
  return json{{"N", d.N}, {"k", d.k}, {"P", d.P}, {"Q", d.Q}, {"d", d.d}, {"T", d.T}, {"T_eff", d.T_eff()}, {"Ktilde", d.Ktilde()}};
}
inline Dimensions dimensions_from_json(const json& j) {
  return Dimensions{j.at("N").get<int>(), j.at("k").get<int>(), j.at("P").get<int>(),
                    j.at("Q").get<int>(), j.at("d").get<int>(), j.at("T").get<int>()};
}

inline json to_json(const ModelSpec& s) {
  return json{{"P", s.P},
              {"Q", s.Q},
              {"d", s.d},
              {"sigma_h", s.sigma_h},
              {"d0", s.d0},
              {"d1", s.d1},
              {"omega_level_prior_variance", s.omega_level_prior_variance},
              {"tau_floor", s.tau_floor},
              {"tau_ceiling", s.tau_ceiling}};
}

/// Missing keys keep their defaults.
inline ModelSpec model_spec_from_json(const json& j, ModelSpec s = {}) {
  s.P = j.value("P", s.P);
  s.Q = j.value("Q", s.Q);
  s.d = j.value("d", s.d);
  s.sigma_h = j.value("sigma_h", s.sigma_h);
  s.d0 = j.value("d0", s.d0);
  s.d1 = j.value("d1", s.d1);
  s.omega_level_prior_variance = j.value("omega_level_prior_variance", s.omega_level_prior_variance);
  s.tau_floor = j.value("tau_floor", s.tau_floor);
  s.tau_ceiling = j.value("tau_ceiling", s.tau_ceiling);
  return s;
}

inline json to_json(const McmcConfig& c) {
  return json{{"n_iter", c.n_iter},
              {"n_burn", c.n_burn},
              {"thin", c.thin},
              {"seed", c.seed},
              {"n_chains", c.n_chains},
              {"impact_prior_variance", c.impact_prior_variance},
              {"impact_sqrttheta_prior_variance", c.impact_sqrttheta_prior_variance},
              {"checkpoint_every", c.checkpoint_every}};
}

inline McmcConfig mcmc_config_from_json(const json& j, McmcConfig c = {}) {
  c.n_iter = j.value("n_iter", c.n_iter);
  c.n_burn = j.value("n_burn", c.n_burn);
  c.thin = j.value("thin", c.thin);
  c.seed = j.value("seed", c.seed);
  c.n_chains = j.value("n_chains", c.n_chains);
  c.impact_prior_variance = j.value("impact_prior_variance", c.impact_prior_variance);
  c.impact_sqrttheta_prior_variance = j.value("impact_sqrttheta_prior_variance", c.impact_sqrttheta_prior_variance);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  return c;
}

inline json to_json(const NgFamilyState& f) {
  return json{{"family", std::string(family_name(f.id))},
              {"tau", vector_to_json(f.tau)},
              {"lambda", f.lambda},
              {"a", f.a},
              {"kappa", f.kappa},
              {"d0", f.d0},
              {"d1", f.d1}};
}

inline NgFamilyState family_from_json(const json& j, Family id) {
  NgFamilyState f;
  f.id = id;
  if (j.at("family").get<std::string>() != family_name(id)) throw UserError("family order mismatch in state payload");
  f.tau = vector_from_json(j.at("tau"));
  f.lambda = j.at("lambda").get<double>();
  f.a = j.at("a").get<double>();
  f.kappa = j.at("kappa").get<double>();
  f.d0 = j.at("d0").get<double>();
  f.d1 = j.at("d1").get<double>();
  return f;
}

inline json to_json(const ParameterState& s) {
  json tilde = json::array();
  for (const auto& p : s.coef.c_tilde) tilde.push_back(matrix_to_json(p));
  json fams = json::array();
  for (const auto& f : s.families) fams.push_back(to_json(f));
  return json{{"c0", matrix_to_json(s.coef.c0)},
              {"sqrt_theta", matrix_to_json(s.coef.sqrt_theta)},
              {"c_tilde", std::move(tilde)},
              {"h", vector_to_json(s.vol.h)},
              {"omega_tilde", matrix_to_json(s.vol.omega_tilde)},
              {"sqrt_sigma_omega", vector_to_json(s.vol.sqrt_sigma_omega)},
              {"omega_level", vector_to_json(s.vol.omega_level)},
              {"sigma_h", s.vol.sigma_h},
              {"loadings", matrix_to_json(s.fac.loadings)},
              {"factors", matrix_to_json(s.fac.factors)},
              {"mu_c", vector_to_json(s.mu_c)},
              {"mu_theta", vector_to_json(s.mu_theta)},
              {"families", std::move(fams)}};
}

inline ParameterState state_from_json(const json& j) {
  ParameterState s;
  s.coef.c0 = matrix_from_json(j.at("c0"));
  s.coef.sqrt_theta = matrix_from_json(j.at("sqrt_theta"));
  for (const auto& p : j.at("c_tilde")) s.coef.c_tilde.push_back(matrix_from_json(p));
  s.vol.h = vector_from_json(j.at("h"));
  s.vol.omega_tilde = matrix_from_json(j.at("omega_tilde"));
  s.vol.sqrt_sigma_omega = vector_from_json(j.at("sqrt_sigma_omega"));
  s.vol.omega_level = vector_from_json(j.at("omega_level"));
  s.vol.sigma_h = j.at("sigma_h").get<double>();
  s.fac.loadings = matrix_from_json(j.at("loadings"));
  s.fac.factors = matrix_from_json(j.at("factors"));
  s.mu_c = vector_from_json(j.at("mu_c"));
  s.mu_theta = vector_from_json(j.at("mu_theta"));
  const auto& fams = j.at("families");
  if (fams.size() != kFamilyCount) throw UserError("state payload: wrong number of families");
  for (int f = 0; f < kFamilyCount; ++f) s.families[f] = family_from_json(fams[f], kAllFamilies[f]);
  return s;
}

/// Writes bytes to `path` through a sibling temp file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t n) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UserError("cannot open " + tmp.string() + " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    out.flush();
    if (!out) throw UserError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

inline std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_binary(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace gvarsv

#endif  // GVARSV_IO_SERIALIZE_HPP
