#ifndef GVARSV_IO_PERSIST_HPP
#define GVARSV_IO_PERSIST_HPP

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gvarsv/chain.hpp"
#include "gvarsv/error.hpp"
#include "gvarsv/io/serialize.hpp"

namespace gvarsv {

static_assert(std::endian::native == std::endian::little, "array files are written as native little-endian doubles");

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

namespace detail {

/// One array file: per-draw shape (row-major) plus pack/unpack of a draw.
struct ArrayField {
  std::string name;
  std::vector<Eigen::Index> shape;
  std::function<void(const ParameterState&, double*)> pack;
  std::function<void(ParameterState&, const double*)> unpack;

  Eigen::Index per_draw() const {
    Eigen::Index n = 1;
    for (auto s : shape) n *= s;
    return n;
  }
};

inline void pack_matrix(const Eigen::MatrixXd& m, double* out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) *out++ = m(r, c);
}

inline Eigen::MatrixXd unpack_matrix(const double* in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = *in++;
  return m;
}

inline std::vector<ArrayField> array_fields(const Dimensions& dims) {
  const Eigen::Index K = dims.K(), Kt = dims.Ktilde(), T = dims.T_eff(), d = dims.d, kK = dims.k * Kt;
  std::vector<ArrayField> f;
  auto mat = [&](std::string name, Eigen::Index rows, Eigen::Index cols, auto get, auto set) {
    f.push_back({std::move(name), {rows, cols},
                 [get](const ParameterState& s, double* o) { pack_matrix(get(s), o); },
                 [set, rows, cols](ParameterState& s, const double* in) { set(s, unpack_matrix(in, rows, cols)); }});
  };
  auto vec = [&](std::string name, Eigen::Index n, auto get, auto set) {
    f.push_back({std::move(name), {n},
                 [get](const ParameterState& s, double* o) {
                   const Eigen::VectorXd& v = get(s);
                   std::memcpy(o, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
                 },
                 [set, n](ParameterState& s, const double* in) { set(s, Eigen::Map<const Eigen::VectorXd>(in, n)); }});
  };
  mat("c0", K, Kt, [](const ParameterState& s) -> const Eigen::MatrixXd& { return s.coef.c0; },
      [](ParameterState& s, Eigen::MatrixXd m) { s.coef.c0 = std::move(m); });
  mat("sqrt_theta", K, Kt, [](const ParameterState& s) -> const Eigen::MatrixXd& { return s.coef.sqrt_theta; },
      [](ParameterState& s, Eigen::MatrixXd m) { s.coef.sqrt_theta = std::move(m); });
  f.push_back({"c_tilde", {K, T, Kt},
               [K, T, Kt](const ParameterState& s, double* o) {
                 for (Eigen::Index r = 0; r < K; ++r) pack_matrix(s.coef.c_tilde[r], o + r * T * Kt);
               },
               [K, T, Kt](ParameterState& s, const double* in) {
                 s.coef.c_tilde.clear();
                 for (Eigen::Index r = 0; r < K; ++r) s.coef.c_tilde.push_back(unpack_matrix(in + r * T * Kt, T, Kt));
               }});
  vec("h", T, [](const ParameterState& s) -> const Eigen::VectorXd& { return s.vol.h; },
      [](ParameterState& s, const Eigen::VectorXd& v) { s.vol.h = v; });
  mat("omega_tilde", T, K, [](const ParameterState& s) -> const Eigen::MatrixXd& { return s.vol.omega_tilde; },
      [](ParameterState& s, Eigen::MatrixXd m) { s.vol.omega_tilde = std::move(m); });
  vec("sqrt_sigma_omega", K, [](const ParameterState& s) -> const Eigen::VectorXd& { return s.vol.sqrt_sigma_omega; },
      [](ParameterState& s, const Eigen::VectorXd& v) { s.vol.sqrt_sigma_omega = v; });
  vec("omega_level", K, [](const ParameterState& s) -> const Eigen::VectorXd& { return s.vol.omega_level; },
      [](ParameterState& s, const Eigen::VectorXd& v) { s.vol.omega_level = v; });
  f.push_back({"sigma_h", {1}, [](const ParameterState& s, double* o) { *o = s.vol.sigma_h; },
               [](ParameterState& s, const double* in) { s.vol.sigma_h = *in; }});
  mat("loadings", K, d, [](const ParameterState& s) -> const Eigen::MatrixXd& { return s.fac.loadings; },
      [](ParameterState& s, Eigen::MatrixXd m) { s.fac.loadings = std::move(m); });
  mat("factors", T, d, [](const ParameterState& s) -> const Eigen::MatrixXd& { return s.fac.factors; },
      [](ParameterState& s, Eigen::MatrixXd m) { s.fac.factors = std::move(m); });
  vec("mu_c", kK, [](const ParameterState& s) -> const Eigen::VectorXd& { return s.mu_c; },
      [](ParameterState& s, const Eigen::VectorXd& v) { s.mu_c = v; });
  vec("mu_theta", kK, [](const ParameterState& s) -> const Eigen::VectorXd& { return s.mu_theta; },
      [](ParameterState& s, const Eigen::VectorXd& v) { s.mu_theta = v; });
  const std::array<Eigen::Index, kFamilyCount> sizes{kK, kK, kK, kK, K, K * d};
  for (int fi = 0; fi < kFamilyCount; ++fi) {
    const Family id = kAllFamilies[fi];
    vec("tau_" + std::string(family_name(id)), sizes[fi],
        [fi](const ParameterState& s) -> const Eigen::VectorXd& { return s.families[fi].tau; },
        [fi, id](ParameterState& s, const Eigen::VectorXd& v) {
          s.families[fi].id = id;
          s.families[fi].tau = v;
        });
  }
  // lambda, a, kappa, d0, d1 per family
  f.push_back({"family_scalars", {kFamilyCount, 5},
               [](const ParameterState& s, double* o) {
                 for (const auto& fam : s.families) {
                   *o++ = fam.lambda;
                   *o++ = fam.a;
                   *o++ = fam.kappa;
                   *o++ = fam.d0;
                   *o++ = fam.d1;
                 }
               },
               [](ParameterState& s, const double* in) {
                 for (auto& fam : s.families) {
                   fam.lambda = *in++;
                   fam.a = *in++;
                   fam.kappa = *in++;
                   fam.d0 = *in++;
                   fam.d1 = *in++;
                 }
               }});
  return f;
}

template <std::size_t N>
json array_to_json(const std::array<double, N>& a) {
  return std::vector<double>(a.begin(), a.end());
}

}  // namespace detail

/// Removes leftovers of interrupted atomic writes.
inline void clean_stale_temps(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) return;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tmp") std::filesystem::remove(e.path());
}

/// JSON manifest plus one raw little-endian f64 file per state component, each
/// holding retained x (per-draw shape) values in row-major order. The manifest
/// is written last, so a directory without one is an incomplete save.
inline json persist_chain(const PosteriorChain& chain, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  clean_stale_temps(dir);
  const auto fields = detail::array_fields(chain.dims);
  const Eigen::Index R = static_cast<Eigen::Index>(chain.draws.size());
  json files = json::array();
  for (const auto& f : fields) {
    const Eigen::Index n = f.per_draw();
    std::vector<double> buf(static_cast<std::size_t>(n * R));
    for (Eigen::Index r = 0; r < R; ++r) f.pack(chain.draws[r], buf.data() + r * n);
    const std::string file = f.name + ".f64";
    const std::size_t bytes = buf.size() * sizeof(double);
    write_file_atomic(dir / file, buf.data(), bytes);
    json shape = json::array({R});
    for (auto s : f.shape) shape.push_back(s);
    files.push_back({{"name", f.name}, {"file", file}, {"dtype", "f64le"}, {"shape", shape},
                     {"bytes", bytes}, {"checksum", hex64(fnv1a64(buf.data(), bytes))}});
  }
  json acc{{"a_post_tuning_burn", detail::array_to_json(chain.acceptance.a_post_tuning_burn)},
           {"a_sampling", detail::array_to_json(chain.acceptance.a_sampling)},
           {"kappa", detail::array_to_json(chain.acceptance.kappa)},
           {"h_rate", chain.acceptance.h_rate}};
  json m{{"version", kManifestVersion},
         {"seed", chain.seed},
         {"chain_index", chain.chain_index},
         {"spec_hash", chain.spec_hash},
         {"dims", to_json(chain.dims)},
         {"spec", to_json(chain.spec)},
         {"mcmc", to_json(chain.config)},
         {"retained", R},
         {"complete", chain.complete},
         {"countries", chain.countries},
         {"variables", chain.variables},
         {"dates", chain.dates},
         {"weights", matrix_to_json(chain.weights)},
         {"acceptance", acc},
         {"dic", {{"dbar", chain.dic.dbar}, {"dhat", chain.dic.dhat}, {"pd", chain.dic.pd()}, {"dic", chain.dic.dic()}}},
         {"files", files}};
  write_text_atomic(dir / kManifestName, m.dump(2) + "\n");
  return m;
}

inline PosteriorChain load_chain(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  if (!std::filesystem::exists(manifest_path)) throw UserError("no chain manifest at " + manifest_path.string());
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw UserError("corrupted manifest " + manifest_path.string() + ": " + e.what());
  }
  PosteriorChain c;
  try {
    if (m.at("version").get<int>() != kManifestVersion) throw UserError(manifest_path.string() + ": unsupported manifest version");
    c.seed = m.at("seed").get<std::uint64_t>();
    c.chain_index = m.at("chain_index").get<std::uint64_t>();
    c.spec_hash = m.at("spec_hash").get<std::string>();
    c.dims = dimensions_from_json(m.at("dims"));
    c.spec = model_spec_from_json(m.at("spec"));
    c.config = mcmc_config_from_json(m.at("mcmc"));
    c.complete = m.at("complete").get<bool>();
    c.countries = m.at("countries").get<std::vector<std::string>>();
    c.variables = m.at("variables").get<std::vector<std::string>>();
    c.dates = m.at("dates").get<std::vector<std::string>>();
    c.weights = matrix_from_json(m.at("weights"));
    const auto& acc = m.at("acceptance");
    c.acceptance.a_post_tuning_burn = acc.at("a_post_tuning_burn").get<std::array<double, kFamilyCount>>();
    c.acceptance.a_sampling = acc.at("a_sampling").get<std::array<double, kFamilyCount>>();
    c.acceptance.kappa = acc.at("kappa").get<std::array<double, kFamilyCount>>();
    c.acceptance.h_rate = acc.at("h_rate").get<double>();
    c.dic.dbar = m.at("dic").at("dbar").get<double>();
    c.dic.dhat = m.at("dic").at("dhat").get<double>();
  } catch (const json::exception& e) {
    throw UserError("corrupted manifest " + manifest_path.string() + ": " + e.what());
  }
  c.dims.validate();
  const auto R = m.at("retained").get<Eigen::Index>();
  c.draws.assign(static_cast<std::size_t>(R), ParameterState{});
  const auto fields = detail::array_fields(c.dims);
  const auto& files = m.at("files");
  for (const auto& f : fields) {
    const json* entry = nullptr;
    for (const auto& e : files)
      if (e.at("name").get<std::string>() == f.name) entry = &e;
    if (!entry) throw UserError(manifest_path.string() + ": no array file for '" + f.name + "'");
    const auto path = dir / entry->at("file").get<std::string>();
    if (!std::filesystem::exists(path)) throw UserError("missing array file " + path.string());
    const auto bytes = read_binary(path);
    const Eigen::Index n = f.per_draw();
    const auto expected = static_cast<std::size_t>(n * R) * sizeof(double);
    if (bytes.size() != expected || bytes.size() != entry->at("bytes").get<std::size_t>())
      throw UserError("corrupted array file " + path.string() + ": expected " + std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
    if (hex64(fnv1a64(bytes.data(), bytes.size())) != entry->at("checksum").get<std::string>())
      throw UserError("corrupted array file " + path.string() + ": checksum mismatch");
    std::vector<double> buf(static_cast<std::size_t>(n * R));
    if (!buf.empty()) std::memcpy(buf.data(), bytes.data(), bytes.size());
    for (Eigen::Index r = 0; r < R; ++r) f.unpack(c.draws[r], buf.data() + r * n);
  }
  return c;
}

}  // namespace gvarsv

#endif  // GVARSV_IO_PERSIST_HPP
