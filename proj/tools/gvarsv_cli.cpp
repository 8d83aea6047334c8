// gvarsv command-line driver.
//
// Exit codes: 0 success, 1 user error (bad flags, config, input files),
// 2 internal or numerical failure. Errors are reported on stderr as a single
// line "error[<kind>]: <message>".

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gvarsv/gvarsv.hpp"
#include "gvarsv/io/fetch.hpp"

namespace fs = std::filesystem;
using namespace gvarsv;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> chains;
  bool quiet = false;
  std::string resume;
};

std::mutex log_mutex;

void note(const Common& c, const std::string& msg) {
  if (c.quiet) return;
  std::lock_guard lock(log_mutex);
  std::cerr << msg << '\n';
}

RunConfig load_config(const Common& c) {
  if (c.config.empty()) throw UserError("--config is required for this subcommand");
  RunConfig cfg = load_run_config(c.config);
  if (c.seed) cfg.mcmc.seed = *c.seed;
  if (c.chains) cfg.mcmc.n_chains = *c.chains;
  if (cfg.mcmc.n_chains < 1) throw UserError("--chains must be at least 1");
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

fs::path chain_dir(const fs::path& out, int c) { return out / ("chain_" + std::to_string(c)); }

/// Reads every chain_<c> directory under `dir` (or `dir` itself if it holds a
/// manifest) and pools the retained draws.
PosteriorChain load_pooled(const fs::path& dir) {
  if (fs::exists(dir / kManifestName)) return load_chain(dir);
  std::vector<fs::path> dirs;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && e.path().filename().string().rfind("chain_", 0) == 0 && fs::exists(e.path() / kManifestName))
        dirs.push_back(e.path());
  if (dirs.empty()) throw UserError("no fitted chains under " + dir.string() + " (run `gvarsv fit` first)");
  std::sort(dirs.begin(), dirs.end());
  PosteriorChain pooled = load_chain(dirs.front());
  for (std::size_t i = 1; i < dirs.size(); ++i) {
    PosteriorChain c = load_chain(dirs[i]);
    if (c.spec_hash != pooled.spec_hash) throw UserError(dirs[i].string() + " was fitted with a different configuration");
    for (auto& d : c.draws) pooled.draws.push_back(std::move(d));
  }
  return pooled;
}

std::string qlabel(double q) {
  std::ostringstream os;
  os << 'q' << q;
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_fit(const Common& c) {
  RunConfig cfg = load_config(c);
  const PanelData data = load_panel(cfg.panel_path, cfg);
  const Model model(data, cfg.spec);
  if (cfg.mcmc.checkpoint_every == 0) cfg.mcmc.checkpoint_every = std::max(1, cfg.mcmc.n_iter / 20);
  const int n_chains = cfg.mcmc.n_chains;
  if (!c.resume.empty() && n_chains > 1 && !fs::is_directory(c.resume))
    throw UserError("--resume with several chains expects the output directory holding chain_<c>.ckpt files");
  fs::create_directories(cfg.output_dir);
  note(c, "fitting " + std::to_string(n_chains) + " chain(s): N=" + std::to_string(model.dims().N) + " k=" +
              std::to_string(model.dims().k) + " T=" + std::to_string(model.dims().T) + ", " +
              std::to_string(cfg.mcmc.n_iter) + " sweeps");

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_chains));
  std::vector<std::thread> workers;
  for (int ci = 0; ci < n_chains; ++ci) {
    workers.emplace_back([&, ci] {
      try {
        RunOptions opt;
        opt.chain_index = static_cast<std::uint64_t>(ci);
        opt.checkpoint_path = cfg.output_dir / ("chain_" + std::to_string(ci) + ".ckpt");
        if (!c.resume.empty()) {
          const fs::path r = fs::is_directory(c.resume) ? fs::path(c.resume) / opt.checkpoint_path.filename() : fs::path(c.resume);
          if (fs::exists(r)) opt.resume = r;
          else if (!fs::is_directory(c.resume)) throw UserError("checkpoint " + r.string() + " does not exist");
        }
        const int step = std::max(1, cfg.mcmc.n_iter / 10);
        opt.progress = [&, ci, step](int sweep, int n) {
          if (sweep % step == 0) note(c, "chain " + std::to_string(ci) + ": sweep " + std::to_string(sweep) + "/" + std::to_string(n));
        };
        const PosteriorChain chain = run_chain(model, cfg.mcmc, opt);
        persist_chain(chain, chain_dir(cfg.output_dir, ci));
        fs::remove(opt.checkpoint_path);
      } catch (...) {
        errors[static_cast<std::size_t>(ci)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  note(c, "wrote " + cfg.output_dir.string());
  return 0;
}

int cmd_irf(const Common& c, int horizon, const std::string& in) {
  const RunConfig cfg = load_config(c);
  const PosteriorChain chain = load_pooled(in.empty() ? cfg.output_dir : fs::path(in));
  IrfRequest req;
  req.horizon = horizon > 0 ? horizon : cfg.irf.horizon;
  req.delta = cfg.irf.delta;
  req.mode = cfg.irf.mode == "ar" ? Persistence::kAutoregressive : Persistence::kRandomWalk;
  req.rho = cfg.irf.rho;
  req.quantiles = cfg.irf.quantiles;
  const IrfResult irf = impulse_response(chain, req);

  std::ostringstream csv;
  csv << "country,variable,horizon";
  for (double q : irf.quantiles) csv << ',' << qlabel(q);
  csv << '\n';
  json cube = json::array();
  for (int r = 0; r < chain.dims.K(); ++r) {
    const auto& country = chain.countries[static_cast<std::size_t>(r / chain.dims.k)];
    const auto& variable = chain.variables[static_cast<std::size_t>(r % chain.dims.k)];
    json rows = json::array();
    for (int s = 0; s <= irf.horizon; ++s) {
      csv << country << ',' << variable << ',' << s;
      json row = json::array();
      for (const auto& m : irf.summary) {
        csv << ',' << format_double(m(r, s));
        row.push_back(m(r, s));
      }
      csv << '\n';
      rows.push_back(row);
    }
    cube.push_back({{"country", country}, {"variable", variable}, {"values", rows}});
  }
  const fs::path out = c.out.empty() ? cfg.output_dir : fs::path(c.out);
  fs::create_directories(out);
  write_text_atomic(out / "irf.csv", csv.str());
  const json j{{"horizon", irf.horizon}, {"origin", irf.origin}, {"delta", irf.delta}, {"quantiles", irf.quantiles},
               {"draws", irf.responses.size()}, {"excluded", irf.excluded_count}, {"responses", cube}};
  write_text_atomic(out / "irf.json", j.dump(2) + "\n");
  note(c, "irf: " + std::to_string(irf.responses.size() - static_cast<std::size_t>(irf.excluded_count)) + " draws used, " +
              std::to_string(irf.excluded_count) + " explosive draws excluded");
  return 0;
}

int cmd_uncertainty(const Common& c, const std::string& in) {
  const RunConfig cfg = load_config(c);
  const PosteriorChain chain = load_pooled(in.empty() ? cfg.output_dir : fs::path(in));
  const UncertaintySummary u = uncertainty_series(chain, cfg.irf.quantiles);
  std::ostringstream csv;
  csv << "date";
  for (double q : u.quantiles) csv << ',' << qlabel(q);
  csv << ",standardized_median\n";
  for (Eigen::Index t = 0; t < u.bands.rows(); ++t) {
    csv << (chain.dates.empty() ? std::to_string(t) : chain.dates[static_cast<std::size_t>(t)]);
    for (Eigen::Index q = 0; q < u.bands.cols(); ++q) csv << ',' << format_double(u.bands(t, q));
    csv << ',' << format_double(u.standardized_median(t)) << '\n';
  }
  const fs::path out = c.out.empty() ? cfg.output_dir : fs::path(c.out);
  fs::create_directories(out);
  write_text_atomic(out / "uncertainty.csv", csv.str());
  return 0;
}

int cmd_shrinkage(const Common& c, const std::string& in) {
  const RunConfig cfg = load_config(c);
  const PosteriorChain chain = load_pooled(in.empty() ? cfg.output_dir : fs::path(in));
  std::ostringstream csv;
  csv << "family,variable,regressor,mean_log_tau\n";
  for (const auto& t : shrinkage_report(chain))
    for (Eigen::Index j = 0; j < t.mean_log_tau.rows(); ++j)
      for (Eigen::Index l = 0; l < t.mean_log_tau.cols(); ++l)
        csv << family_name(t.family) << ',' << chain.variables[static_cast<std::size_t>(j)] << ','
            << t.column_labels[static_cast<std::size_t>(l)] << ',' << format_double(t.mean_log_tau(j, l)) << '\n';
  std::ostringstream acc;
  acc << "family,a_post_tuning_burn,a_sampling,kappa\n";
  for (int f = 0; f < kFamilyCount; ++f)
    acc << family_name(kAllFamilies[f]) << ',' << format_double(chain.acceptance.a_post_tuning_burn[f]) << ','
        << format_double(chain.acceptance.a_sampling[f]) << ',' << format_double(chain.acceptance.kappa[f]) << '\n';
  const fs::path out = c.out.empty() ? cfg.output_dir : fs::path(c.out);
  fs::create_directories(out);
  write_text_atomic(out / "shrinkage.csv", csv.str());
  write_text_atomic(out / "acceptance.csv", acc.str());
  return 0;
}

int cmd_dic(const Common& c) {
  const RunConfig cfg = load_config(c);
  if (cfg.dic_grid.empty()) throw UserError("config: dic_grid is empty");
  const PanelData data = load_panel(cfg.panel_path, cfg);
  const DicResult r = compute_dic(data, cfg.dic_grid, cfg.mcmc, [&](std::size_t g, const DicPoint& p) {
    note(c, "dic: grid point " + std::to_string(g + 1) + "/" + std::to_string(cfg.dic_grid.size()) +
                (p.failed ? " failed: " + p.error : " DIC " + format_double(p.dic.dic())));
  });
  std::ostringstream csv;
  csv << "P,Q,d,dbar,pd,dic,status,selected\n";
  for (std::size_t g = 0; g < r.points.size(); ++g) {
    const auto& p = r.points[g];
    csv << p.spec.P << ',' << p.spec.Q << ',' << p.spec.d << ',';
    if (p.failed) csv << ",,,failed,0\n";
    else
      csv << format_double(p.dic.dbar) << ',' << format_double(p.dic.pd()) << ',' << format_double(p.dic.dic()) << ",ok,"
          << (static_cast<int>(g) == r.selected ? 1 : 0) << '\n';
  }
  fs::create_directories(cfg.output_dir);
  write_text_atomic(cfg.output_dir / "dic.csv", csv.str());
  if (r.selected < 0) throw NumericalError("every grid point failed");
  return 0;
}

int cmd_synth(const Common& c) {
  SyntheticSpec spec;
  if (!c.config.empty()) {
    json j;
    try {
      j = json::parse(read_text(c.config));
      if (j.contains("synthetic")) j = j["synthetic"];
      if (j.contains("dims")) spec.dims = dimensions_from_json(j["dims"]);
      spec.time_varying = j.value("time_varying", spec.time_varying);
      spec.stochastic_volatility = j.value("stochastic_volatility", spec.stochastic_volatility);
      spec.beta_scale = j.value("beta_scale", spec.beta_scale);
      spec.sigma_h = j.value("sigma_h", spec.sigma_h);
      spec.sqrt_theta_scale = j.value("sqrt_theta_scale", spec.sqrt_theta_scale);
      spec.sqrt_sigma_scale = j.value("sqrt_sigma_scale", spec.sqrt_sigma_scale);
      spec.own_lag = j.value("own_lag", spec.own_lag);
      spec.cross_scale = j.value("cross_scale", spec.cross_scale);
      spec.loading_scale = j.value("loading_scale", spec.loading_scale);
    } catch (const json::exception& e) {
      throw UserError("synthetic config " + c.config + ": " + e.what());
    }
  }
  const std::uint64_t seed = c.seed.value_or(1);
  const SyntheticData syn = generate_synthetic(spec, seed);
  const fs::path out = c.out.empty() ? fs::path("synthetic") : fs::path(c.out);
  fs::create_directories(out);
  write_text_atomic(out / "panel.csv", panel_to_csv(syn.panel));
  write_text_atomic(out / "trade.csv", trade_to_csv(syn.panel.trade_flows, syn.panel.countries));
  write_text_atomic(out / "truth.json", json{{"seed", seed}, {"resamples", syn.resamples}, {"state", to_json(syn.truth)}}.dump() + "\n");
  const json run{{"data", {{"panel", "panel.csv"}, {"trade", "trade.csv"}}},
                 {"model", {{"P", spec.dims.P}, {"Q", spec.dims.Q}, {"d", spec.dims.d}, {"sigma_h", spec.sigma_h}}},
                 {"mcmc", {{"seed", seed}}},
                 {"output_dir", "fit"}};
  write_text_atomic(out / "config.json", run.dump(2) + "\n");
  note(c, "wrote synthetic panel to " + out.string());
  return 0;
}

struct FetchArgs {
  std::string series, start, end, endpoint, country, variable, cache;
  bool network = false;
};

int cmd_fetch(const Common& c, const FetchArgs& a) {
  FetchRequest req{a.series, a.start, a.end, a.endpoint, a.network, a.cache};
  const FetchResult r = fetch_remote_series(req);
  note(c, std::string(r.cache_hit ? "cache hit: " : "downloaded: ") + r.path.string());
  if (!a.country.empty() || !a.variable.empty()) {
    if (a.country.empty() || a.variable.empty()) throw UserError("fetch: --country and --variable go together");
    const fs::path out = c.out.empty() ? fs::path(".") : fs::path(c.out);
    fs::create_directories(out);
    const fs::path dest = out / (a.country + "_" + a.variable + ".csv");
    write_text_atomic(dest, pivot_series_csv(read_text(r.path), a.country, a.variable));
    note(c, "wrote " + dest.string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Global VAR with time-varying coefficients and factor stochastic volatility in mean"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run configuration (JSON)");
    sub->add_option("--seed", common.seed, "Override the random seed");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--chains", common.chains, "Number of chains");
    sub->add_flag("--quiet", common.quiet, "Suppress progress output");
    sub->add_option("--resume", common.resume, "Resume from a checkpoint file (or a directory of them)");
  };

  auto* fit = app.add_subcommand("fit", "Run the sampler and persist the retained draws");
  auto* irf = app.add_subcommand("irf", "Impulse responses to an uncertainty shock");
  auto* dic = app.add_subcommand("dic", "Deviance information criterion over a specification grid");
  auto* unc = app.add_subcommand("uncertainty", "Posterior bands of the uncertainty measure");
  auto* shr = app.add_subcommand("shrinkage", "Shrinkage diagnostics (mean log prior scales)");
  auto* syn = app.add_subcommand("synth", "Write a synthetic dataset and its true parameters");
  auto* fet = app.add_subcommand("fetch", "Download one remote series into the cache");
  for (auto* s : {fit, irf, dic, unc, shr, syn, fet}) add_common(s);

  int horizon = 0;
  std::string in;
  irf->add_option("--horizon", horizon, "Horizon in periods (default from config)");
  for (auto* s : {irf, unc, shr}) s->add_option("--in", in, "Directory of fitted chains (default: the config output_dir)");

  FetchArgs fa;
  fet->add_option("--series", fa.series, "Series identifier")->required();
  fet->add_option("--start", fa.start, "First date (YYYY-MM or YYYY-MM-DD)");
  fet->add_option("--end", fa.end, "Last date");
  fet->add_option("--endpoint", fa.endpoint, "URL template with {id}, {start}, {end}");
  fet->add_option("--country", fa.country, "Country code for the pivoted panel rows");
  fet->add_option("--variable", fa.variable, "Variable name for the pivoted panel rows");
  fet->add_option("--cache-dir", fa.cache, "Cache directory (default $GVARSV_CACHE_DIR or ./.gvarsv_cache)");
  fet->add_flag("--network", fa.network, "Allow network access on a cache miss");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << "error[usage]: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*fit) return cmd_fit(common);
    if (*irf) return cmd_irf(common, horizon, in);
    if (*dic) return cmd_dic(common);
    if (*unc) return cmd_uncertainty(common, in);
    if (*shr) return cmd_shrinkage(common, in);
    if (*syn) return cmd_synth(common);
    if (*fet) return cmd_fetch(common, fa);
  } catch (const UserError& e) {
    std::cerr << "error[user]: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error[numerical]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
