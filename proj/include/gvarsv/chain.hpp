#ifndef GVARSV_CHAIN_HPP
#define GVARSV_CHAIN_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/io/serialize.hpp"
#include "gvarsv/model.hpp"
#include "gvarsv/sampler.hpp"

namespace gvarsv {

/// Running sums for the deviance information criterion: mean deviance and the
/// posterior means entering the plug-in deviance (effective coefficient paths,
/// h, and the per-period error covariance, which is invariant to factor rotation).
struct DevianceAccumulator {
  int draws = 0;
  double sum_deviance = 0.0;
  std::vector<Eigen::MatrixXd> sum_coef;  // per equation, T_eff x Ktilde
  Eigen::VectorXd sum_h;
  std::vector<Eigen::MatrixXd> sum_cov;   // per period, K x K

  void add(const Model& model, const ParameterState& s) {
    const auto& dims = model.dims();
    if (draws == 0) {
      sum_coef.assign(dims.K(), Eigen::MatrixXd::Zero(dims.T_eff(), dims.Ktilde()));
      sum_h = Eigen::VectorXd::Zero(dims.T_eff());
      sum_cov.assign(dims.T_eff(), Eigen::MatrixXd::Zero(dims.K(), dims.K()));
    }
    sum_deviance += -2.0 * log_likelihood(model, s);
    for (int r = 0; r < dims.K(); ++r) sum_coef[r] += s.coef.effective_path(r);
    sum_h += s.vol.h;
    for (int t = 0; t < dims.T_eff(); ++t) sum_cov[t] += s.fac.error_covariance(t, s.vol);
    ++draws;
  }

  double mean_deviance() const { return sum_deviance / draws; }

  /// Deviance at the posterior means.
  double plugin_deviance(const Model& model) const {
    const auto& dims = model.dims();
    const double n = draws;
    const Eigen::VectorXd h = sum_h / n;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    Eigen::MatrixXd fit(dims.T_eff(), dims.K());
    for (int i = 0; i < dims.N; ++i) {
      const Eigen::MatrixXd x = model.design_with_h(i, h);
      for (int j = 0; j < dims.k; ++j) {
        const int r = i * dims.k + j;
        fit.col(r) = x.cwiseProduct(sum_coef[r] / n).rowwise().sum();
      }
    }
    double dev = 0.0;
    for (int t = 0; t < dims.T_eff(); ++t) {
      const Eigen::LLT<Eigen::MatrixXd> llt(sum_cov[t] / n);
      if (llt.info() != Eigen::Success) throw NumericalError("plug-in covariance not positive definite");
      const Eigen::VectorXd e = (model.target().row(t) - fit.row(t)).transpose();
      dev += dims.K() * log2pi + 2.0 * llt.matrixLLT().diagonal().array().log().sum() + llt.matrixL().solve(e).squaredNorm();
    }
    return dev;
  }
};

struct AcceptanceSummary {
  std::array<double, kFamilyCount> a_post_tuning_burn{};  // sweeps (n_burn/2, n_burn]
  std::array<double, kFamilyCount> a_sampling{};          // sweeps (n_burn, n_iter]
  std::array<double, kFamilyCount> kappa{};               // final proposal variances
  double h_rate = 0.0;
};

struct DicSummary {
  double dbar = 0.0;   // posterior mean deviance
  double dhat = 0.0;   // deviance at posterior means
  double pd() const { return dbar - dhat; }
  double dic() const { return dbar + pd(); }
};

/// Retained draws of one chain plus provenance.
struct PosteriorChain {
  std::uint64_t seed = 0;
  std::uint64_t chain_index = 0;
  std::string spec_hash;
  Dimensions dims;
  ModelSpec spec;
  McmcConfig config;
  Eigen::MatrixXd weights;
  std::vector<std::string> countries;
  std::vector<std::string> variables;
  std::vector<std::string> dates;  // labels of effective periods, may be empty
  std::vector<ParameterState> draws;
  AcceptanceSummary acceptance;
  DicSummary dic;
  bool complete = false;
};

inline std::string compute_spec_hash(const Model& model, const McmcConfig& config) {
  json j{{"dims", to_json(model.dims())}, {"spec", to_json(model.spec())}};
  j["mcmc"] = {{"n_iter", config.n_iter},
               {"n_burn", config.n_burn},
               {"thin", config.thin},
               {"seed", config.seed},
               {"impact_prior_variance", config.impact_prior_variance},
               {"impact_sqrttheta_prior_variance", config.impact_sqrttheta_prior_variance}};
  const std::string text = j.dump();
  std::uint64_t h = fnv1a64(text.data(), text.size());
  const auto& y = model.data().y;
  h = fnv1a64(y.data(), static_cast<std::size_t>(y.size()) * sizeof(double), h);
  const auto& w = model.data().trade_flows;
  h = fnv1a64(w.data(), static_cast<std::size_t>(w.size()) * sizeof(double), h);
  return hex64(h);
}

/// Everything needed to continue a chain exactly where it stopped.
struct ChainProgress {
  int next_sweep = 1;
  ParameterState state;
  std::array<int, kFamilyCount> window_accepts{};
  std::array<int, kFamilyCount> burn_accepts{};
  std::array<int, kFamilyCount> sampling_accepts{};
  long long h_accepted = 0;
  long long h_proposed = 0;
  DevianceAccumulator deviance;
  std::vector<ParameterState> retained;
};

inline json to_json(const DevianceAccumulator& d) {
  json coef = json::array(), cov = json::array();
  for (const auto& m : d.sum_coef) coef.push_back(matrix_to_json(m));
  for (const auto& m : d.sum_cov) cov.push_back(matrix_to_json(m));
  return json{{"draws", d.draws},
              {"sum_deviance", d.sum_deviance},
              {"sum_coef", std::move(coef)},
              {"sum_h", vector_to_json(d.sum_h)},
              {"sum_cov", std::move(cov)}};
}

inline DevianceAccumulator deviance_from_json(const json& j) {
  DevianceAccumulator d;
  d.draws = j.at("draws").get<int>();
  d.sum_deviance = j.at("sum_deviance").get<double>();
  for (const auto& m : j.at("sum_coef")) d.sum_coef.push_back(matrix_from_json(m));
  d.sum_h = vector_from_json(j.at("sum_h"));
  for (const auto& m : j.at("sum_cov")) d.sum_cov.push_back(matrix_from_json(m));
  return d;
}

inline constexpr const char* kCheckpointFormat = "gvarsv-checkpoint";

/// Checkpoint: CBOR encoding of a JSON document holding the progress, the sweep
/// counter and the spec hash. Random streams are derived from (seed, sweep), so
/// no generator state is stored.
inline void write_checkpoint(const std::filesystem::path& path, const std::string& spec_hash, const ChainProgress& p,
                             const std::string& diagnostics = {}) {
  json retained = json::array();
  for (const auto& s : p.retained) retained.push_back(to_json(s));
  json j{{"format", kCheckpointFormat},
         {"version", 1},
         {"spec_hash", spec_hash},
         {"next_sweep", p.next_sweep},
         {"state", to_json(p.state)},
         {"window_accepts", p.window_accepts},
         {"burn_accepts", p.burn_accepts},
         {"sampling_accepts", p.sampling_accepts},
         {"h_accepted", p.h_accepted},
         {"h_proposed", p.h_proposed},
         {"deviance", to_json(p.deviance)},
         {"retained", std::move(retained)}};
  if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
  const auto bytes = json::to_cbor(j);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, bytes.data(), bytes.size());
}

inline ChainProgress read_checkpoint(const std::filesystem::path& path, const std::string& expected_hash) {
  json j;
  try {
    j = json::from_cbor(read_binary(path));
  } catch (const json::exception& e) {
    throw UserError("checkpoint " + path.string() + " is not readable: " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) throw UserError(path.string() + " is not a checkpoint");
  if (j.at("spec_hash").get<std::string>() != expected_hash)
    throw UserError("checkpoint " + path.string() + " was written for a different data set or configuration");
  if (j.contains("diagnostics"))
    throw UserError("checkpoint " + path.string() + " records a failed run: " + j["diagnostics"].get<std::string>());
  ChainProgress p;
  p.next_sweep = j.at("next_sweep").get<int>();
  p.state = state_from_json(j.at("state"));
  p.window_accepts = j.at("window_accepts").get<std::array<int, kFamilyCount>>();
  p.burn_accepts = j.at("burn_accepts").get<std::array<int, kFamilyCount>>();
  p.sampling_accepts = j.at("sampling_accepts").get<std::array<int, kFamilyCount>>();
  p.h_accepted = j.at("h_accepted").get<long long>();
  p.h_proposed = j.at("h_proposed").get<long long>();
  p.deviance = deviance_from_json(j.at("deviance"));
  for (const auto& s : j.at("retained")) p.retained.push_back(state_from_json(s));
  return p;
}

struct RunOptions {
  std::uint64_t chain_index = 0;
  std::filesystem::path checkpoint_path;       // written every config.checkpoint_every sweeps and on failure
  std::optional<std::filesystem::path> resume;  // continue from this checkpoint
  std::optional<int> halt_after;                // stop (with a checkpoint) after this sweep
  std::function<void(int sweep, int n_iter)> progress;
  StepObserver observer;
};

/// Runs n_iter sweeps, tunes the a-proposals every kKappaWindow sweeps during the
/// first half of burn-in, and keeps every thin-th sweep after burn-in.
inline PosteriorChain run_chain(const Model& model, const McmcConfig& config, const RunOptions& opt = {}) {
  config.validate();
  const std::string hash = compute_spec_hash(model, config);
  const std::uint64_t chain_seed = config.seed;

  ChainProgress p;
  if (opt.resume) {
    p = read_checkpoint(*opt.resume, hash);
    p.state.check_invariants(model.dims());
  } else {
    p.state = initialize_state(model, chain_seed, opt.chain_index);
  }

  const int tuning_end = config.tuning_end();
  for (int sweep = p.next_sweep; sweep <= config.n_iter; ++sweep) {
    SweepStats stats;
    try {
      stats = gibbs_sweep(model, p.state, config, opt.chain_index, static_cast<std::uint64_t>(sweep), opt.observer);
      p.state.check_invariants(model.dims());
    } catch (const NumericalError& e) {
      if (!opt.checkpoint_path.empty()) {
        p.next_sweep = sweep;
        write_checkpoint(opt.checkpoint_path, hash, p, e.what());
      }
      throw;
    }

    for (int f = 0; f < kFamilyCount; ++f) {
      const int acc = stats.a_accepted[f] ? 1 : 0;
      if (sweep <= tuning_end) p.window_accepts[f] += acc;
      else if (sweep <= config.n_burn) p.burn_accepts[f] += acc;
      else p.sampling_accepts[f] += acc;
    }
    p.h_accepted += stats.h_accepted;
    p.h_proposed += stats.h_proposed;

    if (sweep <= tuning_end && sweep % kKappaWindow == 0) {
      for (int f = 0; f < kFamilyCount; ++f) {
        auto& fam = p.state.families[f];
        fam.kappa = tune_kappa(fam.kappa, static_cast<double>(p.window_accepts[f]) / kKappaWindow);
        p.window_accepts[f] = 0;
      }
    }

    if (sweep > config.n_burn && (sweep - config.n_burn) % config.thin == 0 &&
        static_cast<int>(p.retained.size()) < config.retained()) {
      p.retained.push_back(p.state);
      p.deviance.add(model, p.state);
    }

    p.next_sweep = sweep + 1;
    if (opt.progress) opt.progress(sweep, config.n_iter);
    const bool halt = opt.halt_after && sweep == *opt.halt_after;
    if (!opt.checkpoint_path.empty() &&
        (halt || (config.checkpoint_every > 0 && sweep % config.checkpoint_every == 0 && sweep < config.n_iter)))
      write_checkpoint(opt.checkpoint_path, hash, p);
    if (halt && sweep < config.n_iter) break;
  }

  PosteriorChain chain;
  chain.seed = config.seed;
  chain.chain_index = opt.chain_index;
  chain.spec_hash = hash;
  chain.dims = model.dims();
  chain.spec = model.spec();
  chain.config = config;
  chain.weights = model.weights().matrix();
  chain.countries = model.data().countries;
  chain.variables = model.data().variables;
  if (!model.data().dates.empty())
    chain.dates.assign(model.data().dates.begin() + model.dims().max_lag(), model.data().dates.end());
  chain.complete = p.next_sweep > config.n_iter;
  const int burn_len = config.n_burn - tuning_end;
  const int sampling_len = config.n_iter - config.n_burn;
  for (int f = 0; f < kFamilyCount; ++f) {
    chain.acceptance.a_post_tuning_burn[f] = burn_len > 0 ? static_cast<double>(p.burn_accepts[f]) / burn_len : 0.0;
    chain.acceptance.a_sampling[f] = sampling_len > 0 ? static_cast<double>(p.sampling_accepts[f]) / sampling_len : 0.0;
    chain.acceptance.kappa[f] = p.state.families[f].kappa;
  }
  chain.acceptance.h_rate = p.h_proposed > 0 ? static_cast<double>(p.h_accepted) / p.h_proposed : 0.0;
  if (chain.complete && p.deviance.draws > 0) {
    chain.dic.dbar = p.deviance.mean_deviance();
    chain.dic.dhat = p.deviance.plugin_deviance(model);
  }
  chain.draws = std::move(p.retained);
  return chain;
}

}  // namespace gvarsv

#endif  // GVARSV_CHAIN_HPP
