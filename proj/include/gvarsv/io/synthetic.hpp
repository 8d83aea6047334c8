#ifndef GVARSV_IO_SYNTHETIC_HPP
#define GVARSV_IO_SYNTHETIC_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/model.hpp"
#include "gvarsv/panel_model.hpp"
#include "gvarsv/rng.hpp"

namespace gvarsv {

/// Data-generating process for simulation studies. Unset optional truths are
/// drawn from the generation law below; set ones are used verbatim.
struct SyntheticSpec {
  Dimensions dims{3, 2, 2, 2, 2, 200};
  bool time_varying = true;
  bool stochastic_volatility = true;
  double beta_scale = 0.5;        // sd of the impact coefficients
  double sigma_h = 0.2;           // state variance of h
  double sqrt_theta_scale = 0.01; // |sqrt(theta)| magnitude when time-varying
  double sqrt_sigma_scale = 0.3;  // |sqrt(sigma_omega)| magnitude with SV
  double own_lag = 0.5;           // first own-lag coefficient
  double cross_scale = 0.05;      // sd of the remaining lag coefficients
  double intercept_scale = 0.1;
  double loading_scale = 0.5;
  double omega_level = std::log(0.1);
  int max_resamples = 100;
  double max_spectral_radius = 0.98;

  std::optional<Eigen::MatrixXd> trade_flows;  // N x N
  std::optional<Eigen::MatrixXd> c0;           // K x Ktilde
  std::optional<Eigen::MatrixXd> loadings;     // K x d
};

struct SyntheticData {
  PanelData panel;
  ParameterState truth;
  int resamples = 0;
};

inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Simulates y from the model forward: h, omega and coefficient random walks,
/// factors with variance exp(h), then y recursively. The first max_lag rows
/// are presample draws around the intercept. Coefficients are redrawn until the
/// stacked companion matrix has spectral radius below the guard at every period.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  Dimensions dims = spec.dims;
  dims.validate();
  const int N = dims.N, k = dims.k, K = dims.K(), Kt = dims.Ktilde(), d = dims.d, T = dims.T_eff(), L = dims.max_lag();
  if (spec.c0 && (spec.c0->rows() != K || spec.c0->cols() != Kt)) throw UserError("synthetic: c0 must be K x Ktilde");
  if (spec.loadings && (spec.loadings->rows() != K || spec.loadings->cols() != d)) throw UserError("synthetic: loadings must be K x d");
  if (!(spec.sigma_h > 0.0)) throw UserError("synthetic: sigma_h must be positive");

  SyntheticData out;
  PanelData& p = out.panel;
  for (int i = 0; i < N; ++i) p.countries.push_back("C" + std::to_string(i + 1));
  for (int j = 0; j < k; ++j) p.variables.push_back("v" + std::to_string(j + 1));

  Rng trade_rng = Rng::stream(seed, {0xD1, 0});
  if (spec.trade_flows) {
    p.trade_flows = *spec.trade_flows;
  } else {
    p.trade_flows = Eigen::MatrixXd::Zero(N, N);
    if (N > 1)
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          if (i != j) p.trade_flows(i, j) = 0.5 + trade_rng.uniform();
  }
  const LinkWeights w = build_weights(p.trade_flows);

  ParameterState& s = out.truth;
  s.vol.sigma_h = spec.sigma_h;

  // Coefficients, resampled until every period's system is stable.
  bool stable = false;
  for (int attempt = 0; attempt < spec.max_resamples && !stable; ++attempt) {
    Rng rng = Rng::stream(seed, {0xD1, 1, static_cast<std::uint64_t>(attempt)});
    if (spec.c0) {
      s.coef.c0 = *spec.c0;
    } else {
      s.coef.c0 = Eigen::MatrixXd::Zero(K, Kt);
      for (int r = 0; r < K; ++r) {
        const int j = r % k;
        s.coef.c0(r, dims.intercept_index()) = rng.normal(0.0, spec.intercept_scale);
        for (int l = 1; l < dims.impact_index(); ++l) s.coef.c0(r, l) = rng.normal(0.0, spec.cross_scale);
        s.coef.c0(r, dims.domestic_index(1, j)) = spec.own_lag;
        s.coef.c0(r, dims.impact_index()) = rng.normal(0.0, spec.beta_scale);
      }
    }
    s.coef.sqrt_theta = Eigen::MatrixXd::Zero(K, Kt);
    s.coef.c_tilde.assign(K, Eigen::MatrixXd::Zero(T, Kt));
    if (spec.time_varying) {
      for (int r = 0; r < K; ++r)
        for (int l = 0; l < Kt; ++l) s.coef.sqrt_theta(r, l) = spec.sqrt_theta_scale * (0.5 + rng.uniform());
      for (int r = 0; r < K; ++r)
        for (int l = 0; l < Kt; ++l) {
          double c = 0.0;
          for (int t = 0; t < T; ++t) s.coef.c_tilde[r](t, l) = c += rng.normal();
        }
    }
    stable = true;
    for (int t = 0; t < T && stable; ++t) {
      if (!spec.time_varying && t > 0) break;
      stable = spectral_radius(stack_global_system(s.coef.effective_at(t), w, dims).companion()) < spec.max_spectral_radius;
    }
    out.resamples = attempt;
  }
  if (!stable)
    throw UserError("synthetic: no stable coefficient draw within " + std::to_string(spec.max_resamples) + " resamples");

  Rng rng = Rng::stream(seed, {0xD1, 2});
  s.vol.h.resize(T);
  double h = 0.0;
  for (int t = 0; t < T; ++t) s.vol.h(t) = h += std::sqrt(spec.sigma_h) * rng.normal();

  s.vol.omega_level = Eigen::VectorXd::Constant(K, spec.omega_level);
  s.vol.sqrt_sigma_omega = Eigen::VectorXd::Zero(K);
  s.vol.omega_tilde = Eigen::MatrixXd::Zero(T, K);
  if (spec.stochastic_volatility) {
    for (int r = 0; r < K; ++r) s.vol.sqrt_sigma_omega(r) = spec.sqrt_sigma_scale * (0.5 + rng.uniform());
    for (int r = 0; r < K; ++r) {
      double c = 0.0;
      for (int t = 0; t < T; ++t) s.vol.omega_tilde(t, r) = c += rng.normal();
    }
  }

  if (spec.loadings) {
    s.fac.loadings = *spec.loadings;
  } else {
    s.fac.loadings.resize(K, d);
    for (int r = 0; r < K; ++r)
      for (int m = 0; m < d; ++m) s.fac.loadings(r, m) = rng.normal(0.0, spec.loading_scale);
  }
  s.fac.factors.resize(T, d);
  for (int t = 0; t < T; ++t)
    for (int m = 0; m < d; ++m) s.fac.factors(t, m) = std::exp(0.5 * s.vol.h(t)) * rng.normal();

  p.y.resize(dims.T, K);
  for (int t = 0; t < L; ++t)
    for (int r = 0; r < K; ++r) p.y(t, r) = s.coef.c0(r, 0) + std::exp(0.5 * spec.omega_level) * rng.normal();
  for (int t = 0; t < T; ++t) {
    const int row = t + L;
    const Eigen::VectorXd eps_common = s.fac.loadings * s.fac.factors.row(t).transpose();
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd x = build_regressor(p.y, w, dims, i, row, s.vol.h(t));
      for (int j = 0; j < k; ++j) {
        const int r = i * k + j;
        double mean = 0.0;
        for (int l = 0; l < Kt; ++l) mean += s.coef.effective(r, t, l) * x(l);
        p.y(row, r) = mean + eps_common(r) + std::exp(0.5 * s.vol.omega(t, r)) * rng.normal();
      }
    }
    if (!p.y.row(row).allFinite()) throw NumericalError("synthetic: simulated path diverged");
  }
  for (int t = 0; t < dims.T; ++t) {
    const int m = 2000 * 12 + t;
    p.dates.push_back(std::to_string(m / 12) + "-" + (m % 12 + 1 < 10 ? "0" : "") + std::to_string(m % 12 + 1));
  }

  // Hyperparameter blocks are filled with neutral values so the truth is a
  // complete state.
  const int kK = k * Kt;
  s.mu_c = Eigen::VectorXd::Zero(kK);
  s.mu_theta = Eigen::VectorXd::Zero(kK);
  const std::array<Eigen::Index, kFamilyCount> sizes{kK, kK, kK, kK, K, static_cast<Eigen::Index>(K) * d};
  for (int f = 0; f < kFamilyCount; ++f) s.families[f] = NgFamilyState::make(kAllFamilies[f], sizes[f]);
  p.validate();
  return out;
}

}  // namespace gvarsv

#endif  // GVARSV_IO_SYNTHETIC_HPP
