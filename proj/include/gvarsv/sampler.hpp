#ifndef GVARSV_SAMPLER_HPP
#define GVARSV_SAMPLER_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/kalman.hpp"
#include "gvarsv/mixture.hpp"
#include "gvarsv/model.hpp"
#include "gvarsv/panel_model.hpp"
#include "gvarsv/rng.hpp"
#include "gvarsv/shrinkage.hpp"

namespace gvarsv {

// ---------------------------------------------------------------------------
// Gaussian linear-regression draws
// ---------------------------------------------------------------------------

struct RegressionMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Posterior N((X'X + V^-1)^-1 (X'y + V^-1 m), (X'X + V^-1)^-1) for a diagonal prior
/// N(m, diag(v)) and unit-variance (already standardized) observations.
struct GaussianRegression {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  Eigen::VectorXd prior_mean;
  Eigen::VectorXd prior_var;

  Eigen::MatrixXd precision() const {
    Eigen::MatrixXd q = design.transpose() * design;
    q.diagonal().array() += prior_var.array().inverse();
    return q;
  }
  Eigen::VectorXd rhs() const {
    return design.transpose() * response + (prior_mean.array() / prior_var.array()).matrix();
  }

  RegressionMoments moments() const {
    const Eigen::LLT<Eigen::MatrixXd> llt(precision());
    if (llt.info() != Eigen::Success) throw NumericalError("regression: posterior precision not positive definite");
    RegressionMoments m;
    m.mean = llt.solve(rhs());
    m.cov = llt.solve(Eigen::MatrixXd::Identity(prior_var.size(), prior_var.size()));
    return m;
  }

  Eigen::VectorXd draw(Rng& rng) const {
    if (!design.allFinite() || !response.allFinite()) throw NumericalError("regression: non-finite design or response");
    const Eigen::LLT<Eigen::MatrixXd> llt(precision());
    if (llt.info() != Eigen::Success) throw NumericalError("regression: posterior precision not positive definite");
    Eigen::VectorXd z(prior_var.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
    Eigen::VectorXd out = llt.solve(rhs());
    out += llt.matrixU().solve(z);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Step 1: constant coefficients and signed sqrt state variances, per equation
// ---------------------------------------------------------------------------

inline double clamp_tau(double tau, const ModelSpec& spec) { return std::clamp(tau, spec.tau_floor, spec.tau_ceiling); }

/// Augmented regression of equation eq: rows [x_t', (c~_t o x_t)'] exp(-omega_t/2) on
/// (y_t - L f_t) exp(-omega_t/2), prior from the common means and c/theta local
/// scales, except the impact entries which take the fixed impact prior.
inline GaussianRegression coefficient_regression(const Model& model, const ParameterState& s, int eq,
                                                 const McmcConfig& config) {
  const auto& dims = model.dims();
  const int i = eq / dims.k, j = eq % dims.k, Kt = dims.Ktilde(), T = dims.T_eff();
  const Eigen::MatrixXd x = model.design_with_h(i, s.vol.h);
  const Eigen::VectorXd w = (-0.5 * (s.vol.omega_level(eq) + s.vol.sqrt_sigma_omega(eq) * s.vol.omega_tilde.col(eq).array())).exp();

  GaussianRegression reg;
  reg.design.resize(T, 2 * Kt);
  reg.design.leftCols(Kt) = x.array().colwise() * w.array();
  reg.design.rightCols(Kt) = s.coef.c_tilde[eq].cwiseProduct(x).array().colwise() * w.array();
  reg.response = (model.target().col(eq) - s.fac.factors * s.fac.loadings.row(eq).transpose()).cwiseProduct(w);

  const auto& tau_c = s.family(Family::kC).tau;
  const auto& tau_t = s.family(Family::kTheta).tau;
  reg.prior_mean.resize(2 * Kt);
  reg.prior_var.resize(2 * Kt);
  for (int l = 0; l < Kt; ++l) {
    const int idx = j * Kt + l;
    reg.prior_mean(l) = s.mu_c(idx);
    reg.prior_var(l) = clamp_tau(tau_c(idx), model.spec());
    reg.prior_mean(Kt + l) = s.mu_theta(idx);
    reg.prior_var(Kt + l) = clamp_tau(tau_t(idx), model.spec());
  }
  const int b = dims.impact_index();
  reg.prior_mean(b) = 0.0;
  reg.prior_var(b) = config.impact_prior_variance;
  reg.prior_mean(Kt + b) = 0.0;
  reg.prior_var(Kt + b) = config.impact_sqrttheta_prior_variance;
  return reg;
}

inline void draw_constant_and_sqrttheta(const Model& model, ParameterState& s, int eq, const McmcConfig& config,
                                        Rng& rng) {
  const int Kt = model.dims().Ktilde();
  GaussianRegression reg = coefficient_regression(model, s, eq, config);
  if (!reg.design.allFinite() || !reg.response.allFinite())
    throw NumericalError("draw_constant_and_sqrttheta: non-finite design in equation (" +
                         std::to_string(eq / model.dims().k) + "," + std::to_string(eq % model.dims().k) + ")");
  const Eigen::VectorXd d = reg.draw(rng);
  s.coef.c0.row(eq) = d.head(Kt).transpose();
  s.coef.sqrt_theta.row(eq) = d.tail(Kt).transpose();
}

// ---------------------------------------------------------------------------
// Step 2: standardized coefficient paths
// ---------------------------------------------------------------------------

/// y~_t - C0'x_t = (sqrt(Theta) x_t)' C~_t + eta_t, Var(eta_t) = exp(omega_t).
inline RandomWalkModel tilde_state_space(const Model& model, const ParameterState& s, int eq) {
  const int i = eq / model.dims().k;
  const Eigen::MatrixXd x = model.design_with_h(i, s.vol.h);
  RandomWalkModel m;
  m.z = model.target().col(eq) - s.fac.factors * s.fac.loadings.row(eq).transpose() - x * s.coef.c0.row(eq).transpose();
  m.design = x.array().rowwise() * s.coef.sqrt_theta.row(eq).array();
  m.obs_var = (s.vol.omega_level(eq) + s.vol.sqrt_sigma_omega(eq) * s.vol.omega_tilde.col(eq).array()).exp();
  return m;
}

inline void ffbs_tilde_path(const Model& model, ParameterState& s, int eq, Rng& rng) {
  s.coef.c_tilde[eq] = ffbs_random_walk(tilde_state_space(model, s, eq), rng);
}

// ---------------------------------------------------------------------------
// Step 3: common means and the c / theta hierarchies
// ---------------------------------------------------------------------------

/// N x (k*Ktilde) matrix: row i stacks the rows of `coef` belonging to country i.
inline Eigen::MatrixXd stack_by_country(const Eigen::MatrixXd& coef, const Dimensions& dims) {
  const int Kt = dims.Ktilde();
  Eigen::MatrixXd out(dims.N, dims.k * Kt);
  for (int i = 0; i < dims.N; ++i)
    for (int j = 0; j < dims.k; ++j) out.block(i, j * Kt, 1, Kt) = coef.row(i * dims.k + j);
  return out;
}

/// Order within a family: mu -> tau_s -> lambda_s -> tau_mu -> lambda_mu.
inline void update_coefficient_hierarchy(const Model& model, ParameterState& s, bool theta_family, Rng& rng) {
  const auto& dims = model.dims();
  const auto& spec = model.spec();
  const Family fam_id = theta_family ? Family::kTheta : Family::kC;
  const Family mu_id = theta_family ? Family::kMuTheta : Family::kMuC;
  Eigen::VectorXd& mu = theta_family ? s.mu_theta : s.mu_c;
  NgFamilyState& fam = s.family(fam_id);
  NgFamilyState& fam_mu = s.family(mu_id);

  const Eigen::MatrixXd coef = stack_by_country(theta_family ? s.coef.sqrt_theta : s.coef.c0, dims);
  mu = update_common_mean(coef, fam.tau, fam_mu.tau, rng);

  const Eigen::VectorXd chi = (coef.rowwise() - mu.transpose()).colwise().squaredNorm().transpose();
  update_local_scales(fam, chi, dims.N, rng);
  fam.tau = fam.tau.unaryExpr([&](double t) { return clamp_tau(t, spec); });
  fam.lambda = update_global_lambda(fam, rng);

  update_local_scales(fam_mu, mu.array().square().matrix(), 1.0, rng);
  fam_mu.tau = fam_mu.tau.unaryExpr([&](double t) { return clamp_tau(t, spec); });
  fam_mu.lambda = update_global_lambda(fam_mu, rng);
}

// ---------------------------------------------------------------------------
// Step 4: idiosyncratic stochastic volatility (mixture sampler, non-centered)
// ---------------------------------------------------------------------------

struct SvDraw {
  Eigen::VectorXd omega_tilde;
  double sqrt_sigma = 0.0;
  double level = 0.0;
  std::vector<int> indicators;

  Eigen::VectorXd log_variance() const { return (level + sqrt_sigma * omega_tilde.array()).matrix(); }
};

/// One update of a single series' log-variance path from residuals eta:
/// mixture indicators, then the standardized path by FFBS, then (level, sqrt sigma)
/// as regression coefficients of the transformed residuals on (1, omega~).
inline SvDraw draw_idiosyncratic_sv(const Eigen::VectorXd& eta, double offset, const SvDraw& current,
                                    double tau_sigma, double level_prior_var, Rng& rng) {
  const auto T = eta.size();
  const Eigen::VectorXd eta_tilde = (eta.array().square() + offset).log();
  SvDraw next;
  next.indicators.resize(T);

  std::array<double, kLogChi2Mixture.size()> w{};
  Eigen::VectorXd mix_mean(T), mix_var(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double resid = eta_tilde(t) - current.level - current.sqrt_sigma * current.omega_tilde(t);
    double total = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) {
      const auto& comp = kLogChi2Mixture[c];
      const double e = resid - comp.mean;
      w[c] = comp.prob / std::sqrt(comp.variance) * std::exp(-0.5 * e * e / comp.variance);
      total += w[c];
    }
    int pick = static_cast<int>(w.size()) - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t c = 0; c < w.size(); ++c) {
        u -= w[c];
        if (u <= 0.0) {
          pick = static_cast<int>(c);
          break;
        }
      }
    } else {
      // Far tail: every weight underflowed. Pick the component closest in scaled distance.
      double best = INFINITY;
      for (std::size_t c = 0; c < w.size(); ++c) {
        const auto& comp = kLogChi2Mixture[c];
        const double dist = std::abs(resid - comp.mean) / std::sqrt(comp.variance);
        if (dist < best) {
          best = dist;
          pick = static_cast<int>(c);
        }
      }
      (void)rng.uniform();
    }
    next.indicators[t] = pick;
    mix_mean(t) = kLogChi2Mixture[pick].mean;
    mix_var(t) = kLogChi2Mixture[pick].variance;
  }

  const Eigen::VectorXd z = eta_tilde - mix_mean - Eigen::VectorXd::Constant(T, current.level);
  next.omega_tilde = ffbs_scalar_random_walk(z, Eigen::VectorXd::Constant(T, current.sqrt_sigma), mix_var, rng);

  GaussianRegression reg;
  const Eigen::ArrayXd scale = mix_var.array().rsqrt();
  reg.design.resize(T, 2);
  reg.design.col(0) = scale.matrix();
  reg.design.col(1) = (next.omega_tilde.array() * scale).matrix();
  reg.response = ((eta_tilde - mix_mean).array() * scale).matrix();
  reg.prior_mean = Eigen::Vector2d::Zero();
  reg.prior_var = Eigen::Vector2d(level_prior_var, tau_sigma);
  const Eigen::VectorXd coef = reg.draw(rng);
  next.level = coef(0);
  next.sqrt_sigma = coef(1);
  return next;
}

// ---------------------------------------------------------------------------
// Step 5: loadings and factors
// ---------------------------------------------------------------------------

/// Row r of L from the regression of eps_r on f with variances exp(omega_r),
/// prior N(0, diag(tau_L[r*d .. r*d+d-1])).
inline Eigen::MatrixXd draw_loadings(const Eigen::MatrixXd& eps, const Eigen::MatrixXd& factors,
                                     const Eigen::MatrixXd& omega, const Eigen::VectorXd& tau_l, Rng& rng) {
  const auto K = eps.cols(), d = factors.cols();
  Eigen::MatrixXd loadings(K, d);
  for (Eigen::Index r = 0; r < K; ++r) {
    const Eigen::ArrayXd w = (-0.5 * omega.col(r).array()).exp();
    GaussianRegression reg;
    reg.design = factors.array().colwise() * w;
    reg.response = (eps.col(r).array() * w).matrix();
    reg.prior_mean = Eigen::VectorXd::Zero(d);
    reg.prior_var = tau_l.segment(r * d, d);
    loadings.row(r) = reg.draw(rng).transpose();
  }
  return loadings;
}

/// f_t | . ~ N(B L' Omega^-1 eps_t, B), B = (L' Omega^-1 L + exp(-h_t) I)^-1.
inline RegressionMoments factor_posterior(const Eigen::VectorXd& eps_t, const Eigen::MatrixXd& loadings,
                                          const Eigen::VectorXd& omega_t, double h_t) {
  const auto d = loadings.cols();
  const Eigen::VectorXd inv_var = (-omega_t.array()).exp();
  Eigen::MatrixXd prec = loadings.transpose() * inv_var.asDiagonal() * loadings;
  prec.diagonal().array() += std::exp(-h_t);
  const Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw NumericalError("factor_posterior: precision not positive definite");
  RegressionMoments m;
  m.cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
  m.mean = llt.solve(loadings.transpose() * inv_var.cwiseProduct(eps_t));
  return m;
}

inline Eigen::MatrixXd draw_factors(const Eigen::MatrixXd& eps, const Eigen::MatrixXd& loadings,
                                    const Eigen::MatrixXd& omega, const Eigen::VectorXd& h, Rng& rng) {
  const auto T = eps.rows(), d = loadings.cols();
  Eigen::MatrixXd f(T, d);
  Eigen::VectorXd z(d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd inv_var = (-omega.row(t).transpose().array()).exp();
    Eigen::MatrixXd prec = loadings.transpose() * inv_var.asDiagonal() * loadings;
    prec.diagonal().array() += std::exp(-h(t));
    const Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericalError("draw_factors: precision not positive definite at t=" + std::to_string(t));
    for (Eigen::Index m = 0; m < d; ++m) z(m) = rng.normal();
    Eigen::VectorXd mean = llt.solve(loadings.transpose() * inv_var.cwiseProduct(eps.row(t).transpose()));
    f.row(t) = (mean + llt.matrixU().solve(z)).transpose();
  }
  return f;
}

// ---------------------------------------------------------------------------
// Step 6: common log-volatility h (single-site independence MH)
// ---------------------------------------------------------------------------

/// What the h update conditions on. `base` is y - L f - (C x without the h term),
/// `impact` the time-varying beta, both T x K; empty matrices drop the in-mean term.
struct HConditional {
  Eigen::MatrixXd factors;
  double sigma_h = 0.2;
  Eigen::MatrixXd base;
  Eigen::MatrixXd impact;
  Eigen::MatrixXd omega;

  bool in_mean() const { return base.size() > 0; }
};

/// Sweeps t = 1..T once. The proposal for h_t combines the random-walk prior given
/// its neighbours (h_0 = 0) with a tangent approximation of the factor likelihood
/// at the prior mean; the acceptance ratio corrects for the approximation and
/// multiplies in the mean-equation likelihood, where h_t enters with loading beta_t.
/// Returns the number of accepted moves.
inline int draw_common_h(const HConditional& c, Eigen::VectorXd& h, Rng& rng) {
  const auto T = h.size();
  const double d = static_cast<double>(c.factors.cols());
  int accepted = 0;

  auto mean_loglik = [&](Eigen::Index t, double value) {
    if (!c.in_mean()) return 0.0;
    const Eigen::ArrayXd e = c.base.row(t).array() - c.impact.row(t).array() * value;
    return -0.5 * (e.square() * (-c.omega.row(t).transpose().array()).exp()).sum();
  };

  for (Eigen::Index t = 0; t < T; ++t) {
    const double prev = t > 0 ? h(t - 1) : 0.0;
    double m, v;
    if (t + 1 < T) {
      m = 0.5 * (prev + h(t + 1));
      v = 0.5 * c.sigma_h;
    } else {
      m = prev;
      v = c.sigma_h;
    }
    const double q = c.factors.row(t).squaredNorm();
    const double em = std::exp(-m);
    const double prop_mean = m + 0.5 * v * (q * em - d);
    // exact minus tangent log-likelihood of the factors; the -d h / 2 term cancels.
    auto weight = [&](double value) { return -0.5 * q * std::exp(-value) - 0.5 * q * em * value; };

    const double cand = prop_mean + std::sqrt(v) * rng.normal();
    double log_alpha = weight(cand) - weight(h(t));
    if (c.in_mean()) log_alpha += mean_loglik(t, cand) - mean_loglik(t, h(t));
    if (std::log(rng.uniform()) < log_alpha) {
      h(t) = cand;
      ++accepted;
    }
  }
  return accepted;
}

/// Plain factor-SV update (no in-mean channel).
inline int draw_sv_h(const Eigen::MatrixXd& factors, double sigma_h, Eigen::VectorXd& h, Rng& rng) {
  HConditional c;
  c.factors = factors;
  c.sigma_h = sigma_h;
  return draw_common_h(c, h, rng);
}

/// Assembles the h conditional from the current state.
inline HConditional h_conditional(const Model& model, const ParameterState& s) {
  const auto& dims = model.dims();
  const int b = dims.impact_index();
  HConditional c;
  c.factors = s.fac.factors;
  c.sigma_h = s.vol.sigma_h;
  c.omega = s.vol.omega_matrix();
  c.impact.resize(dims.T_eff(), dims.K());
  c.base = model.target() - s.fac.factors * s.fac.loadings.transpose();
  for (int i = 0; i < dims.N; ++i) {
    const Eigen::MatrixXd& x = model.design(i);  // h column is zero
    for (int j = 0; j < dims.k; ++j) {
      const int r = i * dims.k + j;
      const Eigen::MatrixXd path = s.coef.effective_path(r);
      c.base.col(r) -= x.cwiseProduct(path).rowwise().sum();
      c.impact.col(r) = path.col(b);
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Ridge fit per equation for the constant part, PCA loadings of the ridge
/// residuals, h = 0, standardized paths at 0, factors from their conditional.
inline ParameterState initialize_state(const Model& model, std::uint64_t seed, std::uint64_t chain = 0) {
  const auto& dims = model.dims();
  const int K = dims.K(), Kt = dims.Ktilde(), T = dims.T_eff(), d = dims.d, kK = dims.k * Kt;
  ParameterState s;
  s.coef.c0 = Eigen::MatrixXd::Zero(K, Kt);
  s.coef.sqrt_theta = Eigen::MatrixXd::Zero(K, Kt);
  s.coef.c_tilde.assign(K, Eigen::MatrixXd::Zero(T, Kt));
  Eigen::MatrixXd resid(T, K);
  for (int i = 0; i < dims.N; ++i) {
    const Eigen::MatrixXd& x = model.design(i);
    Eigen::MatrixXd xtx = x.transpose() * x;
    xtx.diagonal().array() += 1e-2;
    const Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    for (int j = 0; j < dims.k; ++j) {
      const int r = i * dims.k + j;
      const Eigen::VectorXd b = llt.solve(x.transpose() * model.target().col(r));
      s.coef.c0.row(r) = b.transpose();
      resid.col(r) = model.target().col(r) - x * b;
    }
  }

  const Eigen::MatrixXd centered = resid.rowwise() - resid.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / std::max(1, T - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  s.fac.loadings.resize(K, d);
  for (int m = 0; m < d; ++m) {
    const int col = K - 1 - m;  // eigenvalues ascend
    s.fac.loadings.col(m) = eig.eigenvectors().col(col) * std::sqrt(std::max(0.5 * eig.eigenvalues()(col), 1e-12));
  }
  const Eigen::VectorXd common_var = (s.fac.loadings * s.fac.loadings.transpose()).diagonal();

  s.vol.sigma_h = model.spec().sigma_h;
  s.vol.h = Eigen::VectorXd::Zero(T);
  s.vol.omega_tilde = Eigen::MatrixXd::Zero(T, K);
  s.vol.sqrt_sigma_omega = Eigen::VectorXd::Zero(K);
  s.vol.omega_level.resize(K);
  for (int r = 0; r < K; ++r) s.vol.omega_level(r) = std::log(std::max(cov(r, r) - common_var(r), 0.1 * cov(r, r)) + 1e-12);

  Rng rng = Rng::stream(seed, {chain, 0, 0, 0});
  s.fac.factors = draw_factors(resid, s.fac.loadings, s.vol.omega_matrix(), s.vol.h, rng);

  s.mu_c = stack_by_country(s.coef.c0, dims).colwise().mean().transpose();
  s.mu_theta = Eigen::VectorXd::Zero(kK);
  const std::array<Eigen::Index, kFamilyCount> sizes{kK, kK, kK, kK, K, static_cast<Eigen::Index>(K) * d};
  for (int f = 0; f < kFamilyCount; ++f) {
    s.families[f] = NgFamilyState::make(kAllFamilies[f], sizes[f]);
    s.families[f].a = 0.5;
    s.families[f].d0 = model.spec().d0;
    s.families[f].d1 = model.spec().d1;
  }
  return s;
}

// ---------------------------------------------------------------------------
// One sweep
// ---------------------------------------------------------------------------

enum class SweepStep : int {
  kCoefficients = 1,
  kTildePaths = 2,
  kCommonMeans = 3,
  kIdiosyncraticSv = 4,
  kFactors = 5,
  kCommonVolatility = 6,
  kHyperparameters = 7,
};

inline const char* step_label(SweepStep s) {
  switch (s) {
    case SweepStep::kCoefficients: return "constant coefficients and sqrt(theta)";
    case SweepStep::kTildePaths: return "FFBS of standardized coefficient paths";
    case SweepStep::kCommonMeans: return "common means and coefficient shrinkage";
    case SweepStep::kIdiosyncraticSv: return "idiosyncratic stochastic volatility";
    case SweepStep::kFactors: return "loadings and factors";
    case SweepStep::kCommonVolatility: return "common log-volatility h";
    case SweepStep::kHyperparameters: return "a hyperparameters";
  }
  return "?";
}

struct SweepStats {
  std::array<bool, kFamilyCount> a_accepted{};
  int h_accepted = 0;
  int h_proposed = 0;
};

using StepObserver = std::function<void(SweepStep, const ParameterState&)>;

/// One pass of steps 1-7. Randomness for (sweep, step, index) comes from its own
/// substream, so the result does not depend on how equations are scheduled.
inline SweepStats gibbs_sweep(const Model& model, ParameterState& s, const McmcConfig& config, std::uint64_t chain,
                              std::uint64_t sweep, const StepObserver& observer = {}) {
  const auto& dims = model.dims();
  const auto& spec = model.spec();
  const int K = dims.K();
  const std::uint64_t seed = config.seed;
  auto stream = [&](SweepStep step, std::uint64_t index) {
    return Rng::stream(seed, {chain, sweep, static_cast<std::uint64_t>(step), index});
  };
  SweepStats stats;

  auto run = [&](SweepStep step, auto&& body) {
    try {
      body();
    } catch (const NumericalError& e) {
      throw NumericalError("sweep " + std::to_string(sweep) + ", step " + std::to_string(static_cast<int>(step)) +
                           " (" + step_label(step) + "): " + e.what());
    }
    if (observer) observer(step, s);
  };

  run(SweepStep::kCoefficients, [&] {
    parallel_for(K, [&](int eq) {
      Rng rng = stream(SweepStep::kCoefficients, eq);
      draw_constant_and_sqrttheta(model, s, eq, config, rng);
    });
  });

  run(SweepStep::kTildePaths, [&] {
    parallel_for(K, [&](int eq) {
      Rng rng = stream(SweepStep::kTildePaths, eq);
      ffbs_tilde_path(model, s, eq, rng);
    });
  });

  run(SweepStep::kCommonMeans, [&] {
    Rng rng_c = stream(SweepStep::kCommonMeans, 0);
    update_coefficient_hierarchy(model, s, false, rng_c);
    Rng rng_t = stream(SweepStep::kCommonMeans, 1);
    update_coefficient_hierarchy(model, s, true, rng_t);
  });

  run(SweepStep::kIdiosyncraticSv, [&] {
    const Eigen::MatrixXd eta =
        reduced_form_residuals(model, s) - s.fac.factors * s.fac.loadings.transpose();
    auto& sigma_fam = s.family(Family::kSigma);
    parallel_for(K, [&](int r) {
      Rng rng = stream(SweepStep::kIdiosyncraticSv, r);
      SvDraw cur;
      cur.omega_tilde = s.vol.omega_tilde.col(r);
      cur.sqrt_sigma = s.vol.sqrt_sigma_omega(r);
      cur.level = s.vol.omega_level(r);
      const SvDraw next = draw_idiosyncratic_sv(eta.col(r), model.sv_offset(r), cur, clamp_tau(sigma_fam.tau(r), spec),
                                                spec.omega_level_prior_variance, rng);
      s.vol.omega_tilde.col(r) = next.omega_tilde;
      s.vol.sqrt_sigma_omega(r) = next.sqrt_sigma;
      s.vol.omega_level(r) = next.level;
    });
    Rng rng = stream(SweepStep::kIdiosyncraticSv, K);
    update_local_scales(sigma_fam, s.vol.sqrt_sigma_omega.array().square().matrix(), 1.0, rng);
    sigma_fam.tau = sigma_fam.tau.unaryExpr([&](double t) { return clamp_tau(t, spec); });
    sigma_fam.lambda = update_global_lambda(sigma_fam, rng);
  });

  run(SweepStep::kFactors, [&] {
    const Eigen::MatrixXd eps = reduced_form_residuals(model, s);
    const Eigen::MatrixXd omega = s.vol.omega_matrix();
    auto& fam = s.family(Family::kL);
    Rng rng_l = stream(SweepStep::kFactors, 0);
    const Eigen::VectorXd tau_l = fam.tau.unaryExpr([&](double t) { return clamp_tau(t, spec); });
    s.fac.loadings = draw_loadings(eps, s.fac.factors, omega, tau_l, rng_l);
    Rng rng_f = stream(SweepStep::kFactors, 1);
    s.fac.factors = draw_factors(eps, s.fac.loadings, omega, s.vol.h, rng_f);
    Rng rng_t = stream(SweepStep::kFactors, 2);
    Eigen::VectorXd l(K * dims.d);
    for (int r = 0; r < K; ++r) l.segment(r * dims.d, dims.d) = s.fac.loadings.row(r).transpose();
    update_local_scales(fam, l.array().square().matrix(), 1.0, rng_t);
    fam.tau = fam.tau.unaryExpr([&](double t) { return clamp_tau(t, spec); });
    fam.lambda = update_global_lambda(fam, rng_t);
  });

  run(SweepStep::kCommonVolatility, [&] {
    Rng rng = stream(SweepStep::kCommonVolatility, 0);
    const HConditional c = h_conditional(model, s);
    stats.h_accepted = draw_common_h(c, s.vol.h, rng);
    stats.h_proposed = dims.T_eff();
  });

  run(SweepStep::kHyperparameters, [&] {
    for (int f = 0; f < kFamilyCount; ++f) {
      Rng rng = stream(SweepStep::kHyperparameters, f);
      const MhResult r = mh_update_a(s.families[f], rng);
      s.families[f].a = r.a;
      stats.a_accepted[f] = r.accepted;
    }
  });

  return stats;
}

}  // namespace gvarsv

#endif  // GVARSV_SAMPLER_HPP
