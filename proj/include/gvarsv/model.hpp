#ifndef GVARSV_MODEL_HPP
#define GVARSV_MODEL_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/panel_model.hpp"
#include "gvarsv/shrinkage.hpp"

namespace gvarsv {

/// Lag orders, factor count and fixed prior constants.
struct ModelSpec {
  int P = 2;
  int Q = 2;
  int d = 4;
  double sigma_h = 0.2;                 // fixed state variance of h
  double d0 = 0.01;                     // global-scale Gamma shape for every family
  double d1 = 0.01;                     // global-scale Gamma rate for every family
  double omega_level_prior_variance = 100.0;
  double tau_floor = 1e-10;             // local scales are kept inside [floor, ceiling]
  double tau_ceiling = 1e10;
};

/// Run lengths and the impact-vector prior.
struct McmcConfig {
  int n_iter = 12000;
  int n_burn = 6000;
  int thin = 3;
  std::uint64_t seed = 1;
  int n_chains = 1;
  double impact_prior_variance = 10.0;
  double impact_sqrttheta_prior_variance = 1e-8;
  int checkpoint_every = 0;  // sweeps between checkpoints, 0 = never

  int retained() const { return (n_iter - n_burn) / thin; }
  /// Sweeps (1-based) at or below this index tune the a-proposal variances.
  int tuning_end() const { return n_burn / 2; }

  void validate() const {
    if (n_iter < 1 || n_burn < 0 || n_burn >= n_iter) throw UserError("mcmc: need 0 <= n_burn < n_iter");
    if (thin < 1) throw UserError("mcmc: thin must be at least 1");
    if (n_chains < 1) throw UserError("mcmc: n_chains must be at least 1");
    if (!(impact_prior_variance > 0.0) || !(impact_sqrttheta_prior_variance > 0.0))
      throw UserError("mcmc: impact prior variances must be positive");
  }
};

/// One full draw of every parameter and latent state.
struct ParameterState {
  CoefficientBlock coef;
  VolatilityBlock vol;
  FactorBlock fac;
  Eigen::VectorXd mu_c;      // k*Ktilde common means of the constant coefficients
  Eigen::VectorXd mu_theta;  // k*Ktilde common means of sqrt(theta)
  std::array<NgFamilyState, kFamilyCount> families;

  NgFamilyState& family(Family f) { return families[static_cast<int>(f)]; }
  const NgFamilyState& family(Family f) const { return families[static_cast<int>(f)]; }

  /// Throws NumericalError naming the first violated invariant.
  void check_invariants(const Dimensions& dims) const {
    const int K = dims.K(), Kt = dims.Ktilde(), T = dims.T_eff(), kK = dims.k * Kt;
    auto fail = [](const std::string& what) { throw NumericalError("state invariant violated: " + what); };
    if (coef.c0.rows() != K || coef.c0.cols() != Kt || coef.sqrt_theta.rows() != K || coef.sqrt_theta.cols() != Kt)
      fail("coefficient block shape");
    if (static_cast<int>(coef.c_tilde.size()) != K) fail("c_tilde count");
    for (const auto& p : coef.c_tilde)
      if (p.rows() != T || p.cols() != Kt || !p.allFinite()) fail("c_tilde path");
    if (!coef.c0.allFinite() || !coef.sqrt_theta.allFinite()) fail("coefficients not finite");
    if (vol.h.size() != T || !vol.h.allFinite()) fail("h path");
    if (vol.omega_tilde.rows() != T || vol.omega_tilde.cols() != K || !vol.omega_tilde.allFinite()) fail("omega_tilde");
    if (vol.sqrt_sigma_omega.size() != K || !vol.sqrt_sigma_omega.allFinite()) fail("sqrt_sigma_omega");
    if (vol.omega_level.size() != K || !vol.omega_level.allFinite()) fail("omega_level");
    if (fac.loadings.rows() != K || fac.loadings.cols() != dims.d || !fac.loadings.allFinite()) fail("loadings");
    if (fac.factors.rows() != T || fac.factors.cols() != dims.d || !fac.factors.allFinite()) fail("factors");
    if (mu_c.size() != kK || mu_theta.size() != kK || !mu_c.allFinite() || !mu_theta.allFinite()) fail("common means");
    const std::array<Eigen::Index, kFamilyCount> sizes{kK, kK, kK, kK, K, static_cast<Eigen::Index>(K) * dims.d};
    for (int f = 0; f < kFamilyCount; ++f) {
      if (families[f].tau.size() != sizes[f]) fail("family size " + std::string(family_name(families[f].id)));
      families[f].validate();
    }
  }
};

/// Panel plus everything precomputed from it that the sweep reads.
class Model {
 public:
  Model(PanelData data, const ModelSpec& spec) : data_(std::move(data)), spec_(spec) {
    data_.validate();
    dims_ = Dimensions{data_.N(), data_.k(), spec.P, spec.Q, spec.d, data_.T()};
    dims_.validate();
    if (!(spec.sigma_h > 0.0)) throw UserError("model: sigma_h must be positive");
    weights_ = build_weights(data_.trade_flows);
    target_ = data_.y.bottomRows(dims_.T_eff());
    design_.reserve(dims_.N);
    for (int i = 0; i < dims_.N; ++i) design_.push_back(design_without_h(data_.y, weights_, dims_, i));
    sv_offset_.resize(dims_.K());
    for (int r = 0; r < dims_.K(); ++r) {
      const auto col = target_.col(r);
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / std::max<Eigen::Index>(1, col.size() - 1);
      sv_offset_(r) = 1e-8 * std::max(var, 1e-300);
    }
  }

  const PanelData& data() const { return data_; }
  const ModelSpec& spec() const { return spec_; }
  const Dimensions& dims() const { return dims_; }
  const LinkWeights& weights() const { return weights_; }
  /// T_eff x K observations entering the likelihood.
  const Eigen::MatrixXd& target() const { return target_; }
  /// T_eff x Ktilde regressors of country i with the h column set to zero.
  const Eigen::MatrixXd& design(int i) const { return design_[i]; }
  Eigen::MatrixXd design_with_h(int i, const Eigen::VectorXd& h) const {
    Eigen::MatrixXd x = design_[i];
    x.col(dims_.impact_index()) = h;
    return x;
  }
  /// Additive constant inside log(eta^2 + c) for series r.
  double sv_offset(int r) const { return sv_offset_(r); }

 private:
  PanelData data_;
  ModelSpec spec_;
  Dimensions dims_;
  LinkWeights weights_;
  Eigen::MatrixXd target_;
  std::vector<Eigen::MatrixXd> design_;
  Eigen::VectorXd sv_offset_;
};

/// T_eff x K fitted conditional means C_{r,t} x_t (including beta h_t).
inline Eigen::MatrixXd fitted_means(const Model& m, const ParameterState& s) {
  const auto& dims = m.dims();
  Eigen::MatrixXd fit(dims.T_eff(), dims.K());
  for (int i = 0; i < dims.N; ++i) {
    const Eigen::MatrixXd x = m.design_with_h(i, s.vol.h);
    for (int j = 0; j < dims.k; ++j) {
      const int r = i * dims.k + j;
      fit.col(r) = x.cwiseProduct(s.coef.effective_path(r)).rowwise().sum();
    }
  }
  return fit;
}

/// eps_t = y_t - C_t x_t, T_eff x K.
inline Eigen::MatrixXd reduced_form_residuals(const Model& m, const ParameterState& s) {
  return m.target() - fitted_means(m, s);
}

/// Gaussian log density of y given all parameters and latent volatilities, with
/// the factors integrated out: Var(eps_t) = exp(h_t) L L' + Omega_t.
inline double log_likelihood(const Model& m, const ParameterState& s) {
  const Eigen::MatrixXd eps = reduced_form_residuals(m, s);
  const auto& dims = m.dims();
  double ll = 0.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (int t = 0; t < dims.T_eff(); ++t) {
    const Eigen::LLT<Eigen::MatrixXd> llt(s.fac.error_covariance(t, s.vol));
    if (llt.info() != Eigen::Success) throw NumericalError("log_likelihood: covariance not positive definite");
    const Eigen::VectorXd e = eps.row(t).transpose();
    const double quad = llt.matrixL().solve(e).squaredNorm();
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    ll += -0.5 * (dims.K() * log2pi + logdet + quad);
  }
  return ll;
}

/// Runs fn(0..n-1), in parallel when OpenMP is enabled. The first exception is rethrown.
template <class Fn>
void parallel_for(int n, Fn&& fn) {
  std::exception_ptr error;
  std::mutex mu;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace gvarsv

#endif  // GVARSV_MODEL_HPP
