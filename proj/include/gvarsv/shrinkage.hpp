#ifndef GVARSV_SHRINKAGE_HPP
#define GVARSV_SHRINKAGE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "gvarsv/error.hpp"
#include "gvarsv/rng.hpp"

namespace gvarsv {

// ---------------------------------------------------------------------------
// Generalized inverse Gaussian variates.
//
// Density proportional to x^(p-1) exp(-(chi/x + psi*x)/2), x > 0.
// Generator follows Hormann & Leydold (2014): ratio-of-uniforms with or without
// mode shift, and a piecewise hat for the log-concave corner, all run in the
// two-parameter form GIG(|p|, omega) with omega = sqrt(chi*psi), then scaled by
// sqrt(chi/psi) and inverted when p < 0.
// ---------------------------------------------------------------------------
namespace detail {

inline double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

inline double gig_rou_shift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Roots of the cubic bounding (x - xm) sqrt(f(x)).
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = (2.0 * (lambda - 1.0) * xm / omega - 1.0);
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;

  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  double x;
  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) break;
  }
  return x;
}

inline double gig_rou_noshift(double lambda, double omega, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);

  double x;
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) break;
  }
  return x;
}

// Requires 0 <= lambda < 1 and omega <= 1.
inline double gig_concave_hat(double lambda, double omega, Rng& rng) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  std::array<double, 3> area{};
  area[0] = k0 * x0;
  double k1, k2;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = (lambda == 0.0) ? k1 * std::log(2.0 / (omega * omega))
                              : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rng.uniform();
    double x, hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace detail

/// One draw from GIG(p, chi, psi).
inline double sample_gig(double p, double chi, double psi, Rng& rng) {
  if (!std::isfinite(p) || !std::isfinite(chi) || !std::isfinite(psi) || chi < 0.0 || psi <= 0.0 ||
      (chi == 0.0 && p <= 0.0))
    throw UserError("sample_gig: invalid parameters (p=" + std::to_string(p) + ", chi=" + std::to_string(chi) +
                    ", psi=" + std::to_string(psi) + ")");
  if (chi == 0.0) return rng.gamma(p, psi / 2.0);

  const double omega = std::sqrt(chi * psi);
  const double alpha = std::sqrt(chi / psi);
  const double lam = std::abs(p);

  if (omega < 0.8 * DBL_EPSILON) {
    // Round-off regime: the law is numerically Gamma (p > 0) or inverse Gamma (p < 0).
    if (p > 0.0) return rng.gamma(p, psi / 2.0);
    if (p < 0.0) return 1.0 / rng.gamma(-p, chi / 2.0);
  }

  double x;
  if (lam > 2.0 || omega > 3.0)
    x = detail::gig_rou_shift(lam, omega, rng);
  else if (lam >= 1.0 - 2.25 * omega * omega || omega > 0.2)
    x = detail::gig_rou_noshift(lam, omega, rng);
  else
    x = detail::gig_concave_hat(lam, omega, rng);
  return p < 0.0 ? alpha / x : alpha * x;
}

// ---------------------------------------------------------------------------
// Normal-Gamma families
// ---------------------------------------------------------------------------

enum class Family : int { kC = 0, kTheta, kMuC, kMuTheta, kSigma, kL };
inline constexpr int kFamilyCount = 6;
inline constexpr std::array<Family, kFamilyCount> kAllFamilies{Family::kC,   Family::kTheta, Family::kMuC,
                                                               Family::kMuTheta, Family::kSigma, Family::kL};

inline std::string_view family_name(Family f) {
  constexpr std::array<std::string_view, kFamilyCount> names{"c", "theta", "mu_c", "mu_theta", "sigma", "L"};
  return names[static_cast<int>(f)];
}

/// Substitute for a vanishing GIG chi statistic so the conditional stays proper.
inline constexpr double kChiFloor = 1e-300;

/// Local scales tau_j | lambda ~ G(a, a*lambda/2), lambda ~ G(d0, d1), a ~ Exp(1).
struct NgFamilyState {
  Family id = Family::kC;
  Eigen::VectorXd tau;
  double lambda = 2.0;
  double a = 1.0;
  double kappa = 0.1;  // variance of the log-a random-walk proposal
  double d0 = 0.01;
  double d1 = 0.01;

  static NgFamilyState make(Family id, Eigen::Index size) {
    NgFamilyState s;
    s.id = id;
    s.tau = Eigen::VectorXd::Ones(size);
    return s;
  }

  void validate() const {
    if (!(tau.array() > 0.0).all()) throw NumericalError("family " + std::string(family_name(id)) + ": tau not positive");
    if (!(lambda > 0.0) || !(a > 0.0) || !(kappa > 0.0) || !std::isfinite(lambda) || !std::isfinite(a))
      throw NumericalError("family " + std::string(family_name(id)) + ": lambda, a or kappa not positive");
  }
};

/// tau_j ~ GIG(a - n_obs/2, chi_j, a*lambda). `chi` holds the quadratic statistic per
/// index: sum_i (c_ij - mu_j)^2 with n_obs = N for the country-level families, and a
/// single squared coefficient with n_obs = 1 for the others.
inline void update_local_scales(NgFamilyState& fam, const Eigen::VectorXd& chi, double n_obs, Rng& rng) {
  if (chi.size() != fam.tau.size()) throw UserError("update_local_scales: statistic length mismatch");
  const double p = fam.a - n_obs / 2.0;
  const double psi = fam.a * fam.lambda;
  for (Eigen::Index j = 0; j < chi.size(); ++j) fam.tau(j) = sample_gig(p, std::max(chi(j), kChiFloor), psi, rng);
}

/// lambda ~ G(d0 + n*a, d1 + (a/2) sum tau), n = number of local scales.
inline double update_global_lambda(const NgFamilyState& fam, Rng& rng) {
  const double shape = fam.d0 + static_cast<double>(fam.tau.size()) * fam.a;
  const double rate = fam.d1 + 0.5 * fam.a * fam.tau.sum();
  return rng.gamma(shape, rate);
}

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Posterior of the common mean: V = (N/tau_s + 1/tau_mu)^-1, m = V sum_i c_ij / tau_s.
/// `coef` is N x J (countries by coefficient index).
inline GaussianMoments common_mean_moments(const Eigen::MatrixXd& coef, const Eigen::VectorXd& tau_s,
                                           const Eigen::VectorXd& tau_mu) {
  const double n = static_cast<double>(coef.rows());
  GaussianMoments m;
  m.variance = (n * tau_s.array().inverse() + tau_mu.array().inverse()).inverse();
  m.mean = m.variance.array() * coef.colwise().sum().transpose().array() / tau_s.array();
  return m;
}

inline Eigen::VectorXd update_common_mean(const Eigen::MatrixXd& coef, const Eigen::VectorXd& tau_s,
                                          const Eigen::VectorXd& tau_mu, Rng& rng) {
  const auto m = common_mean_moments(coef, tau_s, tau_mu);
  Eigen::VectorXd mu(m.mean.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) mu(j) = m.mean(j) + std::sqrt(m.variance(j)) * rng.normal();
  return mu;
}

/// log p(a) + log p(tau | a, lambda) with p(a) = exp(-a) and tau_j ~ G(a, a*lambda/2).
inline double log_a_conditional(double a, const Eigen::VectorXd& tau, double lambda) {
  if (!(a > 0.0)) return -INFINITY;
  const double n = static_cast<double>(tau.size());
  const double rate = a * lambda / 2.0;
  return -a + n * (a * std::log(rate) - std::lgamma(a)) + (a - 1.0) * tau.array().log().sum() - rate * tau.sum();
}

/// Acceptance probability for a log-scale random-walk move a -> a_star, including
/// the a_star / a change-of-variables factor.
inline double a_acceptance_probability(double a, double a_star, const Eigen::VectorXd& tau, double lambda) {
  const double log_ratio = log_a_conditional(a_star, tau, lambda) + std::log(a_star) -
                           log_a_conditional(a, tau, lambda) - std::log(a);
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

struct MhResult {
  double a;
  bool accepted;
};

inline MhResult mh_update_a(const NgFamilyState& fam, Rng& rng) {
  const double a_star = std::exp(std::log(fam.a) + std::sqrt(fam.kappa) * rng.normal());
  const double prob = a_acceptance_probability(fam.a, a_star, fam.tau, fam.lambda);
  if (rng.uniform() < prob) return {a_star, true};
  return {fam.a, false};
}

inline constexpr double kKappaMin = 1e-6;
inline constexpr double kKappaMax = 1e2;
inline constexpr int kKappaWindow = 50;

/// Widen proposals when too many are accepted, narrow them when too few are.
inline double tune_kappa(double kappa, double window_acceptance) {
  if (window_acceptance > 0.35) kappa *= 1.1;
  else if (window_acceptance < 0.15) kappa *= 0.9;
  return std::clamp(kappa, kKappaMin, kKappaMax);
}

}  // namespace gvarsv

#endif  // GVARSV_SHRINKAGE_HPP
