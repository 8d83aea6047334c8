#ifndef GVARSV_KALMAN_HPP
#define GVARSV_KALMAN_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"
#include "gvarsv/rng.hpp"

namespace gvarsv {

/// Random-walk state space with a scalar observation per period:
///   z_t = H_t' x_t + e_t,  e_t ~ N(0, obs_var_t)
///   x_t = x_{t-1} + v_t,   v_t ~ N(0, I),  x_0 = 0 (known exactly).
/// `design` is T x n with row t holding H_t.
struct RandomWalkModel {
  Eigen::VectorXd z;
  Eigen::MatrixXd design;
  Eigen::VectorXd obs_var;

  Eigen::Index T() const { return z.size(); }
  Eigen::Index n() const { return design.cols(); }
};

struct FilterOutput {
  std::vector<Eigen::VectorXd> mean;  // m_{t|t}
  std::vector<Eigen::MatrixXd> cov;   // P_{t|t}
};

inline FilterOutput kalman_filter(const RandomWalkModel& m) {
  const auto T = m.T(), n = m.n();
  FilterOutput out;
  out.mean.resize(T);
  out.cov.resize(T);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rh(n);
  for (Eigen::Index t = 0; t < T; ++t) {
    p.diagonal().array() += 1.0;  // predict: P + I
    const auto h = m.design.row(t).transpose();
    rh.noalias() = p * h;
    const double f = h.dot(rh) + m.obs_var(t);
    if (!(f > 0.0) || !std::isfinite(f)) throw NumericalError("kalman_filter: non-positive innovation variance at t=" + std::to_string(t));
    const double e = m.z(t) - h.dot(a);
    a.noalias() += rh * (e / f);
    p.noalias() -= rh * rh.transpose() / f;
    p = 0.5 * (p + p.transpose());
    out.mean[t] = a;
    out.cov[t] = p;
  }
  return out;
}

namespace detail {

/// Lower Cholesky factor of a covariance that may be only numerically PSD.
inline Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& v, const char* where, Eigen::Index t) {
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double scale = std::max(v.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::MatrixXd jittered = v;
  jittered.diagonal().array() += 1e-12 * scale;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw NumericalError(std::string(where) + ": covariance lost positive definiteness at t=" + std::to_string(t));
}

}  // namespace detail

/// Forward filtering, backward sampling: one joint draw of x_1..x_T (T x n).
inline Eigen::MatrixXd ffbs_random_walk(const RandomWalkModel& m, Rng& rng) {
  const auto T = m.T(), n = m.n();
  const FilterOutput f = kalman_filter(m);
  Eigen::MatrixXd path(T, n);
  Eigen::VectorXd z(n);
  for (Eigen::Index j = 0; j < n; ++j) z(j) = rng.normal();
  path.row(T - 1) = (f.mean[T - 1] + detail::robust_cholesky(f.cov[T - 1], "ffbs", T - 1) * z).transpose();

  Eigen::MatrixXd pi(n, n);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const Eigen::MatrixXd& p = f.cov[t];
    pi = p;
    pi.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(pi);
    if (llt.info() != Eigen::Success) throw NumericalError("ffbs: P+I not positive definite at t=" + std::to_string(t));
    // gain' = (P+I)^-1 P, so gain = P (P+I)^-1 by symmetry.
    const Eigen::MatrixXd gain_t = llt.solve(p);
    const Eigen::VectorXd mean = f.mean[t] + gain_t.transpose() * (path.row(t + 1).transpose() - f.mean[t]);
    Eigen::MatrixXd var = p - p * gain_t;
    var = 0.5 * (var + var.transpose());
    for (Eigen::Index j = 0; j < n; ++j) z(j) = rng.normal();
    path.row(t) = (mean + detail::robust_cholesky(var, "ffbs", t) * z).transpose();
  }
  return path;
}

struct SmoothedMoments {
  Eigen::MatrixXd mean;              // T x n
  std::vector<Eigen::MatrixXd> cov;  // per t, n x n
};

/// Rauch-Tung-Striebel smoother: marginal posterior moments of each x_t.
inline SmoothedMoments smooth_random_walk(const RandomWalkModel& m) {
  const auto T = m.T(), n = m.n();
  const FilterOutput f = kalman_filter(m);
  SmoothedMoments s;
  s.mean.resize(T, n);
  s.cov.resize(T);
  s.mean.row(T - 1) = f.mean[T - 1].transpose();
  s.cov[T - 1] = f.cov[T - 1];
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    Eigen::MatrixXd pi = f.cov[t];
    pi.diagonal().array() += 1.0;
    const Eigen::MatrixXd gain = pi.llt().solve(f.cov[t]).transpose();
    s.mean.row(t) = (f.mean[t] + gain * (s.mean.row(t + 1).transpose() - f.mean[t])).transpose();
    s.cov[t] = f.cov[t] + gain * (s.cov[t + 1] - pi) * gain.transpose();
  }
  return s;
}

/// Scalar special case (n = 1): z_t = loading_t * x_t + e_t. Used for the
/// standardized idiosyncratic log-volatility paths.
inline Eigen::VectorXd ffbs_scalar_random_walk(const Eigen::VectorXd& z, const Eigen::VectorXd& loading,
                                               const Eigen::VectorXd& obs_var, Rng& rng) {
  const auto T = z.size();
  Eigen::VectorXd mean(T), var(T);
  double a = 0.0, p = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    p += 1.0;
    const double h = loading(t);
    const double f = h * h * p + obs_var(t);
    if (!(f > 0.0) || !std::isfinite(f)) throw NumericalError("ffbs_scalar: non-positive innovation variance at t=" + std::to_string(t));
    const double gain = p * h / f;
    a += gain * (z(t) - h * a);
    p -= gain * h * p;
    p = std::max(p, 0.0);
    mean(t) = a;
    var(t) = p;
  }
  Eigen::VectorXd path(T);
  path(T - 1) = mean(T - 1) + std::sqrt(var(T - 1)) * rng.normal();
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const double g = var(t) / (var(t) + 1.0);
    const double m = mean(t) + g * (path(t + 1) - mean(t));
    const double v = var(t) * (1.0 - g);
    path(t) = m + std::sqrt(std::max(v, 0.0)) * rng.normal();
  }
  return path;
}

}  // namespace gvarsv

#endif  // GVARSV_KALMAN_HPP
