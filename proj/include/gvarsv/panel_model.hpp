#ifndef GVARSV_PANEL_MODEL_HPP
#define GVARSV_PANEL_MODEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"

namespace gvarsv {

/// Model dimensions. Series are stacked country-major: column i*k + j of the
/// panel is variable j of country i. T counts all observed periods including
/// the presample consumed by the lags.
struct Dimensions {
  int N = 1;  // countries
  int k = 1;  // variables per country
  int P = 1;  // domestic lags
  int Q = 1;  // foreign lags
  int d = 1;  // factors
  int T = 0;  // observed periods

  int K() const { return N * k; }
  bool has_foreign() const { return N > 1; }
  /// Regressors per equation: intercept, kP domestic lags, kQ foreign lags, h.
  /// With a single country the foreign block is dropped.
  int Ktilde() const { return has_foreign() ? k * (P + Q) + 2 : k * P + 2; }
  int max_lag() const { return has_foreign() ? std::max(P, Q) : P; }
  int T_eff() const { return T - max_lag(); }

  int intercept_index() const { return 0; }
  int domestic_index(int lag, int var) const { return 1 + (lag - 1) * k + var; }
  int foreign_index(int lag, int var) const { return 1 + k * P + (lag - 1) * k + var; }
  int impact_index() const { return Ktilde() - 1; }

  void validate() const {
    if (N < 1 || k < 1) throw UserError("dimensions: N and k must be positive");
    if (P < 1 || Q < 1) throw UserError("dimensions: P and Q must be at least 1");
    if (d < 1) throw UserError("dimensions: need at least one factor");
    if (d >= K()) throw UserError("dimensions: factor count d must be smaller than K = N*k");
    if (T <= max_lag()) throw UserError("dimensions: T must exceed the maximum lag");
  }

  bool operator==(const Dimensions&) const = default;
};

enum class TradeMeasure { kTotal, kExports, kImports };

inline TradeMeasure parse_trade_measure(const std::string& s) {
  if (s == "total") return TradeMeasure::kTotal;
  if (s == "exports") return TradeMeasure::kExports;
  if (s == "imports") return TradeMeasure::kImports;
  throw UserError("unknown trade measure '" + s + "' (expected total, exports or imports)");
}

/// Entry (i, j) of `exports` is the flow from i to j. Total trade adds both directions.
inline Eigen::MatrixXd trade_matrix(const Eigen::MatrixXd& exports, TradeMeasure measure) {
  switch (measure) {
    case TradeMeasure::kExports: return exports;
    case TradeMeasure::kImports: return exports.transpose();
    case TradeMeasure::kTotal: break;
  }
  return exports + exports.transpose();
}

/// Element-wise mean over annual bilateral trade matrices.
inline Eigen::MatrixXd average_trade_flows(const std::vector<Eigen::MatrixXd>& annual) {
  if (annual.empty()) throw UserError("average_trade_flows: no matrices given");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(annual.front().rows(), annual.front().cols());
  for (const auto& m : annual) {
    if (m.rows() != acc.rows() || m.cols() != acc.cols())
      throw UserError("average_trade_flows: matrices differ in shape");
    acc += m;
  }
  return acc / static_cast<double>(annual.size());
}

/// Row-stochastic link weights with a zero diagonal. For N = 1 the matrix is a
/// single zero: there is no foreign block.
class LinkWeights {
 public:
  LinkWeights() = default;

  static LinkWeights from_matrix(Eigen::MatrixXd w) {
    if (w.rows() != w.cols() || w.rows() == 0) throw UserError("link weights must be a non-empty square matrix");
    const auto n = w.rows();
    if (n == 1) {
      if (w(0, 0) != 0.0) throw UserError("link weights: w_ii must be 0");
      return LinkWeights(std::move(w));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w(i, i) != 0.0) throw UserError("link weights: w_ii must be 0");
      if ((w.row(i).array() < 0.0).any()) throw UserError("link weights: negative entry");
      if (std::abs(w.row(i).sum() - 1.0) > 1e-12) throw UserError("link weights: row does not sum to one");
    }
    return LinkWeights(std::move(w));
  }

  const Eigen::MatrixXd& matrix() const { return w_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return w_(i, j); }
  Eigen::Index size() const { return w_.rows(); }

 private:
  explicit LinkWeights(Eigen::MatrixXd w) : w_(std::move(w)) {}
  Eigen::MatrixXd w_;
};

/// Normalizes off-diagonal flows row-wise. Diagonal entries are ignored.
inline LinkWeights build_weights(const Eigen::MatrixXd& flows) {
  if (flows.rows() != flows.cols() || flows.rows() == 0) throw UserError("trade flows must be a non-empty square matrix");
  const auto n = flows.rows();
  if (n == 1) return LinkWeights::from_matrix(Eigen::MatrixXd::Zero(1, 1));
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!(flows(i, j) >= 0.0)) throw UserError("trade flows must be nonnegative");
      total += flows(i, j);
    }
    if (!(total > 0.0)) throw UserError("isolated country: row " + std::to_string(i) + " has no off-diagonal trade");
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) w(i, j) = flows(i, j) / total;
    // Exact renormalization so the row sums to one to rounding.
    w.row(i) /= w.row(i).sum();
  }
  return LinkWeights::from_matrix(std::move(w));
}

/// Observed panel: y is T x K (country-major columns).
struct PanelData {
  Eigen::MatrixXd y;
  Eigen::MatrixXd trade_flows;  // N x N
  std::vector<std::string> countries;
  std::vector<std::string> variables;
  std::vector<std::string> dates;  // YYYY-MM, one per row of y (optional)

  int N() const { return static_cast<int>(countries.size()); }
  int k() const { return static_cast<int>(variables.size()); }
  int T() const { return static_cast<int>(y.rows()); }

  double value(int t, int i, int j) const { return y(t, i * k() + j); }

  void validate() const {
    if (countries.empty() || variables.empty()) throw UserError("panel: no countries or variables");
    if (y.cols() != N() * k()) throw UserError("panel: column count does not match N*k");
    if (!y.allFinite()) throw UserError("panel: non-finite values after ingestion");
    if (trade_flows.rows() != N() || trade_flows.cols() != N())
      throw UserError("panel: trade flow matrix is not N x N");
    if (!dates.empty() && static_cast<int>(dates.size()) != T()) throw UserError("panel: date labels do not match T");
  }
};

/// y*_it = sum_j w_ij y_jt for the k variables of country i.
inline Eigen::VectorXd foreign_aggregate(const Eigen::Ref<const Eigen::VectorXd>& y_t, const LinkWeights& w, int i,
                                         int k) {
  const auto n = w.size();
  if (i < 0 || i >= n) throw UserError("foreign_aggregate: country index out of range");
  if (y_t.size() != n * k) throw UserError("foreign_aggregate: y_t has wrong length");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (w(i, j) != 0.0) out += w(i, j) * y_t.segment(j * k, k);
  }
  return out;
}

/// x_it = (1, y_{i,t-1..t-P}, y*_{i,t-1..t-Q}, h_t). `t` is a 0-based row of y.
inline Eigen::VectorXd build_regressor(const Eigen::MatrixXd& y, const LinkWeights& w, const Dimensions& dims, int i,
                                       int t, double h_t) {
  if (t < dims.max_lag() || t >= y.rows())
    throw UserError("build_regressor: insufficient history at t=" + std::to_string(t));
  Eigen::VectorXd x(dims.Ktilde());
  x(0) = 1.0;
  for (int p = 1; p <= dims.P; ++p) x.segment(dims.domestic_index(p, 0), dims.k) = y.row(t - p).segment(i * dims.k, dims.k).transpose();
  if (dims.has_foreign()) {
    for (int q = 1; q <= dims.Q; ++q)
      x.segment(dims.foreign_index(q, 0), dims.k) = foreign_aggregate(y.row(t - q).transpose(), w, i, dims.k);
  }
  x(dims.impact_index()) = h_t;
  return x;
}

/// Regressors of country i for every effective period, with the h column zeroed.
/// Row s corresponds to observation t = s + max_lag.
inline Eigen::MatrixXd design_without_h(const Eigen::MatrixXd& y, const LinkWeights& w, const Dimensions& dims, int i) {
  Eigen::MatrixXd x(dims.T_eff(), dims.Ktilde());
  for (int s = 0; s < dims.T_eff(); ++s) x.row(s) = build_regressor(y, w, dims, i, s + dims.max_lag(), 0.0).transpose();
  return x;
}

/// Constant part, signed square-root state variances and standardized paths of
/// the time-varying coefficients. Row r of c0/sqrt_theta is equation r = i*k + j.
/// c_tilde[r] is T_eff x Ktilde; row s is the state at effective period s+1
/// (the period-0 state is pinned at zero and not stored).
struct CoefficientBlock {
  Eigen::MatrixXd c0;
  Eigen::MatrixXd sqrt_theta;
  std::vector<Eigen::MatrixXd> c_tilde;

  double effective(int eq, int s, int l) const { return c0(eq, l) + sqrt_theta(eq, l) * c_tilde[eq](s, l); }

  /// K x Ktilde coefficient matrix at effective period s.
  Eigen::MatrixXd effective_at(int s) const {
    Eigen::MatrixXd c(c0.rows(), c0.cols());
    for (Eigen::Index r = 0; r < c0.rows(); ++r)
      c.row(r) = c0.row(r) + sqrt_theta.row(r).cwiseProduct(c_tilde[r].row(s));
    return c;
  }

  /// T_eff x Ktilde path of equation eq.
  Eigen::MatrixXd effective_path(int eq) const {
    Eigen::MatrixXd path = c_tilde[eq].array().rowwise() * sqrt_theta.row(eq).array();
    path.rowwise() += c0.row(eq);
    return path;
  }
};

/// Common log-volatility h and idiosyncratic log-volatilities
/// omega_{r,s} = omega_level_r + sqrt_sigma_omega_r * omega_tilde_{s,r}.
struct VolatilityBlock {
  Eigen::VectorXd h;               // T_eff
  Eigen::MatrixXd omega_tilde;     // T_eff x K
  Eigen::VectorXd sqrt_sigma_omega;  // K
  Eigen::VectorXd omega_level;     // K
  double sigma_h = 0.2;

  double omega(int s, int r) const { return omega_level(r) + sqrt_sigma_omega(r) * omega_tilde(s, r); }

  Eigen::MatrixXd omega_matrix() const {
    Eigen::MatrixXd om = omega_tilde.array().rowwise() * sqrt_sigma_omega.transpose().array();
    om.rowwise() += omega_level.transpose();
    return om;
  }
};

/// Loadings L (K x d) and factors f (T_eff x d). Factor covariance is exp(h_t) I_d.
struct FactorBlock {
  Eigen::MatrixXd loadings;
  Eigen::MatrixXd factors;

  /// Var(eps_t) = exp(h_t) L L' + Omega_t.
  Eigen::MatrixXd error_covariance(int s, const VolatilityBlock& vol) const {
    Eigen::MatrixXd v = std::exp(vol.h(s)) * loadings * loadings.transpose();
    for (Eigen::Index r = 0; r < v.rows(); ++r) v(r, r) += std::exp(vol.omega(s, static_cast<int>(r)));
    return v;
  }
};

/// The panel written as one VAR in y_t with K x K lag matrices.
struct GlobalSystem {
  std::vector<Eigen::MatrixXd> lags;  // lags[p-1] multiplies y_{t-p}
  Eigen::VectorXd intercept;
  Eigen::VectorXd impact;  // loading of h_t

  /// One-step conditional mean given history rows y_{t-1}, y_{t-2}, ... (history[0] = y_{t-1}).
  Eigen::VectorXd predict(const std::vector<Eigen::VectorXd>& history, double h_t) const {
    Eigen::VectorXd m = intercept + impact * h_t;
    for (std::size_t p = 0; p < lags.size(); ++p) m += lags[p] * history[p];
    return m;
  }

  /// (K*lags) x (K*lags) companion matrix of the lag polynomial.
  Eigen::MatrixXd companion() const {
    const auto K = intercept.size();
    const auto L = static_cast<Eigen::Index>(lags.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(K * L, K * L);
    for (Eigen::Index p = 0; p < L; ++p) c.block(0, p * K, K, K) = lags[p];
    if (L > 1) c.block(K, 0, K * (L - 1), K * (L - 1)).setIdentity();
    return c;
  }
};

/// Collects the per-country equations (coefficient matrix `c`, K x Ktilde) into
/// the global VAR. Foreign coefficients B_iq spread over partner columns with
/// weights w_im.
inline GlobalSystem stack_global_system(const Eigen::MatrixXd& c, const LinkWeights& w, const Dimensions& dims) {
  const int K = dims.K(), k = dims.k;
  GlobalSystem g;
  g.lags.assign(dims.max_lag(), Eigen::MatrixXd::Zero(K, K));
  g.intercept = c.col(dims.intercept_index());
  g.impact = c.col(dims.impact_index());
  for (int i = 0; i < dims.N; ++i) {
    for (int j = 0; j < k; ++j) {
      const int r = i * k + j;
      for (int p = 1; p <= dims.P; ++p)
        for (int v = 0; v < k; ++v) g.lags[p - 1](r, i * k + v) += c(r, dims.domestic_index(p, v));
      if (!dims.has_foreign()) continue;
      for (int q = 1; q <= dims.Q; ++q)
        for (int m = 0; m < dims.N; ++m) {
          const double wim = w(i, m);
          if (wim == 0.0) continue;
          for (int v = 0; v < k; ++v) g.lags[q - 1](r, m * k + v) += c(r, dims.foreign_index(q, v)) * wim;
        }
    }
  }
  return g;
}

}  // namespace gvarsv

#endif  // GVARSV_PANEL_MODEL_HPP
