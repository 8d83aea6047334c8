#ifndef GVARSV_YIELD_CURVE_HPP
#define GVARSV_YIELD_CURVE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "gvarsv/error.hpp"

namespace gvarsv {

inline constexpr double kNelsonSiegelLambda = 0.0609;

/// Level, slope and curvature loadings at maturity tau (months).
inline Eigen::Vector3d ns_loadings(double tau, double lambda = kNelsonSiegelLambda) {
  if (!(tau > 0.0)) throw UserError("ns_loadings: maturity must be positive");
  if (!(lambda > 0.0)) throw UserError("ns_loadings: lambda must be positive");
  const double x = lambda * tau;
  const double slope = -std::expm1(-x) / x;
  return {1.0, slope, slope - std::exp(-x)};
}

/// Government bond yields in percentage points. Row t*N + i of `yields` holds
/// the curve of country i in period t; NaN marks a missing quote.
struct YieldPanel {
  Eigen::VectorXd maturities;  // months
  Eigen::MatrixXd yields;
  std::vector<std::string> countries;
  std::vector<std::string> dates;

  int N() const { return static_cast<int>(countries.size()); }
  int T() const { return N() == 0 ? 0 : static_cast<int>(yields.rows() / N()); }
  int M() const { return static_cast<int>(maturities.size()); }

  void validate() const {
    if (M() < 3) throw UserError("yield panel: need at least 3 maturities");
    for (int m = 0; m < M(); ++m) {
      if (!(maturities(m) > 0.0)) throw UserError("yield panel: maturities must be positive");
      if (m > 0 && !(maturities(m) > maturities(m - 1))) throw UserError("yield panel: maturities must be strictly increasing");
    }
    if (N() == 0 || yields.rows() % N() != 0) throw UserError("yield panel: rows are not T*N");
    if (yields.cols() != M()) throw UserError("yield panel: column count does not match maturities");
  }
};

/// Level, slope and curvature, each T x N.
struct NsFactors {
  Eigen::MatrixXd level;
  Eigen::MatrixXd slope;
  Eigen::MatrixXd curvature;
  double lambda = kNelsonSiegelLambda;
};

inline Eigen::MatrixXd ns_design(const Eigen::VectorXd& maturities, double lambda) {
  Eigen::MatrixXd x(maturities.size(), 3);
  for (Eigen::Index m = 0; m < maturities.size(); ++m) x.row(m) = ns_loadings(maturities(m), lambda).transpose();
  return x;
}

/// Least-squares fit of one curve. Non-finite yields are dropped first.
inline Eigen::Vector3d fit_ns_curve(const Eigen::VectorXd& maturities, const Eigen::VectorXd& yields, double lambda) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index m = 0; m < yields.size(); ++m)
    if (std::isfinite(yields(m))) keep.push_back(m);
  if (keep.size() < 3) throw UserError("fit_ns_curve: fewer than 3 finite yields");
  Eigen::VectorXd tau(keep.size()), r(keep.size());
  for (std::size_t m = 0; m < keep.size(); ++m) {
    tau(m) = maturities(keep[m]);
    r(m) = yields(keep[m]);
  }
  const Eigen::MatrixXd x = ns_design(tau, lambda);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw UserError("fit_ns_curve: rank-deficient design (duplicate maturities?)");
  // A flat curve is fit by the level loading alone; return it without rounding noise.
  if ((r.array() == r(0)).all()) return {r(0), 0.0, 0.0};
  return qr.solve(r);
}

inline NsFactors fit_ns_factors(const YieldPanel& panel, double lambda = kNelsonSiegelLambda) {
  panel.validate();
  const int T = panel.T(), N = panel.N();
  NsFactors out;
  out.lambda = lambda;
  out.level.resize(T, N);
  out.slope.resize(T, N);
  out.curvature.resize(T, N);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < N; ++i) {
      Eigen::Vector3d b;
      try {
        b = fit_ns_curve(panel.maturities, panel.yields.row(t * N + i).transpose(), lambda);
      } catch (const UserError& e) {
        throw UserError(std::string(e.what()) + " at period " + std::to_string(t) + ", country " + panel.countries[i]);
      }
      out.level(t, i) = b(0);
      out.slope(t, i) = b(1);
      out.curvature(t, i) = b(2);
    }
  }
  return out;
}

}  // namespace gvarsv

#endif  // GVARSV_YIELD_CURVE_HPP
