#ifndef GVARSV_INFERENCE_HPP
#define GVARSV_INFERENCE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gvarsv/chain.hpp"
#include "gvarsv/error.hpp"
#include "gvarsv/panel_model.hpp"

namespace gvarsv {

/// Linear-interpolation sample quantile (Hyndman-Fan type 7). Sorts `x` in place.
inline double quantile_inplace(std::vector<double>& x, double p) {
  if (x.empty()) throw UserError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double quantile(std::vector<double> x, double p) { return quantile_inplace(x, p); }

inline void validate_quantiles(const std::vector<double>& q) {
  if (q.empty()) throw UserError("no quantiles requested");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0 && q[i] < 1.0)) throw UserError("quantiles must lie in (0, 1)");
    if (i > 0 && !(q[i] > q[i - 1])) throw UserError("quantiles must be strictly increasing");
  }
}

// ---------------------------------------------------------------------------
// Impulse responses to the common log-volatility
// ---------------------------------------------------------------------------

enum class Persistence { kRandomWalk, kAutoregressive };

struct IrfRequest {
  int origin = -1;  // 0-based row of the panel; -1 = last observation
  int horizon = 60;
  std::optional<double> delta;  // shock size in units of h; default sqrt(sigma_h)
  Persistence mode = Persistence::kRandomWalk;
  double rho = 0.0;  // used by the autoregressive mode
  std::vector<double> quantiles{0.16, 0.5, 0.84};
};

inline constexpr double kExplosiveThreshold = 1e8;

struct IrfResult {
  int horizon = 0;
  int origin = 0;
  double delta = 0.0;
  std::vector<double> quantiles;
  std::vector<Eigen::MatrixXd> responses;  // per draw: K x (H+1)
  std::vector<bool> excluded;              // explosive draws
  int excluded_count = 0;
  std::vector<Eigen::MatrixXd> summary;    // per quantile: K x (H+1)

  int K() const { return responses.empty() ? 0 : static_cast<int>(responses.front().rows()); }
};

/// h-shock path: delta at every horizon (random walk) or delta * rho^s.
inline Eigen::VectorXd shock_path(int horizon, double delta, Persistence mode, double rho) {
  Eigen::VectorXd path(horizon + 1);
  for (int s = 0; s <= horizon; ++s) path(s) = mode == Persistence::kRandomWalk ? delta : delta * std::pow(rho, s);
  return path;
}

/// response_s = sum_p G_p response_{s-p} + beta * shock_s, K x (H+1).
inline Eigen::MatrixXd propagate_response(const GlobalSystem& g, const Eigen::VectorXd& shock) {
  const auto K = g.impact.size();
  const auto H = shock.size() - 1;
  Eigen::MatrixXd resp(K, H + 1);
  for (Eigen::Index s = 0; s <= H; ++s) {
    Eigen::VectorXd r = g.impact * shock(s);
    for (Eigen::Index p = 1; p <= static_cast<Eigen::Index>(g.lags.size()) && p <= s; ++p) r.noalias() += g.lags[p - 1] * resp.col(s - p);
    resp.col(s) = r;
  }
  return resp;
}

/// K x (H+1) quantile summaries across the kept draws.
inline std::vector<Eigen::MatrixXd> summarize_responses(const std::vector<Eigen::MatrixXd>& responses,
                                                        const std::vector<bool>& excluded,
                                                        const std::vector<double>& quantiles) {
  std::vector<Eigen::MatrixXd> out;
  if (responses.empty()) return out;
  const auto K = responses.front().rows(), H1 = responses.front().cols();
  out.assign(quantiles.size(), Eigen::MatrixXd::Zero(K, H1));
  std::vector<double> buf;
  for (Eigen::Index r = 0; r < K; ++r)
    for (Eigen::Index s = 0; s < H1; ++s) {
      buf.clear();
      for (std::size_t n = 0; n < responses.size(); ++n)
        if (!excluded[n]) buf.push_back(responses[n](r, s));
      if (buf.empty()) continue;
      std::sort(buf.begin(), buf.end());
      for (std::size_t q = 0; q < quantiles.size(); ++q) out[q](r, s) = quantile_inplace(buf, quantiles[q]);
    }
  return out;
}

/// Coefficients are frozen at the origin period; the h-shock path feeds through the
/// impact vector and propagates with the stacked lag matrices. Conditional-mean
/// responses only.
inline IrfResult impulse_response(const PosteriorChain& chain, const IrfRequest& req) {
  if (chain.draws.empty()) throw UserError("impulse_response: chain has no draws");
  if (req.horizon < 1) throw UserError("impulse_response: horizon must be at least 1");
  validate_quantiles(req.quantiles);
  const auto& dims = chain.dims;
  const int origin = req.origin < 0 ? dims.T - 1 : req.origin;
  if (origin < dims.max_lag() || origin >= dims.T)
    throw UserError("impulse_response: origin must lie in [" + std::to_string(dims.max_lag()) + ", " + std::to_string(dims.T - 1) + "]");
  const int s = origin - dims.max_lag();
  const auto weights = LinkWeights::from_matrix(chain.weights);

  IrfResult res;
  res.horizon = req.horizon;
  res.origin = origin;
  res.delta = req.delta.value_or(std::sqrt(chain.spec.sigma_h));
  res.quantiles = req.quantiles;
  const Eigen::VectorXd shock = shock_path(req.horizon, res.delta, req.mode, req.rho);
  for (const auto& draw : chain.draws) {
    const GlobalSystem g = stack_global_system(draw.coef.effective_at(s), weights, dims);
    Eigen::MatrixXd r = propagate_response(g, shock);
    const bool bad = !r.allFinite() || r.cwiseAbs().maxCoeff() > kExplosiveThreshold;
    res.responses.push_back(std::move(r));
    res.excluded.push_back(bad);
    res.excluded_count += bad ? 1 : 0;
  }
  res.summary = summarize_responses(res.responses, res.excluded, res.quantiles);
  return res;
}

struct CumulativeSummary {
  int horizon = 0;
  std::vector<Eigen::VectorXd> per_draw;  // kept draws only, K each
  std::vector<Eigen::VectorXd> summary;   // per quantile, K each
};

/// Per-draw sums over horizons 0..H, then quantiles of those sums.
inline CumulativeSummary cumulative_irf(const IrfResult& irf, int horizon) {
  if (horizon < 0 || horizon > irf.horizon) throw UserError("cumulative_irf: horizon outside the computed range");
  CumulativeSummary out;
  out.horizon = horizon;
  for (std::size_t n = 0; n < irf.responses.size(); ++n)
    if (!irf.excluded[n]) {
      Eigen::VectorXd acc = irf.responses[n].col(0);
      for (int s = 1; s <= horizon; ++s) acc += irf.responses[n].col(s);
      out.per_draw.push_back(std::move(acc));
    }
  if (out.per_draw.empty()) return out;
  const auto K = out.per_draw.front().size();
  out.summary.assign(irf.quantiles.size(), Eigen::VectorXd::Zero(K));
  std::vector<double> buf;
  for (Eigen::Index r = 0; r < K; ++r) {
    buf.clear();
    for (const auto& v : out.per_draw) buf.push_back(v(r));
    std::sort(buf.begin(), buf.end());
    for (std::size_t q = 0; q < irf.quantiles.size(); ++q) out.summary[q](r) = quantile_inplace(buf, irf.quantiles[q]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uncertainty measure
// ---------------------------------------------------------------------------

/// (x - min) / (max - min).
inline Eigen::VectorXd standardize_unit_interval(const Eigen::VectorXd& x) {
  if (x.size() == 0) throw UserError("degenerate series: empty");
  const double lo = x.minCoeff(), hi = x.maxCoeff();
  if (!(hi > lo)) throw UserError("degenerate series: max equals min");
  return (x.array() - lo) / (hi - lo);
}

struct UncertaintySummary {
  std::vector<double> quantiles;
  Eigen::MatrixXd bands;              // T_eff x quantiles
  Eigen::VectorXd standardized_median;
};

inline UncertaintySummary uncertainty_series(const PosteriorChain& chain,
                                             const std::vector<double>& quantiles = {0.16, 0.5, 0.84}) {
  if (chain.draws.empty()) throw UserError("uncertainty_series: chain has no draws");
  validate_quantiles(quantiles);
  const auto T = chain.draws.front().vol.h.size();
  UncertaintySummary out;
  out.quantiles = quantiles;
  out.bands.resize(T, static_cast<Eigen::Index>(quantiles.size()));
  std::vector<double> buf(chain.draws.size());
  for (Eigen::Index t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < chain.draws.size(); ++n) buf[n] = chain.draws[n].vol.h(t);
    std::sort(buf.begin(), buf.end());
    for (std::size_t q = 0; q < quantiles.size(); ++q) out.bands(t, static_cast<Eigen::Index>(q)) = quantile_inplace(buf, quantiles[q]);
  }
  Eigen::VectorXd median(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < chain.draws.size(); ++n) buf[n] = chain.draws[n].vol.h(t);
    median(t) = quantile_inplace(buf, 0.5);
  }
  out.standardized_median = standardize_unit_interval(median);
  return out;
}

// ---------------------------------------------------------------------------
// Shrinkage diagnostics
// ---------------------------------------------------------------------------

/// Posterior means of log tau for one family, k equations x k(P+Q) lag
/// regressors (intercept and impact columns dropped).
struct ShrinkageTable {
  Family family;
  Eigen::MatrixXd mean_log_tau;
  std::vector<std::string> column_labels;
};

inline std::vector<std::string> lag_column_labels(const Dimensions& dims, const std::vector<std::string>& vars) {
  std::vector<std::string> labels;
  for (int p = 1; p <= dims.P; ++p)
    for (int v = 0; v < dims.k; ++v) labels.push_back("domestic_lag" + std::to_string(p) + ":" + vars[v]);
  if (dims.has_foreign())
    for (int q = 1; q <= dims.Q; ++q)
      for (int v = 0; v < dims.k; ++v) labels.push_back("foreign_lag" + std::to_string(q) + ":" + vars[v]);
  return labels;
}

inline std::vector<ShrinkageTable> shrinkage_report(const PosteriorChain& chain) {
  if (chain.draws.empty()) throw UserError("shrinkage_report: chain has no draws");
  const auto& dims = chain.dims;
  const int Kt = dims.Ktilde(), cols = Kt - 2;
  std::vector<ShrinkageTable> out;
  for (Family f : {Family::kMuC, Family::kMuTheta, Family::kC, Family::kTheta}) {
    ShrinkageTable t{f, Eigen::MatrixXd::Zero(dims.k, cols), lag_column_labels(dims, chain.variables)};
    for (const auto& d : chain.draws) {
      const auto& tau = d.family(f).tau;
      for (int j = 0; j < dims.k; ++j)
        for (int c = 0; c < cols; ++c) t.mean_log_tau(j, c) += std::log(tau(j * Kt + 1 + c));
    }
    t.mean_log_tau /= static_cast<double>(chain.draws.size());
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// DIC over a specification grid
// ---------------------------------------------------------------------------

struct DicPoint {
  ModelSpec spec;
  bool failed = false;
  std::string error;
  DicSummary dic;
};

struct DicResult {
  std::vector<DicPoint> points;
  int selected = -1;  // index of the smallest DIC among surviving points
};

/// Drops leading rows so that a model with lag order `lag` uses the same
/// effective sample as one with lag order `max_lag`.
inline PanelData align_sample(const PanelData& data, int lag, int max_lag) {
  const int drop = max_lag - lag;
  if (drop <= 0) return data;
  PanelData out = data;
  out.y = data.y.bottomRows(data.y.rows() - drop);
  if (!data.dates.empty()) out.dates.assign(data.dates.begin() + drop, data.dates.end());
  return out;
}

/// One chain per grid point on a common effective sample. A chain that throws
/// marks its point as failed; selection runs over the survivors.
inline DicResult compute_dic(const PanelData& data, const std::vector<ModelSpec>& grid, const McmcConfig& config,
                             const std::function<void(std::size_t, const DicPoint&)>& on_point = {}) {
  if (grid.empty()) throw UserError("compute_dic: empty grid");
  const bool foreign = data.N() > 1;
  auto lag_of = [&](const ModelSpec& s) { return foreign ? std::max(s.P, s.Q) : s.P; };
  int max_lag = 0;
  for (const auto& s : grid) max_lag = std::max(max_lag, lag_of(s));

  DicResult res;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    DicPoint pt{grid[g]};
    try {
      const Model model(align_sample(data, lag_of(grid[g]), max_lag), grid[g]);
      const auto chain = run_chain(model, config);
      pt.dic = chain.dic;
      if (!std::isfinite(pt.dic.dic())) throw NumericalError("non-finite DIC");
    } catch (const UserError&) {
      throw;
    } catch (const std::exception& e) {
      pt.failed = true;
      pt.error = e.what();
    }
    if (on_point) on_point(g, pt);
    res.points.push_back(std::move(pt));
  }
  for (std::size_t g = 0; g < res.points.size(); ++g) {
    if (res.points[g].failed) continue;
    if (res.selected < 0 || res.points[g].dic.dic() < res.points[static_cast<std::size_t>(res.selected)].dic.dic())
      res.selected = static_cast<int>(g);
  }
  return res;
}

}  // namespace gvarsv

#endif  // GVARSV_INFERENCE_HPP
