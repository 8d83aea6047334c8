#ifndef GVARSV_MIXTURE_HPP
#define GVARSV_MIXTURE_HPP

#include <array>
#include <cmath>
#include <numbers>

namespace gvarsv {

/// Ten-component Gaussian mixture for log chi^2(1) (Omori, Chib, Shephard and
/// Nakajima 2007). Component means are on the log chi^2 scale directly.
struct MixtureComponent {
  double prob;
  double mean;
  double variance;
};

inline constexpr std::array<MixtureComponent, 10> kLogChi2Mixture{{
    {0.00609, 1.92677, 0.11265},
    {0.04775, 1.34744, 0.17788},
    {0.13057, 0.73504, 0.26768},
    {0.20674, 0.02266, 0.40611},
    {0.22715, -0.85173, 0.62699},
    {0.18842, -1.97278, 0.98583},
    {0.12047, -3.46788, 1.57469},
    {0.05591, -5.55246, 2.54498},
    {0.01575, -8.68384, 4.16591},
    {0.00115, -14.65000, 7.33342},
}};

/// Exact density of log(x), x ~ chi^2(1).
inline double log_chi2_density(double z) {
  return std::exp(0.5 * (z - std::exp(z))) / std::sqrt(2.0 * std::numbers::pi);
}

inline double log_chi2_mixture_density(double z) {
  double f = 0.0;
  for (const auto& c : kLogChi2Mixture)
    f += c.prob * std::exp(-0.5 * (z - c.mean) * (z - c.mean) / c.variance) / std::sqrt(2.0 * std::numbers::pi * c.variance);
  return f;
}

}  // namespace gvarsv

#endif  // GVARSV_MIXTURE_HPP
