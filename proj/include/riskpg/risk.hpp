#pragma once

// Entropic risk: exponential utility, certainty equivalents and the
// log-partition baseline. Everything here is computed in shifted log-space.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskpg {

inline constexpr double kGammaZeroEpsilon = 1e-8;

struct GaussianMoments {
  double mean = 0.0;
  double variance = 0.0;
};

struct RiskConfig {
  double gamma = 0.0;
  double gamma_zero_epsilon = kGammaZeroEpsilon;

  RiskConfig() = default;
  explicit RiskConfig(double g, double eps = kGammaZeroEpsilon) : gamma(g), gamma_zero_epsilon(eps) {
    validate();
  }

  void validate() const {
    if (!std::isfinite(gamma)) throw std::invalid_argument("RiskConfig: gamma must be finite");
    if (!(gamma_zero_epsilon > 0.0))
      throw std::invalid_argument("RiskConfig: gamma_zero_epsilon must be positive");
  }

  bool is_neutral() const { return std::abs(gamma) < gamma_zero_epsilon; }
};

namespace detail {

inline void check_samples(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("return sample is empty");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("return sample contains a non-finite value");
}

}  // namespace detail

/// log(sum_i exp(x_i)), stable for any finite inputs.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

inline double mean(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

/// Population (1/N) variance.
inline double variance(std::span<const double> x) {
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size());
}

/// Exponential utility U(R) = exp(-gamma R).
inline double utility(double r, double gamma) {
  if (!std::isfinite(r) || !std::isfinite(gamma)) throw std::invalid_argument("utility: non-finite input");
  const double u = std::exp(-gamma * r);
  if (std::isinf(u)) throw std::range_error("utility: exp(-gamma*r) overflows for gamma*r = " + std::to_string(gamma * r));
  return u;
}

/// Sample certainty equivalent -(1/gamma) log mean(exp(-gamma R_i)).
/// Falls back to the arithmetic mean when |gamma| is below the zero threshold.
inline double certainty_equivalent_mc(std::span<const double> returns, const RiskConfig& cfg) {
  detail::check_samples(returns);
  cfg.validate();
  if (cfg.is_neutral()) return mean(returns);
  std::vector<double> exponents(returns.size());
  std::transform(returns.begin(), returns.end(), exponents.begin(),
                 [g = cfg.gamma](double r) { return -g * r; });
  const double log_mean = log_sum_exp(exponents) - std::log(static_cast<double>(returns.size()));
  return -log_mean / cfg.gamma;
}

/// Closed form for Gaussian returns: mu - gamma sigma^2 / 2.
inline double certainty_equivalent_gaussian(double mu, double sigma, double gamma) {
  if (sigma < 0.0) throw std::domain_error("certainty_equivalent_gaussian: sigma must be non-negative");
  return mu - 0.5 * gamma * sigma * sigma;
}

/// In-sample estimate of the log-partition psi_gamma. Same quantity as the
/// certainty equivalent; kept separate because it plays the baseline role.
inline double log_partition_estimate(std::span<const double> returns, const RiskConfig& cfg) {
  return certainty_equivalent_mc(returns, cfg);
}

/// Self-normalized weights w_i = exp(-gamma (R_i - psi)); mean(w) == 1.
inline std::vector<double> exp_weights(std::span<const double> returns, const RiskConfig& cfg) {
  detail::check_samples(returns);
  cfg.validate();
  if (cfg.is_neutral())
    throw std::invalid_argument("exp_weights: |gamma| below the zero threshold; use centered returns");
  std::vector<double> w(returns.size());
  std::transform(returns.begin(), returns.end(), w.begin(), [g = cfg.gamma](double r) { return -g * r; });
  const double log_norm = log_sum_exp(w) - std::log(static_cast<double>(w.size()));
  for (double& v : w) v = std::exp(v - log_norm);
  return w;
}

}  // namespace riskpg
