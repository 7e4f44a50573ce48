#pragma once

// Relative Entropy Policy Search on a Gaussian search distribution:
// exponential reweighting with temperature eta, eta from the convex dual,
// and a closed-form weighted moment projection.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskpg/gradients.hpp"
#include "riskpg/policy.hpp"
#include "riskpg/risk.hpp"
#include "riskpg/rng.hpp"

namespace riskpg {

struct RepsConfig {
  double epsilon = 0.5;
  double eta_min = 1e-6;
  double eta_max = 1e6;
  double dual_tol = 1e-8;  // in log(eta)
  double covariance_floor = 1e-12;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("RepsConfig: epsilon must be positive");
    if (!(eta_min > 0.0 && eta_min < eta_max)) throw std::invalid_argument("RepsConfig: need 0 < eta_min < eta_max");
    if (!(dual_tol > 0.0)) throw std::invalid_argument("RepsConfig: dual_tol must be positive");
    if (!(covariance_floor >= 0.0)) throw std::invalid_argument("RepsConfig: covariance_floor must be >= 0");
  }
};

/// g(eta) = eta*eps + eta*(LSE(R/eta) - log N).
inline double reps_dual(double eta, std::span<const double> returns, double epsilon) {
  if (!(eta > 0.0)) throw std::domain_error("reps_dual: eta must be positive");
  detail::check_samples(returns);
  std::vector<double> scaled(returns.begin(), returns.end());
  for (double& r : scaled) r /= eta;
  return eta * epsilon + eta * (log_sum_exp(scaled) - std::log(static_cast<double>(scaled.size())));
}

struct DualSolution {
  double eta = 0.0;
  double value = 0.0;
  bool clamped = false;  // minimizer sits on a search bound
};

/// Golden-section search over log(eta) in [eta_min, eta_max].
inline DualSolution solve_dual(std::span<const double> returns, const RepsConfig& cfg) {
  cfg.validate();
  detail::check_samples(returns);
  const auto [lo_it, hi_it] = std::minmax_element(returns.begin(), returns.end());
  if (*lo_it == *hi_it) return {cfg.eta_min, reps_dual(cfg.eta_min, returns, cfg.epsilon), true};

  const auto g = [&](double log_eta) { return reps_dual(std::exp(log_eta), returns, cfg.epsilon); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(cfg.eta_min);
  double b = std::log(cfg.eta_max);
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double gc = g(c);
  double gd = g(d);
  while (b - a > cfg.dual_tol) {
    if (gc <= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - inv_phi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + inv_phi * (b - a);
      gd = g(d);
    }
  }
  const double log_eta = 0.5 * (a + b);
  const double eta = std::clamp(std::exp(log_eta), cfg.eta_min, cfg.eta_max);
  const double edge = 4.0 * cfg.dual_tol;
  const bool clamped = log_eta - std::log(cfg.eta_min) < edge || std::log(cfg.eta_max) - log_eta < edge;
  return {eta, reps_dual(eta, returns, cfg.epsilon), clamped};
}

/// w_i proportional to exp((R_i - max R)/eta), summing to 1.
inline std::vector<double> reps_weights(std::span<const double> returns, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("reps_weights: eta must be positive");
  detail::check_samples(returns);
  const double peak = *std::max_element(returns.begin(), returns.end());
  std::vector<double> w(returns.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = std::exp((returns[i] - peak) / eta));
  for (double& v : w) v /= total;
  return w;
}

/// KL of the reweighted empirical measure from uniform, in nats.
inline double effective_kl(std::span<const double> weights) {
  const double n = static_cast<double>(weights.size());
  double kl = 0.0;
  for (double w : weights)
    if (w > 0.0) kl += w * std::log(n * w);
  return kl;
}

struct WeightedFit {
  DiagonalGaussianPolicy policy;
  bool variance_floored = false;
};

/// Weighted moment projection onto a diagonal Gaussian.
inline WeightedFit weighted_ml_fit(const std::vector<Vec>& params, std::span<const double> weights, double covariance_floor) {
  if (params.empty() || params.size() != weights.size()) throw std::invalid_argument("weighted_ml_fit: params/weights mismatch");
  const Eigen::Index d = params.front().size();
  Vec m = Vec::Zero(d);
  for (std::size_t i = 0; i < params.size(); ++i) m += weights[i] * params[i];
  Vec var = Vec::Zero(d);
  for (std::size_t i = 0; i < params.size(); ++i) var += weights[i] * (params[i] - m).cwiseAbs2();
  bool floored = false;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(var[j] > covariance_floor)) {
      var[j] = covariance_floor;
      floored = true;
    }
  }
  // A zero floor with collapsed weights would give log(0); keep log_std finite.
  Vec log_std = (0.5 * var.array().log()).matrix().cwiseMax(kLogStdFloor);
  return {DiagonalGaussianPolicy(std::move(m), std::move(log_std)), floored};
}

struct RepsSolution {
  double eta_star = 0.0;
  std::vector<double> weights;
  DiagonalGaussianPolicy refit_policy;
  double effective_kl = 0.0;
  double dual_value = 0.0;
  bool eta_clamped = false;
  bool variance_floored = false;
  RolloutBatch batch;

  double implied_gamma() const { return -1.0 / eta_star; }
};

/// One REPS iteration: sample from q, evaluate, solve the dual, reweight, refit.
template <class Eval>
RepsSolution reps_step(const DiagonalGaussianPolicy& q, Eval&& eval, const RepsConfig& cfg, Rng& rng, std::size_t samples) {
  cfg.validate();
  if (samples < 2) throw std::invalid_argument("reps_step: need at least two samples");
  RolloutBatch batch;
  batch.params = q.sample(rng, samples);
  for (const auto& theta : batch.params) batch.returns.push_back(eval(theta, rng));
  batch.validate();
  const DualSolution dual = solve_dual(batch.returns, cfg);
  auto w = reps_weights(batch.returns, dual.eta);
  auto fit = weighted_ml_fit(batch.params, w, cfg.covariance_floor);
  const double kl = effective_kl(w);
  return {dual.eta, std::move(w), std::move(fit.policy), kl, dual.value, dual.clamped, fit.variance_floored, std::move(batch)};
}

struct BridgeCheck {
  Vec gradient_reps;
  Vec gradient_risk;
  double cosine = 0.0;
};

/// Compares the moment-projection gradient (weights exp((R - psi)/eta)) with
/// the risk-sensitive gradient at gamma = -1/eta on the same batch.
inline BridgeCheck bridge_check(const RolloutBatch& batch, const DiagonalGaussianPolicy& policy, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("bridge_check: eta must be positive");
  batch.validate();
  auto w = reps_weights(batch.returns, eta);
  const double n = static_cast<double>(w.size());
  for (double& v : w) v *= n;
  const Mat scores = score_matrix(batch, policy);
  BridgeCheck out;
  out.gradient_reps = weighted_score_mean(scores, w);
  out.gradient_risk = risk_pg(batch, policy, -1.0 / eta);
  out.cosine = out.gradient_reps.dot(out.gradient_risk) / (out.gradient_reps.norm() * out.gradient_risk.norm());
  return out;
}

}  // namespace riskpg
