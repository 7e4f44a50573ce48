#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

#include "riskpg/contextual_policy.hpp"
#include "riskpg/envs/badminton.hpp"
#include "riskpg/risk.hpp"

namespace riskpg {

/// Contexts s = (x0, y0) drawn uniformly from a box; reward is the negative
/// landing error plus a bonus when the landing is within `tolerance` of x_des.
/// A box with lo == hi on an axis pins that coordinate.
struct ContextualBadmintonEnv {
  BadmintonToyEnv physics{0.0, 0.0, 9.81, 0.1, 3.0};
  double x_lo = 0.0, x_hi = 0.5;
  double y_lo = 0.0, y_hi = 0.5;
  double r_target = 1.0;
  double tolerance = 0.1;

  void validate() const {
    physics.validate();
    if (!(x_lo <= x_hi && y_lo <= y_hi)) throw std::invalid_argument("ContextualBadmintonEnv: invalid context box");
    if (!(y_lo >= 0.0)) throw std::invalid_argument("ContextualBadmintonEnv: y0 must be >= 0");
    if (!(tolerance > 0.0)) throw std::invalid_argument("ContextualBadmintonEnv: tolerance must be positive");
    if (!(r_target >= 0.0)) throw std::invalid_argument("ContextualBadmintonEnv: r_target must be >= 0");
  }

  bool in_box(const Vec& s) const {
    return s.size() == 2 && s[0] >= x_lo && s[0] <= x_hi && s[1] >= y_lo && s[1] <= y_hi;
  }

  Vec sample_context(Rng& rng) const {
    Vec s(2);
    s[0] = rng.uniform(x_lo, x_hi);
    s[1] = rng.uniform(y_lo, y_hi);
    return s;
  }

  BadmintonToyEnv at(const Vec& s) const {
    BadmintonToyEnv e = physics;
    e.x0 = s[0];
    e.y0 = s[1];
    return e;
  }
};

struct ContextualOutcome {
  double reward = 0.0;
  double error = 0.0;
  bool hit = false;
};

inline ContextualOutcome contextual_outcome(const ContextualBadmintonEnv& env, const Vec& s, const Vec& theta, Rng& rng) {
  if (!env.in_box(s)) throw std::domain_error("contextual_return: context outside the context box");
  const BadmintonToyEnv local = env.at(s);
  const auto shot = badminton_shot(local, theta, rng);
  ContextualOutcome out;
  out.error = shot.error(local.x_des);
  out.hit = std::abs(out.error) <= env.tolerance;
  out.reward = -std::abs(out.error) + (out.hit ? env.r_target : 0.0);
  return out;
}

inline double contextual_return(const ContextualBadmintonEnv& env, const Vec& s, const Vec& theta, Rng& rng) {
  return contextual_outcome(env, s, theta, rng).reward;
}

/// Certainty equivalent over the joint (context, parameter, noise) sample.
inline double contextual_objective_mc(const ContextualLinearGaussianPolicy& policy, const ContextualBadmintonEnv& env,
                                      double gamma, std::size_t n, Rng& rng) {
  if (n < 2) throw std::invalid_argument("contextual_objective_mc: n must be >= 2");
  std::vector<double> returns;
  returns.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec s = env.sample_context(rng);
    returns.push_back(contextual_return(env, s, policy.sample(s, rng), rng));
  }
  return certainty_equivalent_mc(returns, RiskConfig(gamma));
}

/// Fraction of contexts whose noise-free shot at the policy mean lands within tolerance.
inline double contextual_hit_rate(const ContextualLinearGaussianPolicy& policy, const ContextualBadmintonEnv& env,
                                  std::size_t n, Rng& rng) {
  ContextualBadmintonEnv quiet = env;
  quiet.physics.sigma_v0 = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec s = quiet.sample_context(rng);
    hits += contextual_outcome(quiet, s, policy.mean(s), rng).hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Ridge fit of M so that M^T phi(s) approximates a constant command u over
/// the given contexts.
inline Mat fit_constant_weights(const FourierFeatureMap& map, const std::vector<Vec>& contexts, const Vec& u, double ridge = 1e-3) {
  const Eigen::Index k = map.num_features();
  Mat phi(static_cast<Eigen::Index>(contexts.size()), k);
  for (std::size_t i = 0; i < contexts.size(); ++i) phi.row(static_cast<Eigen::Index>(i)) = rff_features(contexts[i], map).transpose();
  Mat gram = phi.transpose() * phi;
  gram.diagonal().array() += ridge;
  const Mat rhs = phi.transpose() * Mat::Ones(phi.rows(), 1) * u.transpose();
  return gram.ldlt().solve(rhs);
}

}  // namespace riskpg
