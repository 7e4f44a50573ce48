#pragma once

#include <cmath>
#include <stdexcept>

#include "riskpg/policy.hpp"
#include "riskpg/risk.hpp"
#include "riskpg/rng.hpp"

namespace riskpg {

/// Independent Gaussian asset returns r ~ N(mu_r, diag(sigma_r^2)).
struct PortfolioEnv {
  Vec asset_means;
  Vec asset_stds;

  Eigen::Index num_assets() const { return asset_means.size(); }

  void validate() const {
    if (asset_means.size() < 1 || asset_means.size() != asset_stds.size())
      throw std::invalid_argument("PortfolioEnv: asset means/stds must have equal non-zero length");
    if (!((asset_stds.array() > 0.0).all())) throw std::invalid_argument("PortfolioEnv: asset stds must be positive");
  }
};

inline PortfolioEnv make_linear_portfolio(Eigen::Index n, double mu_first, double mu_last, double sigma_first, double sigma_last) {
  PortfolioEnv env{Vec::LinSpaced(n, mu_first, mu_last), Vec::LinSpaced(n, sigma_first, sigma_last)};
  env.validate();
  return env;
}

/// 30 assets; means evenly from 4 down to 0.5, stds from 2 down to 0.01.
inline PortfolioEnv make_default_portfolio() { return make_linear_portfolio(30, 4.0, 0.5, 2.0, 0.01); }

inline void check_simplex(const PortfolioEnv& env, const Vec& x) {
  if (x.size() != env.num_assets()) throw std::invalid_argument("portfolio: allocation dimension mismatch");
  if (std::abs(x.sum() - 1.0) > 1e-8 || x.minCoeff() < -1e-8)
    throw std::domain_error("portfolio: allocation is off the probability simplex");
}

/// Exact return distribution N(mu_r^T x, x^T Sigma_r x).
inline GaussianMoments portfolio_return_dist(const PortfolioEnv& env, const Vec& x) {
  check_simplex(env, x);
  return {env.asset_means.dot(x), (env.asset_stds.array() * x.array()).square().sum()};
}

inline double portfolio_return_sample(const PortfolioEnv& env, const Vec& x, Rng& rng) {
  const auto m = portfolio_return_dist(env, x);
  return rng.normal(m.mean, std::sqrt(m.variance));
}

/// Black-box return of softmax-parameterized allocation theta.
inline double portfolio_evaluate(const PortfolioEnv& env, const Vec& theta, Rng& rng) {
  return portfolio_return_sample(env, softmax_portfolio(theta), rng);
}

}  // namespace riskpg
