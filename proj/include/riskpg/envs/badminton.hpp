#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "riskpg/policy.hpp"
#include "riskpg/risk.hpp"
#include "riskpg/rng.hpp"

namespace riskpg {

/// Planar ballistic shuttle launched from (x0, y0) with racket velocity u
/// perturbed by isotropic Gaussian noise.
struct BadmintonToyEnv {
  double x0 = 0.0;
  double y0 = 0.0;
  double g = 9.81;
  double sigma_v0 = 0.6;
  double x_des = 3.0;

  void validate() const {
    if (!(g > 0.0)) throw std::invalid_argument("BadmintonToyEnv: g must be positive");
    if (!(sigma_v0 >= 0.0)) throw std::invalid_argument("BadmintonToyEnv: sigma_v0 must be >= 0");
    if (!(y0 >= 0.0)) throw std::invalid_argument("BadmintonToyEnv: y0 must be >= 0");
  }
};

/// Landing abscissa x1 = x0 + vx (vy/g + sqrt(vy^2/g^2 + 2 y0/g)).
inline double landing_x(const BadmintonToyEnv& env, double vx, double vy) {
  const double flight = vy / env.g + std::sqrt(vy * vy / (env.g * env.g) + 2.0 * env.y0 / env.g);
  return env.x0 + vx * flight;
}

struct BadmintonShot {
  double vx = 0.0;
  double vy = 0.0;
  double x1 = 0.0;

  double speed() const { return std::hypot(vx, vy); }
  double error(double x_des) const { return x_des - x1; }
};

inline BadmintonShot badminton_shot(const BadmintonToyEnv& env, const Vec& u, Rng& rng) {
  if (u.size() != 2) throw std::invalid_argument("badminton: commanded velocity must be 2-D");
  BadmintonShot s;
  s.vx = u[0] + env.sigma_v0 * rng.normal();
  s.vy = u[1] + env.sigma_v0 * rng.normal();
  s.x1 = landing_x(env, s.vx, s.vy);
  return s;
}

/// C = |x_des - x1| for one noisy launch.
inline double badminton_cost(const BadmintonToyEnv& env, const Vec& u, Rng& rng) {
  return std::abs(badminton_shot(env, u, rng).error(env.x_des));
}

/// Exact mean and variance of x1 when v0 ~ N(mean, diag(policy_var + sigma_v0^2)).
/// Only defined for y0 = 0, where x1 = x0 + 2 vx max(vy, 0) / g.
inline std::optional<GaussianMoments> landing_moments(const BadmintonToyEnv& env, const DiagonalGaussianPolicy& policy) {
  if (env.y0 != 0.0 || policy.dim() != 2) return std::nullopt;
  const Vec sd = policy.stddev();
  const double sx2 = sd[0] * sd[0] + env.sigma_v0 * env.sigma_v0;
  const double sy2 = sd[1] * sd[1] + env.sigma_v0 * env.sigma_v0;
  const double mx = policy.mean()[0];
  const double my = policy.mean()[1];
  // Moments of the rectified Gaussian max(vy, 0).
  double pos1 = std::max(my, 0.0), pos2 = pos1 * pos1;
  if (sy2 > 0.0) {
    const double sy = std::sqrt(sy2);
    const double a = my / sy;
    const double cdf = 0.5 * std::erfc(-a / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    pos1 = my * cdf + sy * pdf;
    pos2 = (my * my + sy2) * cdf + my * sy * pdf;
  }
  const double k = 2.0 / env.g;
  const double m = env.x0 + k * mx * pos1;
  const double second = k * k * (mx * mx + sx2) * pos2;
  return GaussianMoments{m, std::max(0.0, second - k * k * mx * mx * pos1 * pos1)};
}

inline double badminton_evaluate(const BadmintonToyEnv& env, const Vec& u, Rng& rng) { return -badminton_cost(env, u, rng); }

}  // namespace riskpg
