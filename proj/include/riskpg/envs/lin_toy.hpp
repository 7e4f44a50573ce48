#pragma once

// One-dimensional toy problem: R(theta) = -|theta| with theta ~ N(mu, sigma^2).
// The exact risk objective -(1/gamma) log E[exp(gamma |theta|)] and its
// covariant gradient are computed by adaptive Gauss-Kronrod quadrature in the
// standardized variable z = (theta - mu) / sigma, split at the kink.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "riskpg/gradients.hpp"
#include "riskpg/policy.hpp"
#include "riskpg/risk.hpp"

namespace riskpg {

struct LinToyEnv {};

inline double lin_toy_return(const Vec& theta) {
  if (theta.size() != 1) throw std::invalid_argument("lin_toy: parameter must be 1-D");
  return -std::abs(theta[0]);
}

inline double lin_toy_evaluate(const LinToyEnv&, const Vec& theta, Rng&) { return lin_toy_return(theta); }

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Integral {
  double value = 0.0;
  double error = 0.0;
};

/// Integrates f over [lo, hi] split at the given interior points, on a finite
/// window wide enough that the Gaussian tail beyond it is far below double
/// precision.
template <class F>
Integral integrate_split(F&& f, double lo, double hi, std::vector<double> breaks) {
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  for (double& b : breaks) b = std::clamp(b, lo, hi);
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  Integral out;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (b <= a) continue;
    double err = 0.0;
    out.value += Quad::integrate(f, a, b, 12, 1e-12, &err);
    out.error += err;
  }
  return out;
}

}  // namespace detail

/// Exact objective and (mean, log_std) gradient of the toy problem.
inline ExactGradient lin_toy_exact(double mu, double sigma, double gamma) {
  if (!(sigma > 0.0)) throw std::domain_error("lin_toy_exact: sigma must be positive");
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double kink = -mu / sigma;
  const double reach = std::abs(gamma) * sigma;
  const double lo = -reach - 14.0;
  const double hi = reach + 14.0;
  ExactGradient out;

  if (RiskConfig(gamma).is_neutral()) {
    auto moment = [&](auto weight) {
      return detail::integrate_split(
          [&](double z) { return weight(z) * std::abs(mu + sigma * z) * std::exp(-0.5 * z * z) * inv_sqrt_2pi; }, lo, hi,
          {kink});
    };
    const auto k0 = moment([](double) { return 1.0; });
    const auto k1 = moment([](double z) { return z; });
    const auto k2 = moment([](double z) { return z * z - 1.0; });
    out.value = -k0.value;
    out.d_mean = -k1.value / sigma;
    out.d_log_std = -k2.value;
    const double scale = std::max(k0.value, 1e-300);
    out.converged = std::max({k0.error, k1.error, k2.error}) <= 1e-8 * std::max(scale, 1.0);
    return out;
  }

  // On each side s of the kink the exponent s*gamma*(mu + sigma z) - z^2/2 is
  // the Gaussian -(z - c_s)^2 / 2 + k_s. Subtracting the largest value it
  // attains keeps every integrand <= 1. Where that maximum is interior the
  // completed-square form avoids cancellation; where it sits on the kink the
  // form anchored there does.
  struct Side {
    double s, c, k;
    bool interior;
  };
  auto side = [&](double s) {
    const double c = s * gamma * sigma;
    return Side{s, c, s * gamma * mu + 0.5 * gamma * gamma * sigma * sigma, s * (c - kink) > 0.0};
  };
  const Side up = side(1.0), dn = side(-1.0);
  auto peak = [&](const Side& sd) {
    return sd.interior ? sd.k : sd.k - 0.5 * (kink - sd.c) * (kink - sd.c);
  };
  const double shift = std::max(peak(up), peak(dn));
  std::vector<double> breaks{kink};
  for (const auto* sd : {&dn, &up}) {
    const double h = 1.0 / std::max(1.0, std::abs(kink - sd->c));
    for (double m : {1.0, 8.0, 40.0}) breaks.push_back(kink + sd->s * m * h);
    if (sd->interior)
      for (double m : {-8.0, 0.0, 8.0}) breaks.push_back(sd->c + m);
  }
  auto exponent = [&](double z) {
    const Side& sd = z >= kink ? up : dn;
    if (sd.interior) {
      const double d = z - sd.c;
      return -0.5 * d * d + (sd.k - shift);
    }
    return sd.s * gamma * sigma * (z - kink) - 0.5 * z * z - shift;
  };
  auto moment = [&](auto weight) {
    return detail::integrate_split(
        [&](double z) { return weight(z) * std::exp(exponent(z)) * inv_sqrt_2pi; },
        lo, hi, breaks);
  };
  const auto i0 = moment([](double) { return 1.0; });
  const auto i1 = moment([](double z) { return z; });
  const auto i2 = moment([](double z) { return z * z - 1.0; });
  if (!(i0.value > 0.0)) {
    out.converged = false;
    return out;
  }
  out.value = -(std::log(i0.value) + shift) / gamma;
  out.d_mean = -(i1.value / sigma) / (gamma * i0.value);
  out.d_log_std = -i2.value / (gamma * i0.value);
  // |z| and z^2 - 1 reach about `reach` and `reach^2` where the mass sits.
  const double z1 = std::max(1.0, reach), z2 = z1 * z1;
  out.converged = i0.error <= 1e-8 * i0.value && i1.error <= 1e-8 * z1 * i0.value && i2.error <= 1e-8 * z2 * i0.value;
  return out;
}

/// Objective only; throws QuadratureError when the quadrature fails.
inline double lin_toy_objective_exact(double mu, double sigma, double gamma) {
  const auto r = lin_toy_exact(mu, sigma, gamma);
  if (!r.converged) throw QuadratureError("lin_toy_objective_exact: quadrature did not converge");
  return r.value;
}

}  // namespace riskpg
