#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "riskpg/rng.hpp"

namespace riskpg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kLogStdFloor = -20.0;

/// Gaussian search distribution N(mean, diag(exp(log_std)^2)) in the
/// covariant (mean, log_std) coordinates. Gradients, scores and Fisher
/// entries are laid out as [mean block, log_std block], length 2d.
class DiagonalGaussianPolicy {
 public:
  DiagonalGaussianPolicy(Vec mean, Vec log_std) : mean_(std::move(mean)), log_std_(std::move(log_std)) {
    if (mean_.size() < 1 || mean_.size() != log_std_.size())
      throw std::invalid_argument("DiagonalGaussianPolicy: mean and log_std must have equal dimension >= 1");
    if (!mean_.allFinite() || !log_std_.allFinite())
      throw std::invalid_argument("DiagonalGaussianPolicy: non-finite parameters");
  }

  static DiagonalGaussianPolicy isotropic(Vec mean, double sigma) {
    const auto d = mean.size();
    return {std::move(mean), Vec::Constant(d, std::log(sigma))};
  }

  Eigen::Index dim() const { return mean_.size(); }
  Eigen::Index num_params() const { return 2 * mean_.size(); }
  const Vec& mean() const { return mean_; }
  const Vec& log_std() const { return log_std_; }
  Vec stddev() const { return log_std_.array().exp(); }

  Vec flat() const {
    Vec w(num_params());
    w << mean_, log_std_;
    return w;
  }

  /// Returns a new policy moved by `step` in (mean, log_std) coordinates,
  /// with log_std floored.
  DiagonalGaussianPolicy updated(const Vec& step, double log_std_floor = kLogStdFloor) const {
    if (step.size() != num_params()) throw std::invalid_argument("DiagonalGaussianPolicy::updated: dimension mismatch");
    Vec m = mean_ + step.head(dim());
    Vec ls = (log_std_ + step.tail(dim())).cwiseMax(log_std_floor);
    return {std::move(m), std::move(ls)};
  }

  Vec sample(Rng& rng) const {
    Vec theta(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) theta[j] = mean_[j] + std::exp(log_std_[j]) * rng.normal();
    return theta;
  }

  std::vector<Vec> sample(Rng& rng, std::size_t n) const {
    if (n < 1) throw std::invalid_argument("DiagonalGaussianPolicy::sample: n must be >= 1");
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(rng));
    return out;
  }

  double log_density(const Vec& theta) const {
    check_dim(theta);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const double z = (theta[j] - mean_[j]) * std::exp(-log_std_[j]);
      acc += -0.5 * z * z - log_std_[j] - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return acc;
  }

  /// Gradient of log_density w.r.t. (mean, log_std).
  Vec score(const Vec& theta) const {
    check_dim(theta);
    Vec g(num_params());
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const double inv_sigma = std::exp(-log_std_[j]);
      const double z = (theta[j] - mean_[j]) * inv_sigma;
      g[j] = z * inv_sigma;
      g[dim() + j] = z * z - 1.0;
    }
    return g;
  }

  /// Exact Fisher diagonal: 1/sigma^2 for mean entries, 2 for log_std entries.
  Vec fisher_diagonal() const {
    Vec f(num_params());
    f.head(dim()) = (-2.0 * log_std_.array()).exp();
    f.tail(dim()).setConstant(2.0);
    return f;
  }

  Mat fisher_information() const { return fisher_diagonal().asDiagonal(); }

  bool operator==(const DiagonalGaussianPolicy& o) const { return mean_ == o.mean_ && log_std_ == o.log_std_; }

 private:
  void check_dim(const Vec& theta) const {
    if (theta.size() != dim()) throw std::invalid_argument("DiagonalGaussianPolicy: parameter dimension mismatch");
  }

  Vec mean_;
  Vec log_std_;
};

/// Softmax onto the probability simplex, max-shifted.
inline Vec softmax_portfolio(const Vec& theta) {
  if (theta.size() == 0 || !theta.allFinite()) throw std::invalid_argument("softmax_portfolio: theta must be finite and non-empty");
  Vec x = (theta.array() - theta.maxCoeff()).exp();
  x /= x.sum();
  return x;
}

}  // namespace riskpg
