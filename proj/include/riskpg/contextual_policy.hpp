#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "riskpg/policy.hpp"
#include "riskpg/rng.hpp"

namespace riskpg {

/// Random Fourier features phi_k(s) = sin(w_k . s / bandwidth + phase_k).
struct FourierFeatureMap {
  Mat frequencies;  // num_features x context_dim
  Vec phases;       // num_features, each in [0, 2pi)
  double bandwidth = 1.0;

  FourierFeatureMap() = default;
  FourierFeatureMap(Mat w, Vec b, double bw) : frequencies(std::move(w)), phases(std::move(b)), bandwidth(bw) {
    validate();
  }

  void validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw std::invalid_argument("FourierFeatureMap: bandwidth must be positive");
    if (phases.size() != frequencies.rows()) throw std::invalid_argument("FourierFeatureMap: phases/frequencies size mismatch");
    for (double p : phases)
      if (!(p >= 0.0 && p < 2.0 * std::numbers::pi)) throw std::invalid_argument("FourierFeatureMap: phase outside [0, 2pi)");
  }

  Eigen::Index num_features() const { return frequencies.rows(); }
  Eigen::Index context_dim() const { return frequencies.cols(); }
};

inline Vec rff_features(const Vec& s, const FourierFeatureMap& map) {
  if (s.size() != map.context_dim()) throw std::invalid_argument("rff_features: context dimension mismatch");
  Vec arg = map.frequencies * s / map.bandwidth + map.phases;
  return arg.array().sin();
}

/// Median pairwise Euclidean distance; the usual kernel bandwidth heuristic.
inline double median_pairwise_distance(const std::vector<Vec>& pilot) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pilot.size(); ++i)
    for (std::size_t j = i + 1; j < pilot.size(); ++j) d.push_back((pilot[i] - pilot[j]).norm());
  if (d.empty()) throw std::invalid_argument("median_pairwise_distance: need at least two pilot contexts");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

/// Draws standard-Gaussian frequencies and uniform phases; bandwidth from the
/// median heuristic over `pilot`.
inline FourierFeatureMap make_fourier_features(Eigen::Index num_features, const std::vector<Vec>& pilot, Rng& rng) {
  if (pilot.empty()) throw std::invalid_argument("make_fourier_features: empty pilot sample");
  const Eigen::Index c = pilot.front().size();
  Mat w(num_features, c);
  for (Eigen::Index k = 0; k < num_features; ++k)
    for (Eigen::Index j = 0; j < c; ++j) w(k, j) = rng.normal();
  Vec b(num_features);
  for (Eigen::Index k = 0; k < num_features; ++k) {
    b[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    if (b[k] >= 2.0 * std::numbers::pi) b[k] = 0.0;
  }
  double bw = median_pairwise_distance(pilot);
  if (!(bw > 0.0)) bw = 1.0;
  return {std::move(w), std::move(b), bw};
}

/// theta | s ~ N(M^T phi(s), diag(exp(log_std)^2)).
/// Flat parameter layout: M row-major (k * param_dim + j), then log_std.
class ContextualLinearGaussianPolicy {
 public:
  ContextualLinearGaussianPolicy(Mat weights, Vec log_std, FourierFeatureMap features)
      : weights_(std::move(weights)), log_std_(std::move(log_std)), features_(std::move(features)) {
    if (weights_.cols() != log_std_.size() || log_std_.size() < 1)
      throw std::invalid_argument("ContextualLinearGaussianPolicy: weight columns must equal log_std dimension");
    if (weights_.rows() != features_.num_features())
      throw std::invalid_argument("ContextualLinearGaussianPolicy: weight rows must equal feature count");
  }

  const Mat& weights() const { return weights_; }
  const Vec& log_std() const { return log_std_; }
  const FourierFeatureMap& features() const { return features_; }
  Eigen::Index param_dim() const { return log_std_.size(); }
  Eigen::Index num_features() const { return weights_.rows(); }
  Eigen::Index num_params() const { return weights_.size() + log_std_.size(); }

  Vec mean(const Vec& s) const { return weights_.transpose() * rff_features(s, features_); }

  Vec sample(const Vec& s, Rng& rng) const {
    Vec theta = mean(s);
    for (Eigen::Index j = 0; j < param_dim(); ++j) theta[j] += std::exp(log_std_[j]) * rng.normal();
    return theta;
  }

  Vec score(const Vec& s, const Vec& theta) const {
    if (theta.size() != param_dim()) throw std::invalid_argument("ContextualLinearGaussianPolicy::score: dimension mismatch");
    const Vec phi = rff_features(s, features_);
    const Vec m = weights_.transpose() * phi;
    const Eigen::Index d = param_dim();
    Vec g(num_params());
    for (Eigen::Index j = 0; j < d; ++j) {
      const double inv_sigma = std::exp(-log_std_[j]);
      const double z = (theta[j] - m[j]) * inv_sigma;
      for (Eigen::Index k = 0; k < num_features(); ++k) g[k * d + j] = phi[k] * z * inv_sigma;
      g[weights_.size() + j] = z * z - 1.0;
    }
    return g;
  }

  ContextualLinearGaussianPolicy updated(const Vec& step, double log_std_floor = kLogStdFloor) const {
    if (step.size() != num_params()) throw std::invalid_argument("ContextualLinearGaussianPolicy::updated: dimension mismatch");
    Mat w = weights_;
    const Eigen::Index d = param_dim();
    for (Eigen::Index k = 0; k < num_features(); ++k)
      for (Eigen::Index j = 0; j < d; ++j) w(k, j) += step[k * d + j];
    Vec ls = (log_std_ + step.tail(d)).cwiseMax(log_std_floor);
    return {std::move(w), std::move(ls), features_};
  }

 private:
  Mat weights_;
  Vec log_std_;
  FourierFeatureMap features_;
};

inline Vec contextual_sample(const ContextualLinearGaussianPolicy& policy, const Vec& s, Rng& rng) {
  return policy.sample(s, rng);
}

}  // namespace riskpg
