#pragma once

// Likelihood-ratio gradients of the entropic risk objective
//   J_gamma(omega) = -(1/gamma) log E[exp(-gamma R(theta))],  theta ~ pi_omega
// and the gradient-ascent loops built on them.

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "riskpg/contextual_policy.hpp"
#include "riskpg/policy.hpp"
#include "riskpg/record.hpp"
#include "riskpg/risk.hpp"
#include "riskpg/rng.hpp"

namespace riskpg {

struct RolloutBatch {
  std::vector<Vec> params;
  std::vector<double> returns;

  std::size_t size() const { return returns.size(); }

  void validate() const {
    if (params.size() != returns.size()) throw std::invalid_argument("RolloutBatch: params/returns length mismatch");
    if (returns.size() < 2) throw std::invalid_argument("RolloutBatch: need at least two samples");
    for (double r : returns)
      if (!std::isfinite(r)) throw std::invalid_argument("RolloutBatch: non-finite return");
    for (const auto& p : params)
      if (!p.allFinite()) throw std::invalid_argument("RolloutBatch: non-finite parameter vector");
  }
};

/// Rows are per-sample scores in (mean, log_std) coordinates.
inline Mat score_matrix(const RolloutBatch& batch, const DiagonalGaussianPolicy& policy) {
  Mat s(static_cast<Eigen::Index>(batch.size()), policy.num_params());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.params[i].size() != policy.dim()) throw std::invalid_argument("policy/batch dimension mismatch");
    s.row(static_cast<Eigen::Index>(i)) = policy.score(batch.params[i]).transpose();
  }
  return s;
}

/// N^-1 sum_i c_i score_i.
inline Vec weighted_score_mean(const Mat& scores, std::span<const double> coeffs) {
  const Eigen::Map<const Vec> c(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
  return scores.transpose() * c / static_cast<double>(coeffs.size());
}

/// c_i = -(1/gamma) exp(-gamma (R_i - psi_hat)).
inline std::vector<double> risk_coefficients(std::span<const double> returns, double gamma) {
  RiskConfig cfg(gamma);
  if (cfg.is_neutral()) throw std::invalid_argument("risk_coefficients: |gamma| below the zero threshold; use the neutral estimator");
  auto c = exp_weights(returns, cfg);
  for (double& v : c) v *= -1.0 / gamma;
  return c;
}

inline std::vector<double> centered(std::span<const double> values) {
  const double m = mean(values);
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v -= m;
  return out;
}

inline Vec risk_pg(const RolloutBatch& batch, const DiagonalGaussianPolicy& policy, double gamma) {
  batch.validate();
  return weighted_score_mean(score_matrix(batch, policy), risk_coefficients(batch.returns, gamma));
}

/// Risk-neutral limit: score-weighted centered returns.
inline Vec risk_pg_neutral(const RolloutBatch& batch, const DiagonalGaussianPolicy& policy) {
  batch.validate();
  return weighted_score_mean(score_matrix(batch, policy), centered(batch.returns));
}

/// risk_pg with the batch mean of the coefficients subtracted.
inline Vec additive_baseline_pg(const RolloutBatch& batch, const DiagonalGaussianPolicy& policy, double gamma) {
  batch.validate();
  return weighted_score_mean(score_matrix(batch, policy), centered(risk_coefficients(batch.returns, gamma)));
}

/// F^-1 grad with the exact diagonal Fisher.
inline Vec natural_precondition(const Vec& grad, const DiagonalGaussianPolicy& policy) {
  if (grad.size() != policy.num_params()) throw std::invalid_argument("natural_precondition: dimension mismatch");
  return grad.cwiseQuotient(policy.fisher_diagonal());
}

enum class GradientEstimator {
  likelihood_ratio,   // risk_pg as written
  additive_baseline,  // coefficients centered in-batch
};

/// Picks the neutral estimator when |gamma| is below the zero threshold.
inline Vec estimate_gradient(const RolloutBatch& batch, const DiagonalGaussianPolicy& policy, double gamma,
                             GradientEstimator estimator) {
  if (RiskConfig(gamma).is_neutral()) return risk_pg_neutral(batch, policy);
  return estimator == GradientEstimator::additive_baseline ? additive_baseline_pg(batch, policy, gamma)
                                                           : risk_pg(batch, policy, gamma);
}

struct AscentConfig {
  double step_size = 0.05;
  std::size_t iterations = 300;
  std::size_t samples_per_iter = 500;
  bool use_natural = false;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double decay = 1.0;  // per-iteration multiplicative step decay; 0.999 when enabled
  double clip_norm = 1e3;
  GradientEstimator estimator = GradientEstimator::additive_baseline;

  void validate() const {
    if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw std::invalid_argument("AscentConfig: step size must be >= 0");
    if (iterations < 1) throw std::invalid_argument("AscentConfig: iterations must be >= 1");
    if (samples_per_iter < 2) throw std::invalid_argument("AscentConfig: samples_per_iter must be >= 2");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("AscentConfig: decay must be in (0, 1]");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("AscentConfig: clip_norm must be positive");
    RiskConfig{gamma};
  }
};

class AscentError : public std::runtime_error {
 public:
  AscentError(std::size_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

template <class Policy>
struct AscentStep {
  Policy policy;  // policy after this iteration's update
  IterationRecord record;  // statistics of the batch drawn from the pre-update policy
};

inline Vec clip_to_norm(Vec g, double max_norm) {
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
  return g;
}

inline void fill_return_stats(IterationRecord& rec, std::span<const double> returns, double gamma) {
  rec.gamma = gamma;
  rec.j_risk = certainty_equivalent_mc(returns, RiskConfig(gamma));
  rec.mean_return = mean(returns);
  rec.var_return = variance(returns);
}

/// Annotates a record with environment-specific extras.
using BatchAnnotator = std::function<void(const RolloutBatch&, const DiagonalGaussianPolicy&, IterationRecord&)>;

/// Gradient ascent omega_{k+1} = omega_k + alpha_k * g_k on the risk objective.
/// `eval(theta, rng)` returns R(theta). Deterministic given cfg.seed.
template <class Eval>
std::vector<AscentStep<DiagonalGaussianPolicy>> ascend(Eval&& eval, DiagonalGaussianPolicy policy, const AscentConfig& cfg,
                                                       const BatchAnnotator& annotate = {}) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<AscentStep<DiagonalGaussianPolicy>> out;
  out.reserve(cfg.iterations);
  double alpha = cfg.step_size;
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    RolloutBatch batch;
    batch.params = policy.sample(rng, cfg.samples_per_iter);
    batch.returns.reserve(cfg.samples_per_iter);
    for (const auto& theta : batch.params) batch.returns.push_back(eval(theta, rng));
    for (double r : batch.returns)
      if (!std::isfinite(r)) throw AscentError(k, "environment returned a non-finite return");

    IterationRecord rec;
    rec.iter = k;
    fill_return_stats(rec, batch.returns, cfg.gamma);
    rec.policy_mean_norm = policy.mean().norm();
    rec.policy_sigma_mean = policy.stddev().mean();
    if (annotate) annotate(batch, policy, rec);

    Vec g = estimate_gradient(batch, policy, cfg.gamma, cfg.estimator);
    if (cfg.use_natural) g = natural_precondition(g, policy);
    if (!g.allFinite()) throw AscentError(k, "non-finite gradient");
    g = clip_to_norm(std::move(g), cfg.clip_norm);
    policy = policy.updated(alpha * g);
    alpha *= cfg.decay;
    out.push_back({policy, std::move(rec)});
  }
  return out;
}

// --- contextual ------------------------------------------------------------

struct ContextualBatch {
  std::vector<Vec> contexts;
  std::vector<Vec> params;
  std::vector<double> returns;

  std::size_t size() const { return returns.size(); }

  void validate() const {
    if (contexts.size() != returns.size() || params.size() != returns.size())
      throw std::invalid_argument("ContextualBatch: length mismatch");
    if (returns.size() < 2) throw std::invalid_argument("ContextualBatch: need at least two samples");
    for (double r : returns)
      if (!std::isfinite(r)) throw std::invalid_argument("ContextualBatch: non-finite return");
  }
};

inline Mat score_matrix(const ContextualBatch& batch, const ContextualLinearGaussianPolicy& policy) {
  Mat s(static_cast<Eigen::Index>(batch.size()), policy.num_params());
  for (std::size_t i = 0; i < batch.size(); ++i)
    s.row(static_cast<Eigen::Index>(i)) = policy.score(batch.contexts[i], batch.params[i]).transpose();
  return s;
}

inline Vec contextual_gradient(const ContextualBatch& batch, const ContextualLinearGaussianPolicy& policy, double gamma,
                               GradientEstimator estimator) {
  batch.validate();
  const Mat scores = score_matrix(batch, policy);
  if (RiskConfig(gamma).is_neutral()) return weighted_score_mean(scores, centered(batch.returns));
  auto c = risk_coefficients(batch.returns, gamma);
  if (estimator == GradientEstimator::additive_baseline) c = centered(c);
  return weighted_score_mean(scores, c);
}

/// Natural gradient for the contextual policy. The weight block uses the
/// batch feature second moment (ridge-regularized); log_std entries are halved.
inline Vec contextual_natural_precondition(const Vec& grad, const ContextualLinearGaussianPolicy& policy,
                                           const std::vector<Vec>& contexts, double ridge = 1e-6) {
  const Eigen::Index k = policy.num_features();
  const Eigen::Index d = policy.param_dim();
  Mat gram = Mat::Zero(k, k);
  for (const auto& s : contexts) {
    const Vec phi = rff_features(s, policy.features());
    gram.noalias() += phi * phi.transpose();
  }
  gram /= static_cast<double>(contexts.size());
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Mat> solver(gram);
  Vec out(grad.size());
  for (Eigen::Index j = 0; j < d; ++j) {
    Vec gj(k);
    for (Eigen::Index r = 0; r < k; ++r) gj[r] = grad[r * d + j];
    const Vec xj = solver.solve(gj) * std::exp(2.0 * policy.log_std()[j]);
    for (Eigen::Index r = 0; r < k; ++r) out[r * d + j] = xj[r];
  }
  out.tail(d) = grad.tail(d) / 2.0;
  return out;
}

using ContextualAnnotator =
    std::function<void(const ContextualBatch&, const ContextualLinearGaussianPolicy&, IterationRecord&)>;

/// Contextual counterpart of `ascend`. `draw_context(rng)` samples s ~ mu(s),
/// `eval(s, theta, rng)` returns R(theta, s).
template <class ContextSampler, class Eval>
std::vector<AscentStep<ContextualLinearGaussianPolicy>> ascend_contextual(ContextSampler&& draw_context, Eval&& eval,
                                                                          ContextualLinearGaussianPolicy policy,
                                                                          const AscentConfig& cfg,
                                                                          const ContextualAnnotator& annotate = {}) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<AscentStep<ContextualLinearGaussianPolicy>> out;
  out.reserve(cfg.iterations);
  double alpha = cfg.step_size;
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    ContextualBatch batch;
    for (std::size_t i = 0; i < cfg.samples_per_iter; ++i) {
      Vec s = draw_context(rng);
      Vec theta = policy.sample(s, rng);
      const double r = eval(s, theta, rng);
      if (!std::isfinite(r)) throw AscentError(k, "environment returned a non-finite return");
      batch.contexts.push_back(std::move(s));
      batch.params.push_back(std::move(theta));
      batch.returns.push_back(r);
    }
    IterationRecord rec;
    rec.iter = k;
    fill_return_stats(rec, batch.returns, cfg.gamma);
    rec.policy_mean_norm = policy.weights().norm();
    rec.policy_sigma_mean = policy.log_std().array().exp().mean();
    if (annotate) annotate(batch, policy, rec);

    Vec g = contextual_gradient(batch, policy, cfg.gamma, cfg.estimator);
    if (cfg.use_natural) g = contextual_natural_precondition(g, policy, batch.contexts);
    if (!g.allFinite()) throw AscentError(k, "non-finite gradient");
    g = clip_to_norm(std::move(g), cfg.clip_norm);
    policy = policy.updated(alpha * g);
    alpha *= cfg.decay;
    out.push_back({policy, std::move(rec)});
  }
  return out;
}

// --- exact gradient fields ----------------------------------------------------

/// Exact objective value and covariant gradient at one (mu, sigma) point.
struct ExactGradient {
  double value = 0.0;
  double d_mean = 0.0;
  double d_log_std = 0.0;
  bool converged = true;
};

struct GradientFieldPoint {
  double mu = 0.0;
  double sigma = 0.0;
  ExactGradient grad;
};

struct FieldGrid {
  double mu_lo = -2.0, mu_hi = 2.0;
  std::size_t mu_points = 21;
  double sigma_lo = 0.1, sigma_hi = 2.0;
  std::size_t sigma_points = 21;

  void validate() const {
    if (mu_points < 1 || sigma_points < 1) throw std::invalid_argument("FieldGrid: empty grid");
    if (!(sigma_lo > 0.0) || sigma_hi < sigma_lo || mu_hi < mu_lo) throw std::invalid_argument("FieldGrid: invalid ranges");
  }

  static double node(double lo, double hi, std::size_t n, std::size_t i) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
};

/// Evaluates `objective(mu, sigma, gamma) -> ExactGradient` on the grid,
/// sigma-major then mu. Non-converged points are kept and flagged.
template <class Objective>
std::vector<GradientFieldPoint> gradient_field(Objective&& objective, const FieldGrid& grid, double gamma) {
  grid.validate();
  std::vector<GradientFieldPoint> out;
  out.reserve(grid.mu_points * grid.sigma_points);
  for (std::size_t is = 0; is < grid.sigma_points; ++is) {
    const double sigma = FieldGrid::node(grid.sigma_lo, grid.sigma_hi, grid.sigma_points, is);
    for (std::size_t im = 0; im < grid.mu_points; ++im) {
      const double mu = FieldGrid::node(grid.mu_lo, grid.mu_hi, grid.mu_points, im);
      out.push_back({mu, sigma, objective(mu, sigma, gamma)});
    }
  }
  return out;
}

}  // namespace riskpg
