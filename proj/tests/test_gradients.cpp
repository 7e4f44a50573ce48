#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "riskpg/envs/lin_toy.hpp"
#include "riskpg/gradients.hpp"

using namespace riskpg;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

template <class F>
RolloutBatch draw(const DiagonalGaussianPolicy& p, std::size_t n, Rng& rng, F&& reward) {
  RolloutBatch b;
  b.params = p.sample(rng, n);
  for (const auto& t : b.params) b.returns.push_back(reward(t));
  return b;
}

double linear(const Vec& t) { return t[0]; }

struct MeanAndSe {
  Vec mean, se;
};

template <class Est>
MeanAndSe repeat(Est&& est, int reps, std::size_t n, const DiagonalGaussianPolicy& p, std::uint64_t seed,
                 double (*reward)(const Vec&)) {
  Rng rng(seed);
  std::vector<Vec> g;
  for (int r = 0; r < reps; ++r) g.push_back(est(draw(p, n, rng, reward)));
  Vec m = Vec::Zero(g[0].size()), v = Vec::Zero(g[0].size());
  for (const auto& x : g) m += x;
  m /= reps;
  for (const auto& x : g) v += (x - m).cwiseAbs2();
  v /= (reps - 1);
  return {m, (v / reps).cwiseSqrt()};
}

}  // namespace

TEST(RolloutBatch, Validation) {
  RolloutBatch b{{vec({0})}, {1.0}};
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = {{vec({0}), vec({1})}, {1.0, NAN}};
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = {{vec({0}), vec({1})}, {1.0}};
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(RiskPg, ConstantReturns) {
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.5, -1}), 0.7);
  Rng rng(1);
  const std::size_t n = 2000;
  const auto b = draw(p, n, rng, [](const Vec&) { return 4.0; });
  for (double g : {-2.0, 0.5, 3.0}) {
    const Vec grad = risk_pg(b, p, g);
    EXPECT_LE(grad.norm(), 4 * std::sqrt(p.fisher_diagonal().sum()) / (std::abs(g) * std::sqrt(double(n))));
    const Vec expect = -score_matrix(b, p).colwise().mean().transpose() / g;
    EXPECT_LT((grad - expect).norm(), 1e-12);
    EXPECT_LT(additive_baseline_pg(b, p, g).norm(), 1e-14);
  }
  EXPECT_EQ(risk_pg_neutral(b, p), Vec::Zero(4));
}

TEST(RiskPg, DimensionMismatch) {
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.5, -1}), 0.7);
  RolloutBatch b{{vec({0}), vec({1})}, {1.0, 2.0}};
  EXPECT_THROW(risk_pg(b, p, 1.0), std::invalid_argument);
  EXPECT_THROW(risk_pg_neutral(b, p), std::invalid_argument);
}

TEST(RiskPg, NeutralShiftInvariant) {
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.2}), 1.0);
  Rng rng(2);
  auto b = draw(p, 500, rng, [](const Vec& t) { return std::sin(3 * t[0]); });
  const Vec g0 = risk_pg_neutral(b, p);
  for (auto& r : b.returns) r += 17.0;
  EXPECT_LT((risk_pg_neutral(b, p) - g0).norm(), 1e-12 * g0.norm() + 1e-13);
}

TEST(RiskPg, BaselineDecomposition) {
  // The additive baseline removes exactly the -(1/gamma) mean-score term.
  const DiagonalGaussianPolicy p(vec({1.0, 0.0}), vec({-0.5, 0.2}));
  Rng rng(3);
  const auto b = draw(p, 1000, rng, [](const Vec& t) { return -t.squaredNorm(); });
  const Vec ms = score_matrix(b, p).colwise().mean().transpose();
  for (double g : {-3.0, -1e-6, 1e-6, 0.2, 5.0}) {
    const Vec lhs = risk_pg(b, p, g) + ms / g;
    const Vec rhs = additive_baseline_pg(b, p, g);
    EXPECT_LT((lhs - rhs).norm(), 1e-7 * std::max(1.0, ms.norm() / std::abs(g))) << "gamma " << g;
  }
}

TEST(RiskPg, BaselineLimitIsNeutral) {
  const DiagonalGaussianPolicy p(vec({1.0, 0.0}), vec({-0.5, 0.2}));
  Rng rng(4);
  const auto b = draw(p, 1000, rng, [](const Vec& t) { return -t.squaredNorm(); });
  const Vec n = risk_pg_neutral(b, p);
  for (double g : {-1e-6, 1e-6}) EXPECT_LT((additive_baseline_pg(b, p, g) - n).norm() / n.norm(), 1e-3);
  EXPECT_EQ(estimate_gradient(b, p, 1e-9, GradientEstimator::likelihood_ratio), n);
}

TEST(RiskPg, LinearGaussianAnalyticGradient) {
  // R = theta under N(mu, sigma^2): J = mu - gamma sigma^2 / 2, grad = (1, -gamma sigma^2).
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.3}), 1.0);
  for (double g : {-1.0, -0.1, 0.1, 1.0}) {
    const Vec truth = vec({1.0, -g});
    for (auto est : {GradientEstimator::likelihood_ratio, GradientEstimator::additive_baseline}) {
      const auto r = repeat([&](const RolloutBatch& b) { return estimate_gradient(b, p, g, est); }, 200, 10000, p,
                            100 + static_cast<int>(est), linear);
      for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(r.mean[k] - truth[k]), 4 * r.se[k]) << "gamma " << g << " k " << k;
    }
  }
}

TEST(RiskPg, NeutralLinearGradient) {
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.0}), 1.0);
  const auto r = repeat([&](const RolloutBatch& b) { return risk_pg_neutral(b, p); }, 200, 10000, p, 5, linear);
  EXPECT_LT(std::abs(r.mean[0] - 1.0), 4 * r.se[0]);
  EXPECT_LT(std::abs(r.mean[1]), 4 * r.se[1]);
}

TEST(RiskPg, BaselineSameMeanLowerVariance) {
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.5}), 1.0);
  for (double g : {-1.0, -0.1, 0.3}) {
    Rng rng(6);
    std::vector<Vec> a, b;
    for (int r = 0; r < 200; ++r) {
      const auto batch = draw(p, 2000, rng, lin_toy_return);
      a.push_back(risk_pg(batch, p, g));
      b.push_back(additive_baseline_pg(batch, p, g));
    }
    Vec ma = Vec::Zero(2), mb = Vec::Zero(2), md = Vec::Zero(2);
    for (int r = 0; r < 200; ++r) ma += a[r] / 200, mb += b[r] / 200, md += (a[r] - b[r]) / 200;
    Vec va = Vec::Zero(2), vb = Vec::Zero(2), vd = Vec::Zero(2);
    for (int r = 0; r < 200; ++r) {
      va += (a[r] - ma).cwiseAbs2() / 199;
      vb += (b[r] - mb).cwiseAbs2() / 199;
      vd += (a[r] - b[r] - md).cwiseAbs2() / 199;
    }
    for (int k = 0; k < 2; ++k) EXPECT_LT(std::abs(md[k]), 4 * std::sqrt(vd[k] / 200));
    // The dropped -(1/gamma) mean(score) term dominates the noise at small |gamma|.
    if (std::abs(g) < 0.5) {
      EXPECT_LE(vb.sum(), va.sum());
    }
  }
}

TEST(NaturalGradient, Examples) {
  const auto p = DiagonalGaussianPolicy::isotropic(vec({0.0, 1.0}), 1.0);
  const Vec g = vec({0.3, -2.0, 1.0, -4.0});
  const Vec n = natural_precondition(g, p);
  EXPECT_EQ(n[0], 0.3);
  EXPECT_EQ(n[1], -2.0);
  EXPECT_EQ(n[2], 0.5);
  EXPECT_EQ(n[3], -2.0);
  const auto q = DiagonalGaussianPolicy::isotropic(vec({0.0}), 3.0);
  EXPECT_NEAR(natural_precondition(vec({1.0, 1.0}), q)[0], 9.0, 1e-12);
  EXPECT_THROW(natural_precondition(vec({1.0}), q), std::invalid_argument);
}

TEST(NaturalGradient, ReparameterizationInvariant) {
  // Natural gradient in (mu, sigma) coordinates, mapped to (mu, log sigma),
  // must point the same way as the covariant natural gradient.
  for (double g : {-1.0, 0.5, 2.0}) {
    for (auto [mu, sigma] : {std::pair{1.0, 0.5}, std::pair{-0.4, 1.3}, std::pair{0.1, 0.2}}) {
      const auto ex = lin_toy_exact(mu, sigma, g);
      const auto p = DiagonalGaussianPolicy::isotropic(vec({mu}), sigma);
      const Vec covariant = natural_precondition(vec({ex.d_mean, ex.d_log_std}), p);

      const double h = 1e-5;
      const double dmu = (lin_toy_objective_exact(mu + h, sigma, g) - lin_toy_objective_exact(mu - h, sigma, g)) / (2 * h);
      const double dsig = (lin_toy_objective_exact(mu, sigma + h, g) - lin_toy_objective_exact(mu, sigma - h, g)) / (2 * h);
      // Gaussian Fisher in (mu, sigma): diag(1/sigma^2, 2/sigma^2).
      const double nat_mu = sigma * sigma * dmu;
      const double nat_sigma = sigma * sigma * dsig / 2.0;
      const Vec mapped = vec({nat_mu, nat_sigma / sigma});
      const double cosine = covariant.dot(mapped) / (covariant.norm() * mapped.norm());
      EXPECT_GE(cosine, 0.999) << g << " " << mu << " " << sigma;
    }
  }
}

TEST(Ascend, ZeroStepKeepsPolicy) {
  const auto p0 = DiagonalGaussianPolicy::isotropic(vec({2.0}), 0.5);
  AscentConfig cfg;
  cfg.step_size = 0.0;
  cfg.iterations = 5;
  cfg.samples_per_iter = 50;
  const auto steps = ascend([](const Vec& t, Rng&) { return lin_toy_return(t); }, p0, cfg);
  ASSERT_EQ(steps.size(), 5u);
  for (const auto& s : steps) EXPECT_EQ(s.policy, p0);
}

TEST(Ascend, Deterministic) {
  const auto p0 = DiagonalGaussianPolicy::isotropic(vec({2.0, -1.0}), 0.5);
  AscentConfig cfg;
  cfg.iterations = 20;
  cfg.samples_per_iter = 100;
  cfg.gamma = 0.7;
  cfg.seed = 99;
  auto eval = [](const Vec& t, Rng& rng) { return -t.norm() + 0.1 * rng.normal(); };
  const auto a = ascend(eval, p0, cfg), b = ascend(eval, p0, cfg);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].policy, b[k].policy);
    EXPECT_EQ(a[k].record, b[k].record);
    EXPECT_EQ(a[k].record.iter, k);
  }
}

TEST(Ascend, LinToyConvergesToZero) {
  AscentConfig cfg;
  cfg.step_size = 0.05;
  cfg.iterations = 300;
  cfg.samples_per_iter = 500;
  cfg.gamma = 0.0;
  cfg.seed = 1;
  const auto steps =
      ascend([](const Vec& t, Rng&) { return lin_toy_return(t); }, DiagonalGaussianPolicy::isotropic(vec({2.0}), 0.5), cfg);
  EXPECT_LT(std::abs(steps.back().policy.mean()[0]), 0.2);
}

TEST(Ascend, NonFiniteReturnReportsIteration) {
  AscentConfig cfg;
  cfg.iterations = 10;
  cfg.samples_per_iter = 10;
  int calls = 0;
  auto eval = [&](const Vec&, Rng&) { return ++calls > 35 ? std::numeric_limits<double>::quiet_NaN() : 1.0; };
  try {
    ascend(eval, DiagonalGaussianPolicy::isotropic(vec({0.0}), 1.0), cfg);
    FAIL() << "expected AscentError";
  } catch (const AscentError& e) {
    EXPECT_EQ(e.iteration(), 3u);
  }
}

TEST(Ascend, ClipsLargeSteps) {
  AscentConfig cfg;
  cfg.iterations = 1;
  cfg.samples_per_iter = 100;
  cfg.step_size = 1.0;
  cfg.clip_norm = 0.5;
  cfg.gamma = 0.0;
  const auto p0 = DiagonalGaussianPolicy::isotropic(vec({0.0}), 1.0);
  const auto s = ascend([](const Vec& t, Rng&) { return 1e6 * t[0]; }, p0, cfg);
  EXPECT_NEAR((s[0].policy.flat() - p0.flat()).norm(), 0.5, 1e-12);
}

TEST(Ascend, ConfigValidation) {
  AscentConfig cfg;
  cfg.samples_per_iter = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.step_size = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(GradientField, RiskAverseShrinksSigmaEverywhere) {
  const auto field = gradient_field(lin_toy_exact, FieldGrid{}, 1.0);
  ASSERT_EQ(field.size(), 441u);
  for (const auto& pt : field) {
    EXPECT_TRUE(pt.grad.converged);
    EXPECT_LT(pt.grad.d_log_std, 0.0) << pt.mu << " " << pt.sigma;
  }
}

TEST(GradientField, RiskSeekingCanGrowSigma) {
  const auto field = gradient_field(lin_toy_exact, FieldGrid{}, -1.0);
  int positive = 0;
  for (const auto& pt : field) positive += pt.grad.d_log_std > 0.0;
  EXPECT_GT(positive, 0);
}

TEST(GradientField, SymmetricInMu) {
  for (double g : {-1.0, 0.0, 1.0}) {
    const auto field = gradient_field(lin_toy_exact, FieldGrid{}, g);
    for (std::size_t is = 0; is < 21; ++is) {
      const auto& mid = field[is * 21 + 10];
      EXPECT_EQ(mid.mu, 0.0);
      EXPECT_NEAR(mid.grad.d_mean, 0.0, 1e-10);
      for (std::size_t im = 0; im < 21; ++im) {
        const auto& a = field[is * 21 + im];
        const auto& b = field[is * 21 + 20 - im];
        EXPECT_NEAR(a.grad.value, b.grad.value, 1e-10);
        EXPECT_NEAR(a.grad.d_mean, -b.grad.d_mean, 1e-10);
      }
    }
  }
}

TEST(GradientField, ExactGradientMatchesFiniteDifferences) {
  for (double g : {-1.0, 0.0, 0.1, 2.0})
    for (auto [mu, sigma] : {std::pair{1.0, 0.5}, std::pair{0.0, 1.0}, std::pair{-1.7, 0.3}}) {
      const auto ex = lin_toy_exact(mu, sigma, g);
      const double h = 1e-5;
      const double dm = (lin_toy_objective_exact(mu + h, sigma, g) - lin_toy_objective_exact(mu - h, sigma, g)) / (2 * h);
      const double ds = (lin_toy_objective_exact(mu, sigma * std::exp(h), g) -
                         lin_toy_objective_exact(mu, sigma * std::exp(-h), g)) / (2 * h);
      EXPECT_NEAR(ex.d_mean, dm, 1e-7);
      EXPECT_NEAR(ex.d_log_std, ds, 1e-7);
    }
}

TEST(ContextualGradient, ConstantReturnsAndNeutralSwitch) {
  FourierFeatureMap map(Mat::Ones(3, 2), Vec::Zero(3), 1.0);
  const ContextualLinearGaussianPolicy p(Mat::Zero(3, 2), Vec::Zero(2), map);
  Rng rng(7);
  ContextualBatch b;
  for (int i = 0; i < 50; ++i) {
    b.contexts.push_back(rng.normal_vector(2));
    b.params.push_back(p.sample(b.contexts.back(), rng));
    b.returns.push_back(2.0);
  }
  EXPECT_EQ(contextual_gradient(b, p, 0.0, GradientEstimator::additive_baseline), Vec::Zero(8));
  EXPECT_EQ(contextual_gradient(b, p, 1.0, GradientEstimator::additive_baseline), Vec::Zero(8));
}
