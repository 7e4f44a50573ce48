#pragma once

// Experiment orchestration: one independent cell per (gamma, seed), each with
// its own random stream, run on a small thread pool and merged in
// (gamma-list order, seed, iter) order.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "riskpg/contextual_policy.hpp"
#include "riskpg/envs/config.hpp"
#include "riskpg/gradients.hpp"
#include "riskpg/harness/csv.hpp"
#include "riskpg/harness/stats.hpp"
#include "riskpg/reps.hpp"
#include "riskpg/rng.hpp"
#include "riskpg/serialize.hpp"

namespace riskpg {

enum class Experiment { portfolio, toy_badminton, lin_toy, contextual, gradfield };
enum class Algo { pg, npg, reps };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::portfolio: return "portfolio";
    case Experiment::toy_badminton: return "toy_badminton";
    case Experiment::lin_toy: return "lin_toy";
    case Experiment::contextual: return "contextual";
    case Experiment::gradfield: return "gradfield";
  }
  return "?";
}

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::pg: return "pg";
    case Algo::npg: return "npg";
    case Algo::reps: return "reps";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  if (s == "portfolio") return Experiment::portfolio;
  if (s == "toy-badminton" || s == "toy_badminton") return Experiment::toy_badminton;
  if (s == "lin-toy" || s == "lin_toy") return Experiment::lin_toy;
  if (s == "contextual") return Experiment::contextual;
  if (s == "gradfield") return Experiment::gradfield;
  throw ConfigError("unknown experiment '" + s + "'");
}

inline Algo parse_algo(const std::string& s) {
  if (s == "pg") return Algo::pg;
  if (s == "npg") return Algo::npg;
  if (s == "reps") return Algo::reps;
  throw ConfigError("unknown algorithm '" + s + "'");
}

struct ExperimentConfig {
  Experiment experiment = Experiment::lin_toy;
  Algo algo = Algo::pg;
  std::vector<double> gamma_list{0.0};
  std::size_t seeds = 1;
  std::size_t samples_per_iter = 1000;
  std::size_t iterations = 100;
  double step_size = 0.05;
  double epsilon = 0.5;
  std::string output_path;
  std::uint64_t base_seed = 0;

  double decay = 1.0;
  GradientEstimator estimator = GradientEstimator::additive_baseline;
  std::optional<Environment> environment;       // defaults per experiment when empty
  std::optional<std::string> init_policy_path;  // resume from a saved policy
  std::size_t contextual_features = 100;
  std::size_t threads = 0;  // 0: RISKGRAD_THREADS or hardware concurrency

  void validate() const {
    if (seeds < 1) throw ConfigError("seeds must be >= 1");
    if (samples_per_iter < 2) throw ConfigError("samples_per_iter must be >= 2");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (gamma_list.empty()) throw ConfigError("gamma list must be non-empty");
    for (double g : gamma_list)
      if (!std::isfinite(g)) throw ConfigError("gamma values must be finite");
    if (!(step_size >= 0.0)) throw ConfigError("step size must be >= 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must be in (0, 1]");
    if (algo == Algo::reps && !(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (algo == Algo::reps && experiment == Experiment::contextual)
      throw ConfigError("reps is not available for the contextual experiment");
    if (contextual_features < 1) throw ConfigError("contextual feature count must be >= 1");
  }
};

struct CellFailure {
  double gamma = 0.0;
  std::size_t seed = 0;
  std::string message;
};

struct CellResult {
  double gamma = 0.0;
  std::size_t seed = 0;
  std::vector<IterationRecord> records;
  std::vector<double> final_returns;  // fresh-batch returns of the final policy
  std::string final_policy;           // serialized
  std::optional<std::string> error;
};

struct ExperimentResult {
  std::vector<IterationRecord> records;
  std::vector<CellResult> cells;
  std::vector<CellFailure> failures;
};

/// Per-cell stream seed; keyed on the gamma value so extending the gamma
/// list leaves existing cells untouched.
inline std::uint64_t cell_seed(std::uint64_t base_seed, double gamma, std::size_t seed_index) {
  std::uint64_t bits = 0;
  if (gamma != 0.0) std::memcpy(&bits, &gamma, sizeof bits);  // folds -0.0 into 0.0
  return derive_seed(derive_seed(base_seed, bits), seed_index);
}

inline std::size_t worker_cap(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("RISKGRAD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Step size used when none is given. The contextual score has feature-scaled
/// components, so plain PG there needs a much smaller step.
inline double default_step_size(Experiment e, Algo a) {
  if (e == Experiment::contextual && a == Algo::pg) return 0.003;
  if (e == Experiment::toy_badminton && a == Algo::npg) return 1.0;
  return 0.05;
}

// --- default initial policies ----------------------------------------------

inline DiagonalGaussianPolicy default_initial_policy(Experiment e, const Environment& env) {
  switch (e) {
    case Experiment::portfolio: {
      const auto n = std::get<PortfolioEnv>(env).num_assets();
      return DiagonalGaussianPolicy::isotropic(Vec::Zero(n), 1.0);
    }
    case Experiment::toy_badminton: return DiagonalGaussianPolicy::isotropic(Vec::Constant(2, 3.0), 0.5);
    case Experiment::lin_toy: return DiagonalGaussianPolicy::isotropic(Vec::Constant(1, 2.0), 0.5);
    default: throw ConfigError("no diagonal policy for experiment " + to_string(e));
  }
}

/// Feature map from a pilot sample of contexts and weights that command a
/// constant velocity reaching x_des from the box centre.
inline ContextualLinearGaussianPolicy default_contextual_policy(const ContextualBadmintonEnv& env, std::size_t features, Rng& rng) {
  std::vector<Vec> pilot;
  for (int i = 0; i < 200; ++i) pilot.push_back(env.sample_context(rng));
  auto map = make_fourier_features(static_cast<Eigen::Index>(features), pilot, rng);
  Vec centre(2);
  centre << 0.5 * (env.x_lo + env.x_hi), 0.5 * (env.y_lo + env.y_hi);
  // 45-degree launch: x1 - x0 ~ v^2 / g for y0 = 0.
  const double reach = std::max(env.physics.x_des - centre[0], 0.1);
  const double v = std::sqrt(reach * env.physics.g / 2.0);
  const Vec u = Vec::Constant(2, v);
  Mat w = fit_constant_weights(map, pilot, u);
  return {std::move(w), Vec::Constant(2, std::log(0.3)), std::move(map)};
}

// --- per-environment evaluation with diagnostics ---------------------------

namespace detail {

inline std::string serialize(const auto& policy) {
  std::ostringstream os;
  write_policy(os, policy);
  return os.str();
}

/// Black-box evaluator that also buffers per-sample diagnostics until the
/// next `annotate` call.
struct DiagonalEvaluator {
  Environment env;
  std::vector<BadmintonShot> shots;

  double operator()(const Vec& theta, Rng& rng) {
    return std::visit(
        [&](const auto& e) -> double {
          using T = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<T, PortfolioEnv>) {
            return portfolio_evaluate(e, theta, rng);
          } else if constexpr (std::is_same_v<T, BadmintonToyEnv>) {
            const auto shot = badminton_shot(e, theta, rng);
            shots.push_back(shot);
            return -std::abs(shot.error(e.x_des));
          } else if constexpr (std::is_same_v<T, LinToyEnv>) {
            return lin_toy_return(theta);
          } else {
            throw ConfigError("contextual environment needs a contextual policy");
          }
        },
        env);
  }

  void annotate(const DiagonalGaussianPolicy& policy, IterationRecord& rec) {
    if (const auto* b = std::get_if<BadmintonToyEnv>(&env)) {
      std::vector<double> x1, err, speed;
      for (const auto& s : shots) {
        x1.push_back(s.x1);
        err.push_back(s.error(b->x_des));
        speed.push_back(s.speed());
      }
      if (!x1.empty()) {
        rec.extra["x1_mean"] = mean(x1);
        rec.extra["x1_var"] = variance(x1);
        rec.extra["err_mean"] = mean(err);
        rec.extra["speed_mean"] = mean(speed);
      }
      rec.extra["cmd_speed"] = policy.mean().norm();
    }
    shots.clear();
  }
};

inline void fill_policy_stats(IterationRecord& rec, const DiagonalGaussianPolicy& p) {
  rec.policy_mean_norm = p.mean().norm();
  rec.policy_sigma_mean = p.stddev().mean();
}

inline CellResult run_diagonal_cell(const ExperimentConfig& cfg, const Environment& env, double gamma, std::size_t seed_index) {
  CellResult cell{gamma, seed_index, {}, {}, {}, {}};
  const std::uint64_t stream = cell_seed(cfg.base_seed, gamma, seed_index);
  DiagonalGaussianPolicy policy = cfg.init_policy_path ? load_diagonal_policy(*cfg.init_policy_path)
                                                       : default_initial_policy(cfg.experiment, env);
  DiagonalEvaluator eval{env, {}};
  auto stamp = [&](IterationRecord& r) {
    r.experiment = to_string(cfg.experiment);
    r.algo = to_string(cfg.algo);
    r.gamma = gamma;
    r.seed = seed_index;
  };

  if (cfg.algo == Algo::reps) {
    RepsConfig rc;
    rc.epsilon = cfg.epsilon;
    Rng rng(stream);
    for (std::size_t k = 0; k < cfg.iterations; ++k) {
      auto sol = reps_step(policy, eval, rc, rng, cfg.samples_per_iter);
      IterationRecord rec;
      rec.iter = k;
      fill_return_stats(rec, sol.batch.returns, gamma);
      fill_policy_stats(rec, policy);
      eval.annotate(policy, rec);
      rec.extra["eta"] = sol.eta_star;
      rec.extra["implied_gamma"] = sol.implied_gamma();
      rec.extra["kl"] = sol.effective_kl;
      rec.extra["eta_clamped"] = sol.eta_clamped ? 1.0 : 0.0;
      rec.extra["final"] = 0.0;
      stamp(rec);
      cell.records.push_back(std::move(rec));
      policy = std::move(sol.refit_policy);
    }
  } else {
    AscentConfig ac;
    ac.step_size = cfg.step_size;
    ac.iterations = cfg.iterations;
    ac.samples_per_iter = cfg.samples_per_iter;
    ac.use_natural = cfg.algo == Algo::npg;
    ac.gamma = gamma;
    ac.seed = stream;
    ac.decay = cfg.decay;
    ac.estimator = cfg.estimator;
    auto steps = ascend(std::ref(eval), policy, ac, [&](const RolloutBatch&, const DiagonalGaussianPolicy& p, IterationRecord& rec) {
      eval.annotate(p, rec);
      rec.extra["final"] = 0.0;
      stamp(rec);
    });
    for (auto& s : steps) cell.records.push_back(std::move(s.record));
    policy = steps.back().policy;
  }

  // Final evaluation on a fresh batch.
  Rng rng(derive_seed(stream, 2));
  eval.shots.clear();
  for (const auto& theta : policy.sample(rng, cfg.samples_per_iter)) cell.final_returns.push_back(eval(theta, rng));
  IterationRecord fin;
  fin.iter = cfg.iterations;
  fill_return_stats(fin, cell.final_returns, gamma);
  fill_policy_stats(fin, policy);
  eval.annotate(policy, fin);
  if (const auto* b = std::get_if<BadmintonToyEnv>(&env)) {
    if (const auto m = landing_moments(*b, policy)) fin.extra["x1_var_exact"] = m->variance;
  }
  fin.extra["final"] = 1.0;
  stamp(fin);
  cell.records.push_back(std::move(fin));
  cell.final_policy = serialize(policy);
  return cell;
}

inline CellResult run_contextual_cell(const ExperimentConfig& cfg, const ContextualBadmintonEnv& env, double gamma,
                                      std::size_t seed_index) {
  CellResult cell{gamma, seed_index, {}, {}, {}, {}};
  const std::uint64_t stream = cell_seed(cfg.base_seed, gamma, seed_index);
  Rng init_rng(derive_seed(stream, 1));
  ContextualLinearGaussianPolicy policy = cfg.init_policy_path ? load_contextual_policy(*cfg.init_policy_path)
                                                               : default_contextual_policy(env, cfg.contextual_features, init_rng);
  auto stamp = [&](IterationRecord& r) {
    r.experiment = to_string(cfg.experiment);
    r.algo = to_string(cfg.algo);
    r.gamma = gamma;
    r.seed = seed_index;
  };
  std::vector<ContextualOutcome> outcomes;
  auto eval = [&](const Vec& s, const Vec& theta, Rng& rng) {
    outcomes.push_back(contextual_outcome(env, s, theta, rng));
    return outcomes.back().reward;
  };
  auto summarize = [&](IterationRecord& rec) {
    std::vector<double> hit, err;
    for (const auto& o : outcomes) {
      hit.push_back(o.hit ? 1.0 : 0.0);
      err.push_back(std::abs(o.error));
    }
    rec.extra["hit_rate"] = mean(hit);
    rec.extra["abs_err_mean"] = mean(err);
    outcomes.clear();
  };

  AscentConfig ac;
  ac.step_size = cfg.step_size;
  ac.iterations = cfg.iterations;
  ac.samples_per_iter = cfg.samples_per_iter;
  ac.use_natural = cfg.algo == Algo::npg;
  ac.gamma = gamma;
  ac.seed = stream;
  ac.decay = cfg.decay;
  ac.estimator = cfg.estimator;
  auto steps = ascend_contextual([&](Rng& rng) { return env.sample_context(rng); }, eval, policy, ac,
                                 [&](const ContextualBatch&, const ContextualLinearGaussianPolicy&, IterationRecord& rec) {
                                   summarize(rec);
                                   rec.extra["final"] = 0.0;
                                   stamp(rec);
                                 });
  for (auto& s : steps) cell.records.push_back(std::move(s.record));
  policy = steps.back().policy;

  Rng rng(derive_seed(stream, 2));
  for (std::size_t i = 0; i < cfg.samples_per_iter; ++i) {
    const Vec s = env.sample_context(rng);
    cell.final_returns.push_back(eval(s, policy.sample(s, rng), rng));
  }
  IterationRecord fin;
  fin.iter = cfg.iterations;
  fill_return_stats(fin, cell.final_returns, gamma);
  fin.policy_mean_norm = policy.weights().norm();
  fin.policy_sigma_mean = policy.log_std().array().exp().mean();
  summarize(fin);
  fin.extra["hit_rate_quiet"] = contextual_hit_rate(policy, env, cfg.samples_per_iter, rng);
  fin.extra["final"] = 1.0;
  stamp(fin);
  cell.records.push_back(std::move(fin));
  cell.final_policy = serialize(policy);
  return cell;
}

}  // namespace detail

/// Exact gradient-field records for the 1-D toy problem; one record per grid
/// point, `iter` is the grid index.
inline std::vector<IterationRecord> gradient_field_records(const FieldGrid& grid, double gamma) {
  std::vector<IterationRecord> out;
  const auto field = gradient_field(lin_toy_exact, grid, gamma);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto& pt = field[i];
    const auto neutral = lin_toy_exact(pt.mu, pt.sigma, 0.0);
    IterationRecord r;
    r.experiment = "gradfield";
    r.algo = "exact";
    r.gamma = gamma;
    r.seed = 0;
    r.iter = i;
    r.j_risk = pt.grad.value;
    r.mean_return = neutral.value;
    r.var_return = std::max(0.0, pt.mu * pt.mu + pt.sigma * pt.sigma - neutral.value * neutral.value);
    r.policy_mean_norm = std::abs(pt.mu);
    r.policy_sigma_mean = pt.sigma;
    r.extra["mu"] = pt.mu;
    r.extra["sigma"] = pt.sigma;
    r.extra["grad_mean"] = pt.grad.d_mean;
    r.extra["grad_log_std"] = pt.grad.d_log_std;
    r.extra["converged"] = (pt.grad.converged && neutral.converged) ? 1.0 : 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  if (cfg.experiment == Experiment::gradfield) {
    for (double g : cfg.gamma_list) {
      auto recs = gradient_field_records(FieldGrid{}, g);
      result.records.insert(result.records.end(), recs.begin(), recs.end());
    }
    return result;
  }

  const Environment env = cfg.environment ? *cfg.environment : default_environment(to_string(cfg.experiment));
  const bool env_matches = std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        switch (cfg.experiment) {
          case Experiment::portfolio: return std::is_same_v<T, PortfolioEnv>;
          case Experiment::toy_badminton: return std::is_same_v<T, BadmintonToyEnv>;
          case Experiment::lin_toy: return std::is_same_v<T, LinToyEnv>;
          case Experiment::contextual: return std::is_same_v<T, ContextualBadmintonEnv>;
          default: return false;
        }
      },
      env);
  if (!env_matches) throw ConfigError("environment config does not match experiment " + to_string(cfg.experiment));

  const std::size_t n_cells = cfg.gamma_list.size() * cfg.seeds;
  result.cells.resize(n_cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c; (c = next.fetch_add(1)) < n_cells;) {
      const double gamma = cfg.gamma_list[c / cfg.seeds];
      const std::size_t seed = c % cfg.seeds;
      try {
        if (cfg.experiment == Experiment::contextual)
          result.cells[c] = detail::run_contextual_cell(cfg, std::get<ContextualBadmintonEnv>(env), gamma, seed);
        else
          result.cells[c] = detail::run_diagonal_cell(cfg, env, gamma, seed);
      } catch (const std::exception& ex) {
        result.cells[c] = CellResult{gamma, seed, {}, {}, {}, std::string(ex.what())};
      }
    }
  };
  const std::size_t workers = std::min(worker_cap(cfg.threads), n_cells);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  for (const auto& cell : result.cells) {
    if (cell.error) {
      result.failures.push_back({cell.gamma, cell.seed, *cell.error});
      continue;
    }
    result.records.insert(result.records.end(), cell.records.begin(), cell.records.end());
  }
  return result;
}

}  // namespace riskpg
