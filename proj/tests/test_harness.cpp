#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "riskpg/riskpg.hpp"

using namespace riskpg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "riskgrad_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RISKGRAD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ExperimentConfig small(Experiment e, Algo a) {
  ExperimentConfig c;
  c.experiment = e;
  c.algo = a;
  c.gamma_list = {0.0, 1.0};
  c.seeds = 2;
  c.samples_per_iter = 50;
  c.iterations = 3;
  c.step_size = default_step_size(e, a);
  c.contextual_features = 10;
  return c;
}

}  // namespace

TEST(Histogram, Examples) {
  const std::vector<double> same(37, 0.35);
  const auto h = reward_histogram(same, 10, 0.0, 1.0);
  int nonzero = 0;
  for (const auto& b : h) nonzero += b.count > 0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(h[3].count, 37u);
  EXPECT_DOUBLE_EQ(h[3].center, 0.35);
  const auto ends = reward_histogram(std::vector<double>{-5.0, 5.0, 1.0}, 4, 0.0, 1.0);
  EXPECT_EQ(ends.front().count, 1u);
  EXPECT_EQ(ends.back().count, 2u);
  EXPECT_THROW(reward_histogram(same, 0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(reward_histogram(same, 3, 1.0, 1.0), std::invalid_argument);
}

TEST(Histogram, GaussianBinomialBands) {
  Rng rng(1);
  const std::size_t n = 100000;
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  const auto h = reward_histogram(x, 20, -4.0, 4.0);
  std::size_t total = 0;
  for (const auto& b : h) total += b.count;
  EXPECT_EQ(total, n);
  for (std::size_t i = 1; i + 1 < h.size(); ++i) {
    const double p = normal_cdf(h[i].center + 0.2) - normal_cdf(h[i].center - 0.2);
    EXPECT_LT(std::abs(double(h[i].count) - n * p), 4 * std::sqrt(n * p * (1 - p)) + 1) << i;
  }
}

TEST(Stats, MedianRanksSpearman) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  const auto r = ranks(std::vector<double>{10.0, 20.0, 10.0, 5.0});
  EXPECT_EQ(r, (std::vector<double>{2.5, 4.0, 2.5, 1.0}));
  const std::vector<double> x{1, 2, 3, 4, 5}, y{1, 4, 9, 16, 25}, z{5, 3, 2, 1, -7};
  EXPECT_NEAR(spearman(x, y), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, z), -1.0, 1e-15);
  EXPECT_LT(pearson(x, y), 1.0);
}

TEST(Csv, EmptyIsHeaderOnly) {
  std::ostringstream os;
  write_csv(os, {});
  EXPECT_EQ(os.str(),
            "experiment,algo,gamma,seed,iter,j_risk,mean_return,var_return,policy_mean_norm,policy_sigma_mean\n");
}

TEST(Csv, ColumnsAndRoundTrip) {
  std::vector<IterationRecord> recs(3);
  Rng rng(2);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto& r = recs[i];
    r.experiment = "portfolio";
    r.algo = "pg";
    r.gamma = -1.0 / 3.0;
    r.seed = i;
    r.iter = 7 * i;
    r.j_risk = rng.normal() * 1e-300;
    r.mean_return = rng.normal() * 1e300;
    r.var_return = 0.1;
    r.policy_mean_norm = std::nextafter(1.0, 2.0);
    r.policy_sigma_mean = rng.uniform();
  }
  recs[0].extra["zeta"] = 1.0 / 7.0;
  recs[1].extra["alpha"] = -2.5e-17;
  std::ostringstream os;
  write_csv(os, recs);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(split_csv_line(header).size(), 12u);
  EXPECT_EQ(header.substr(header.size() - 11), ",alpha,zeta");
  EXPECT_EQ(os.str().find('\r'), std::string::npos);
  std::istringstream back(os.str());
  EXPECT_EQ(read_csv(back), recs);
  recs[0].algo = "p,g";
  std::ostringstream bad;
  EXPECT_THROW(write_csv(bad, recs), std::invalid_argument);
}

TEST(Csv, IoErrorsCarryPath) {
  try {
    emit_csv({}, "/nonexistent_dir/out.csv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir/out.csv"), std::string::npos);
  }
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig c;
  c.seeds = 0;
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = {};
  c.gamma_list.clear();
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = {};
  c.samples_per_iter = 1;
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = {};
  c.experiment = Experiment::contextual;
  c.algo = Algo::reps;
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = {};
  c.experiment = Experiment::portfolio;
  c.environment = BadmintonToyEnv{};
  EXPECT_THROW(run_experiment(c), ConfigError);
  EXPECT_THROW(parse_experiment("mujoco"), ConfigError);
  EXPECT_THROW(parse_algo("ppo"), ConfigError);
}

TEST(Experiment, RecordCounting) {
  auto c = small(Experiment::lin_toy, Algo::pg);
  c.gamma_list = {0.0};
  c.seeds = 1;
  c.iterations = 1;
  const auto r = run_experiment(c);
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].iter, 0u);
  EXPECT_EQ(r.records[0].extra.at("final"), 0.0);
  EXPECT_EQ(r.records[1].iter, 1u);
  EXPECT_EQ(r.records[1].extra.at("final"), 1.0);
}

TEST(Experiment, CompleteAndOrderedForEveryAlgorithm) {
  for (auto e : {Experiment::portfolio, Experiment::toy_badminton, Experiment::lin_toy})
    for (auto a : {Algo::pg, Algo::npg, Algo::reps}) {
      const auto c = small(e, a);
      const auto r = run_experiment(c);
      EXPECT_TRUE(r.failures.empty());
      ASSERT_EQ(r.records.size(), 2 * 2 * 4u);
      for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto& rec = r.records[i];
        EXPECT_EQ(rec.gamma, c.gamma_list[i / 8]);
        EXPECT_EQ(rec.seed, (i / 4) % 2);
        EXPECT_EQ(rec.iter, i % 4);
        EXPECT_GE(rec.var_return, 0.0);
        EXPECT_EQ(rec.experiment, to_string(e));
        EXPECT_EQ(rec.algo, to_string(a));
        if (a == Algo::reps && rec.iter < 3) {
          EXPECT_LT(rec.extra.at("implied_gamma"), 0.0);
        }
      }
    }
}

TEST(Experiment, ContextualRuns) {
  const auto r = run_experiment(small(Experiment::contextual, Algo::pg));
  EXPECT_TRUE(r.failures.empty());
  ASSERT_EQ(r.records.size(), 16u);
  EXPECT_TRUE(r.records.back().extra.contains("hit_rate_quiet"));
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  auto c = small(Experiment::toy_badminton, Algo::npg);
  c.gamma_list = {-1.0, 0.0, 5.0};
  c.seeds = 3;
  c.threads = 1;
  std::ostringstream a, b, d;
  write_csv(a, run_experiment(c).records);
  write_csv(b, run_experiment(c).records);
  c.threads = 4;
  write_csv(d, run_experiment(c).records);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str(), d.str());
}

TEST(Experiment, CellSeedsIgnoreListPosition) {
  auto c = small(Experiment::lin_toy, Algo::pg);
  c.gamma_list = {1.0};
  const auto one = run_experiment(c).records;
  c.gamma_list = {0.5, 1.0};
  const auto two = run_experiment(c).records;
  const std::vector<IterationRecord> tail(two.begin() + 8, two.end());
  EXPECT_EQ(one, tail);
  EXPECT_EQ(cell_seed(7, 0.0, 1), cell_seed(7, -0.0, 1));
  EXPECT_NE(cell_seed(7, 1.0, 1), cell_seed(7, 1.0, 2));
}

TEST(Experiment, CellFailuresAreIsolated) {
  const auto path = scratch("two_dim_policy.txt");
  save_policy(path, DiagonalGaussianPolicy::isotropic(Vec::Zero(2), 1.0));
  auto c = small(Experiment::portfolio, Algo::pg);
  c.init_policy_path = path.string();
  const auto r = run_experiment(c);
  EXPECT_EQ(r.failures.size(), 4u);
  EXPECT_TRUE(r.records.empty());
}

TEST(Experiment, ResumesFromSavedPolicy) {
  auto c = small(Experiment::lin_toy, Algo::pg);
  c.gamma_list = {0.0};
  c.seeds = 1;
  c.step_size = 0.0;
  const auto path = scratch("lin_policy.txt");
  save_policy(path, DiagonalGaussianPolicy::isotropic(Vec::Constant(1, -7.0), 0.25));
  c.init_policy_path = path.string();
  const auto r = run_experiment(c);
  EXPECT_NEAR(r.records.back().policy_mean_norm, 7.0, 1e-12);
  EXPECT_NEAR(r.records.back().policy_sigma_mean, 0.25, 1e-12);
}

TEST(Experiment, GradientFieldRecords) {
  FieldGrid g;
  g.mu_points = 3;
  g.sigma_points = 2;
  const auto recs = gradient_field_records(g, 1.0);
  ASSERT_EQ(recs.size(), 6u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.extra.at("converged"), 1.0);
    EXPECT_LT(r.extra.at("grad_log_std"), 0.0);
  }
  EXPECT_NEAR(recs[1].extra.at("grad_mean"), 0.0, 1e-12);
}

TEST(Repro, Fig2WritesField) {
  const auto dir = scratch("fig2");
  const auto out = repro(Figure::fig2, dir);
  ASSERT_EQ(out.files.size(), 1u);
  const auto recs = load_csv(out.files[0]);
  EXPECT_EQ(recs.size(), 3 * 441u);
  EXPECT_EQ(recs, out.result.records);
}

TEST(Repro, SummaryAndHistogramWriters) {
  auto c = small(Experiment::toy_badminton, Algo::npg);
  const auto r = run_experiment(c);
  std::ostringstream s, h;
  write_final_summary(s, r, {"err_mean", "missing"});
  write_histograms(h, r, {4, -5.0, 1.0});
  std::istringstream ss(s.str());
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line.rfind("gamma,seeds,", 0), 0u);
  int rows = 0;
  while (std::getline(ss, line)) {
    ++rows;
    EXPECT_EQ(split_csv_line(line).size(), 9u);
  }
  EXPECT_EQ(rows, 2);
  std::istringstream hs(h.str());
  std::getline(hs, line);
  std::size_t total = 0;
  while (std::getline(hs, line)) total += std::stoul(split_csv_line(line)[2]);
  EXPECT_EQ(total, 2 * 2 * 50u);
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli.csv").string();
  EXPECT_EQ(run_cli("run --env lin-toy --gamma 0,1 --samples 20 --iters 2 --seeds 1 --out " + out), 0);
  EXPECT_EQ(load_csv(out).size(), 6u);
  EXPECT_EQ(run_cli("run --env cartpole --out " + out), 1);
  EXPECT_EQ(run_cli("run --env lin-toy --samples 1 --out " + out), 1);
  EXPECT_EQ(run_cli("run --env lin-toy --gamma abc --out " + out), 1);
  EXPECT_EQ(run_cli("run --env lin-toy --iters 1 --out /nonexistent_dir/x.csv"), 3);
  EXPECT_EQ(run_cli("frobnicate"), 1);

  const auto pol = scratch("bad_policy.txt");
  save_policy(pol, DiagonalGaussianPolicy::isotropic(Vec::Zero(2), 1.0));
  EXPECT_EQ(run_cli("run --env portfolio --iters 1 --samples 10 --init-policy " + pol.string() + " --out " + out), 2);
}

TEST(Cli, GradfieldAndDeterminism) {
  const auto a = scratch("gf_a.csv"), b = scratch("gf_b.csv");
  EXPECT_EQ(run_cli("gradfield --gamma -1 --grid -1:1:5,0.2:1:3 --out " + a.string()), 0);
  EXPECT_EQ(run_cli("gradfield --gamma -1 --grid -1:1:5,0.2:1:3 --out " + b.string()), 0);
  EXPECT_EQ(load_csv(a).size(), 15u);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(run_cli("gradfield --gamma -1 --grid 1:2 --out " + a.string()), 1);
}

TEST(Cli, EnvConfigAndPolicyOutput) {
  const auto cfg = scratch("env.cfg");
  {
    std::ofstream os(cfg);
    os << "env = toy-badminton\nsigma_v0 = 0.2\n";
  }
  const auto dir = scratch("policies");
  fs::remove_all(dir);
  const auto out = scratch("cfg.csv").string();
  EXPECT_EQ(run_cli("run --env toy-badminton --algo npg --gamma 1 --samples 20 --iters 2 --env-config " + cfg.string() +
                    " --policy-out " + dir.string() + " --out " + out),
            0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ++files;
    EXPECT_NO_THROW(load_diagonal_policy(e.path()));
  }
  EXPECT_EQ(files, 1);
  {
    std::ofstream os(cfg);
    os << "env = toy-badminton\nwind = 1\n";
  }
  EXPECT_EQ(run_cli("run --env toy-badminton --env-config " + cfg.string() + " --out " + out), 1);
}
