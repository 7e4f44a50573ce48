// riskgrad: experiment driver for risk-sensitive policy search.
//
//   riskgrad run --env portfolio --algo pg --gamma 0.1,1,5,10 --samples 1000
//                --iters 300 --seeds 10 --alpha 0.05 --seed 3 --out fig3.csv
//   riskgrad gradfield --gamma -1 --grid -2:2:21,0.1:2:21 --out field.csv
//   riskgrad repro fig4 --out results/
//
// Exit codes: 0 success, 1 configuration error, 2 some cells failed, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskpg/riskpg.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 1, kPartial = 2, kIo = 3 };

std::vector<double> parse_gamma_list(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    for (std::string tok; std::getline(ss, tok, ',');) {
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw riskpg::ConfigError("invalid gamma value '" + tok + "'");
      }
    }
  }
  return out;
}

/// "mu_lo:mu_hi:n,sigma_lo:sigma_hi:n"
riskpg::FieldGrid parse_grid(const std::string& spec) {
  riskpg::FieldGrid grid;
  const auto comma = spec.find(',');
  if (comma == std::string::npos) throw riskpg::ConfigError("grid spec must look like mu_lo:mu_hi:n,sigma_lo:sigma_hi:n");
  auto axis = [](const std::string& part, double& lo, double& hi, std::size_t& n) {
    std::stringstream ss(part);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
      throw riskpg::ConfigError("grid axis must look like lo:hi:n, got '" + part + "'");
    try {
      lo = std::stod(a);
      hi = std::stod(b);
      n = std::stoul(c);
    } catch (const std::exception&) {
      throw riskpg::ConfigError("grid axis '" + part + "' is not numeric");
    }
  };
  axis(spec.substr(0, comma), grid.mu_lo, grid.mu_hi, grid.mu_points);
  axis(spec.substr(comma + 1), grid.sigma_lo, grid.sigma_hi, grid.sigma_points);
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw riskpg::ConfigError(e.what());
  }
  return grid;
}

void report_failures(const riskpg::ExperimentResult& r) {
  for (const auto& f : r.failures)
    std::cerr << "cell (gamma=" << f.gamma << ", seed=" << f.seed << ") failed: " << f.message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive policy search experiments"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "train policies on one environment over a gamma sweep");
  std::string env_name, algo_name = "pg", out_path, env_config, init_policy, policy_dir, estimator = "baseline";
  std::vector<std::string> gamma_items{"0"};
  riskpg::ExperimentConfig cfg;
  run->add_option("--env", env_name, "portfolio | toy-badminton | lin-toy | contextual")->required();
  run->add_option("--algo", algo_name, "pg | npg | reps");
  run->add_option("--gamma", gamma_items, "risk factors, comma separated")->delimiter(',');
  run->add_option("--samples", cfg.samples_per_iter, "samples per iteration");
  run->add_option("--iters", cfg.iterations, "iterations per run");
  run->add_option("--seeds", cfg.seeds, "seeds per gamma");
  auto* alpha_opt = run->add_option("--alpha", cfg.step_size, "step size (default depends on env and algo)");
  run->add_option("--epsilon", cfg.epsilon, "REPS KL bound (nats)");
  run->add_option("--seed", cfg.base_seed, "base seed");
  run->add_option("--out", out_path, "output CSV")->required();
  run->add_option("--decay", cfg.decay, "per-iteration step decay factor");
  run->add_option("--estimator", estimator, "baseline | plain");
  run->add_option("--env-config", env_config, "environment key = value file");
  run->add_option("--init-policy", init_policy, "start from a saved policy");
  run->add_option("--policy-out", policy_dir, "directory for final policies");

  // gradfield
  auto* gf = app.add_subcommand("gradfield", "exact gradient field of the 1-D toy objective");
  std::string gf_gamma = "1", grid_spec = "-2:2:21,0.1:2:21", gf_out;
  gf->add_option("--gamma", gf_gamma, "risk factor")->required();
  gf->add_option("--grid", grid_spec, "mu_lo:mu_hi:n,sigma_lo:sigma_hi:n");
  gf->add_option("--out", gf_out, "output CSV")->required();

  // repro
  auto* rp = app.add_subcommand("repro", "regenerate figure data");
  std::string figure, repro_dir;
  rp->add_option("figure", figure, "fig2 | fig3 | fig4")->required();
  rp->add_option("--out", repro_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) {
      cfg.experiment = riskpg::parse_experiment(env_name);
      if (cfg.experiment == riskpg::Experiment::gradfield) throw riskpg::ConfigError("use the gradfield subcommand");
      cfg.algo = riskpg::parse_algo(algo_name);
      if (alpha_opt->count() == 0) cfg.step_size = riskpg::default_step_size(cfg.experiment, cfg.algo);
      cfg.gamma_list = parse_gamma_list(gamma_items);
      cfg.output_path = out_path;
      if (estimator == "plain")
        cfg.estimator = riskpg::GradientEstimator::likelihood_ratio;
      else if (estimator != "baseline")
        throw riskpg::ConfigError("unknown estimator '" + estimator + "'");
      if (!env_config.empty()) cfg.environment = riskpg::load_environment(env_config);
      if (!init_policy.empty()) cfg.init_policy_path = init_policy;
      const auto result = riskpg::run_experiment(cfg);
      riskpg::emit_csv(result.records, out_path);
      if (!policy_dir.empty()) {
        std::filesystem::create_directories(policy_dir);
        for (const auto& cell : result.cells) {
          if (cell.error) continue;
          std::ostringstream name;
          name << "policy_gamma" << riskpg::format_real(cell.gamma) << "_seed" << cell.seed << ".txt";
          riskpg::write_text(std::filesystem::path(policy_dir) / name.str(), cell.final_policy);
        }
      }
      report_failures(result);
      return result.failures.empty() ? kOk : kPartial;
    }
    if (*gf) {
      const auto gammas = parse_gamma_list({gf_gamma});
      if (gammas.size() != 1) throw riskpg::ConfigError("gradfield takes a single gamma");
      const auto records = riskpg::gradient_field_records(parse_grid(grid_spec), gammas.front());
      riskpg::emit_csv(records, gf_out);
      for (const auto& r : records)
        if (r.extra.at("converged") != 1.0) return kPartial;
      return kOk;
    }
    if (*rp) {
      const auto out = riskpg::repro(riskpg::parse_figure(figure), repro_dir);
      for (const auto& f : out.files) std::cout << f.string() << '\n';
      report_failures(out.result);
      return out.result.failures.empty() ? kOk : kPartial;
    }
  } catch (const riskpg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const riskpg::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
