#pragma once

// Canned figure reproductions. Each writes CSV files into an output directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "riskpg/harness/csv.hpp"
#include "riskpg/harness/experiment.hpp"
#include "riskpg/harness/stats.hpp"

namespace riskpg {

enum class Figure { fig2, fig3, fig4 };

inline Figure parse_figure(const std::string& s) {
  if (s == "fig2") return Figure::fig2;
  if (s == "fig3") return Figure::fig3;
  if (s == "fig4") return Figure::fig4;
  throw ConfigError("unknown figure '" + s + "'");
}

inline const std::vector<double>& fig2_gammas() {
  static const std::vector<double> g{0.0, 1.0, -1.0};
  return g;
}

inline const std::vector<double>& fig3_gammas() {
  static const std::vector<double> g{0.1, 1.0, 5.0, 10.0};
  return g;
}

inline const std::vector<double>& fig4_gammas() {
  static const std::vector<double> g{0.01, 0.1, 1.0, 5.0, 10.0, 100.0, 1000.0,
                                     -0.01, -0.1, -1.0, -5.0, -10.0, -100.0, -1000.0};
  return g;
}

/// Portfolio, vanilla risk-sensitive PG, 10 seeds x 1000 samples.
inline ExperimentConfig fig3_config() {
  ExperimentConfig c;
  c.experiment = Experiment::portfolio;
  c.algo = Algo::pg;
  c.gamma_list = fig3_gammas();
  c.seeds = 10;
  c.samples_per_iter = 1000;
  c.iterations = 300;
  c.step_size = 0.05;
  c.base_seed = 3;
  return c;
}

/// Toy badminton, natural risk-sensitive PG, 10 seeds x 1000 samples.
inline ExperimentConfig fig4_config() {
  ExperimentConfig c;
  c.experiment = Experiment::toy_badminton;
  c.algo = Algo::npg;
  c.gamma_list = fig4_gammas();
  c.seeds = 10;
  c.samples_per_iter = 1000;
  c.iterations = 2000;
  c.step_size = 1.0;
  c.base_seed = 4;
  return c;
}

struct HistogramRange {
  std::size_t bins = 60;
  double lo = -2.0;
  double hi = 10.0;
};

/// Seed-pooled final-policy return histograms, one block per gamma.
inline void write_histograms(std::ostream& os, const ExperimentResult& result, const HistogramRange& range = {}) {
  std::map<double, std::vector<double>> pooled;
  std::vector<double> order;
  for (const auto& cell : result.cells) {
    if (cell.error) continue;
    if (!pooled.contains(cell.gamma)) order.push_back(cell.gamma);
    auto& v = pooled[cell.gamma];
    v.insert(v.end(), cell.final_returns.begin(), cell.final_returns.end());
  }
  os << "gamma,bin_center,count\n";
  for (double g : order)
    for (const auto& b : reward_histogram(pooled[g], range.bins, range.lo, range.hi))
      os << format_real(g) << ',' << format_real(b.center) << ',' << b.count << '\n';
}

/// Per-gamma seed medians and seed spreads of the final-evaluation records.
inline void write_final_summary(std::ostream& os, const ExperimentResult& result, const std::vector<std::string>& keys) {
  std::map<double, std::vector<const IterationRecord*>> finals;
  std::vector<double> order;
  for (const auto& r : result.records) {
    if (auto it = r.extra.find("final"); it == r.extra.end() || it->second != 1.0) continue;
    if (!finals.contains(r.gamma)) order.push_back(r.gamma);
    finals[r.gamma].push_back(&r);
  }
  os << "gamma,seeds,median_mean_return,std_over_seeds_mean_return,median_return_std";
  for (const auto& k : keys) os << ",median_" << k << ",std_over_seeds_" << k;
  os << '\n';
  auto spread = [](const std::vector<double>& v) { return std::sqrt(variance(v)); };
  for (double g : order) {
    const auto& rs = finals[g];
    std::vector<double> m, sd;
    for (const auto* r : rs) {
      m.push_back(r->mean_return);
      sd.push_back(std::sqrt(r->var_return));
    }
    os << format_real(g) << ',' << rs.size() << ',' << format_real(median(m)) << ',' << format_real(spread(m)) << ','
       << format_real(median(sd));
    for (const auto& k : keys) {
      std::vector<double> v;
      for (const auto* r : rs)
        if (auto it = r->extra.find(k); it != r->extra.end()) v.push_back(it->second);
      if (v.empty())
        os << ",,";
      else
        os << ',' << format_real(median(v)) << ',' << format_real(spread(v));
    }
    os << '\n';
  }
}

struct ReproOutput {
  ExperimentResult result;
  std::vector<std::filesystem::path> files;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline ReproOutput repro(Figure fig, const std::filesystem::path& out_dir, std::size_t threads = 0) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  ReproOutput out;
  switch (fig) {
    case Figure::fig2: {
      for (double g : fig2_gammas()) {
        auto recs = gradient_field_records(FieldGrid{}, g);
        out.result.records.insert(out.result.records.end(), recs.begin(), recs.end());
      }
      out.files.push_back(out_dir / "fig2.csv");
      emit_csv(out.result.records, out.files.back());
      break;
    }
    case Figure::fig3: {
      auto cfg = fig3_config();
      cfg.threads = threads;
      out.result = run_experiment(cfg);
      out.files.push_back(out_dir / "fig3.csv");
      emit_csv(out.result.records, out.files.back());
      std::ostringstream hist;
      write_histograms(hist, out.result);
      out.files.push_back(out_dir / "fig3_histograms.csv");
      write_text(out.files.back(), hist.str());
      break;
    }
    case Figure::fig4: {
      auto cfg = fig4_config();
      cfg.threads = threads;
      out.result = run_experiment(cfg);
      out.files.push_back(out_dir / "fig4.csv");
      emit_csv(out.result.records, out.files.back());
      std::ostringstream summary;
      write_final_summary(summary, out.result, {"err_mean", "x1_var", "x1_var_exact", "cmd_speed", "speed_mean"});
      out.files.push_back(out_dir / "fig4_summary.csv");
      write_text(out.files.back(), summary.str());
      break;
    }
  }
  return out;
}

}  // namespace riskpg
