#pragma once

// Environment construction from plain-text `key = value` files. Lines
// starting with '#' are comments. `env` selects the environment; every
// other key overrides one numeric field. List values are comma separated.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

#include "riskpg/envs/badminton.hpp"
#include "riskpg/envs/contextual_badminton.hpp"
#include "riskpg/envs/lin_toy.hpp"
#include "riskpg/envs/portfolio.hpp"

namespace riskpg {

using Environment = std::variant<PortfolioEnv, BadmintonToyEnv, LinToyEnv, ContextualBadmintonEnv>;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
}

inline Vec to_list(const std::string& key, const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) vals.push_back(to_real(key, trim(item)));
  return Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

class KeyReader {
 public:
  explicit KeyReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  void real(const std::string& key, double& field) {
    if (auto it = kv_.find(key); it != kv_.end()) {
      field = to_real(key, it->second);
      kv_.erase(it);
    }
  }

  bool list(const std::string& key, Vec& field) {
    if (auto it = kv_.find(key); it != kv_.end()) {
      field = to_list(key, it->second);
      kv_.erase(it);
      return true;
    }
    return false;
  }

  void finish() const {
    if (!kv_.empty()) throw ConfigError("unknown config key '" + kv_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
};

inline void read_physics(KeyReader& r, BadmintonToyEnv& e) {
  r.real("x0", e.x0);
  r.real("y0", e.y0);
  r.real("g", e.g);
  r.real("sigma_v0", e.sigma_v0);
  r.real("x_des", e.x_des);
}

}  // namespace detail

/// Environment with default settings for a CLI name
/// (portfolio, toy-badminton, lin-toy, contextual).
inline Environment default_environment(const std::string& name) {
  if (name == "portfolio") return make_default_portfolio();
  if (name == "toy-badminton" || name == "toy_badminton") return BadmintonToyEnv{};
  if (name == "lin-toy" || name == "lin_toy") return LinToyEnv{};
  if (name == "contextual") return ContextualBadmintonEnv{};
  throw ConfigError("unknown environment '" + name + "'");
}

inline Environment parse_environment(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  const auto it = kv.find("env");
  if (it == kv.end()) throw ConfigError("config is missing the 'env' key");
  const std::string name = it->second;
  kv.erase(it);
  Environment env = default_environment(name);
  detail::KeyReader r(std::move(kv));

  std::visit(
      [&](auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, PortfolioEnv>) {
          double n = static_cast<double>(e.num_assets());
          double mu_first = 4.0, mu_last = 0.5, sigma_first = 2.0, sigma_last = 0.01;
          r.real("num_assets", n);
          r.real("mu_first", mu_first);
          r.real("mu_last", mu_last);
          r.real("sigma_first", sigma_first);
          r.real("sigma_last", sigma_last);
          if (n < 1 || n != std::floor(n)) throw ConfigError("num_assets must be a positive integer");
          e = make_linear_portfolio(static_cast<Eigen::Index>(n), mu_first, mu_last, sigma_first, sigma_last);
          r.list("asset_means", e.asset_means);
          r.list("asset_stds", e.asset_stds);
        } else if constexpr (std::is_same_v<T, BadmintonToyEnv>) {
          detail::read_physics(r, e);
        } else if constexpr (std::is_same_v<T, ContextualBadmintonEnv>) {
          detail::read_physics(r, e.physics);
          r.real("x_lo", e.x_lo);
          r.real("x_hi", e.x_hi);
          r.real("y_lo", e.y_lo);
          r.real("y_hi", e.y_hi);
          r.real("r_target", e.r_target);
          r.real("tolerance", e.tolerance);
        }
      },
      env);
  r.finish();
  std::visit(
      [](const auto& e) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(e)>, LinToyEnv>) {
          try {
            e.validate();
          } catch (const std::invalid_argument& ex) {
            throw ConfigError(ex.what());
          }
        }
      },
      env);
  return env;
}

inline Environment load_environment(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open environment config '" + path.string() + "'");
  return parse_environment(is);
}

}  // namespace riskpg
