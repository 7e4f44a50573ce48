#pragma once

// Plain-text key/value policy files. One key per line, followed by its
// whitespace-separated values; reals use 17 significant digits so a
// save/load cycle is exact.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpg/contextual_policy.hpp"
#include "riskpg/policy.hpp"

namespace riskpg {

namespace detail {

inline void write_values(std::ostream& os, const std::string& key, const double* data, Eigen::Index n) {
  os << key;
  for (Eigen::Index i = 0; i < n; ++i) os << ' ' << std::setprecision(17) << data[i];
  os << '\n';
}

using KeyValues = std::map<std::string, std::vector<std::string>>;

inline KeyValues read_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<std::string> vals;
    for (std::string tok; ls >> tok;) vals.push_back(tok);
    kv[key] = std::move(vals);
  }
  return kv;
}

inline const std::vector<std::string>& require(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("policy file: missing key '" + key + "'");
  return it->second;
}

inline Vec parse_vec(const KeyValues& kv, const std::string& key, Eigen::Index expected) {
  const auto& vals = require(kv, key);
  if (static_cast<Eigen::Index>(vals.size()) != expected)
    throw std::runtime_error("policy file: key '" + key + "' has " + std::to_string(vals.size()) +
                             " values, expected " + std::to_string(expected));
  Vec v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) v[i] = std::stod(vals[static_cast<std::size_t>(i)]);
  return v;
}

inline Eigen::Index parse_count(const KeyValues& kv, const std::string& key) {
  const auto& vals = require(kv, key);
  if (vals.size() != 1) throw std::runtime_error("policy file: key '" + key + "' expects one value");
  return static_cast<Eigen::Index>(std::stoll(vals[0]));
}

inline void expect_kind(const KeyValues& kv, const std::string& kind) {
  const auto& vals = require(kv, "policy");
  if (vals.size() != 1 || vals[0] != kind) throw std::runtime_error("policy file: expected policy kind '" + kind + "'");
}

}  // namespace detail

inline void write_policy(std::ostream& os, const DiagonalGaussianPolicy& p) {
  os << "policy diagonal_gaussian\n";
  os << "dim " << p.dim() << '\n';
  detail::write_values(os, "mean", p.mean().data(), p.dim());
  detail::write_values(os, "log_std", p.log_std().data(), p.dim());
}

inline void write_policy(std::ostream& os, const ContextualLinearGaussianPolicy& p) {
  const auto& f = p.features();
  os << "policy contextual_linear_gaussian\n";
  os << "num_features " << p.num_features() << '\n';
  os << "context_dim " << f.context_dim() << '\n';
  os << "param_dim " << p.param_dim() << '\n';
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = p.weights();
  detail::write_values(os, "weights", w.data(), w.size());
  detail::write_values(os, "log_std", p.log_std().data(), p.param_dim());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> freq = f.frequencies;
  detail::write_values(os, "frequencies", freq.data(), freq.size());
  detail::write_values(os, "phases", f.phases.data(), f.phases.size());
  detail::write_values(os, "bandwidth", &f.bandwidth, 1);
}

inline DiagonalGaussianPolicy read_diagonal_policy(std::istream& is) {
  const auto kv = detail::read_key_values(is);
  detail::expect_kind(kv, "diagonal_gaussian");
  const Eigen::Index d = detail::parse_count(kv, "dim");
  return {detail::parse_vec(kv, "mean", d), detail::parse_vec(kv, "log_std", d)};
}

inline ContextualLinearGaussianPolicy read_contextual_policy(std::istream& is) {
  const auto kv = detail::read_key_values(is);
  detail::expect_kind(kv, "contextual_linear_gaussian");
  const Eigen::Index k = detail::parse_count(kv, "num_features");
  const Eigen::Index c = detail::parse_count(kv, "context_dim");
  const Eigen::Index d = detail::parse_count(kv, "param_dim");
  const Vec w = detail::parse_vec(kv, "weights", k * d);
  const Vec freq = detail::parse_vec(kv, "frequencies", k * c);
  Mat weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.data(), k, d);
  Mat frequencies = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(freq.data(), k, c);
  FourierFeatureMap map(std::move(frequencies), detail::parse_vec(kv, "phases", k), detail::parse_vec(kv, "bandwidth", 1)[0]);
  return {std::move(weights), detail::parse_vec(kv, "log_std", d), std::move(map)};
}

template <class Policy>
void save_policy(const std::filesystem::path& path, const Policy& p) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_policy(os, p);
  if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline DiagonalGaussianPolicy load_diagonal_policy(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_diagonal_policy(is);
}

inline ContextualLinearGaussianPolicy load_contextual_policy(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_contextual_policy(is);
}

}  // namespace riskpg
