#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace riskpg {

/// Scalar summary of one training iteration (or the final evaluation).
struct IterationRecord {
  std::string experiment;
  std::string algo;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::size_t iter = 0;
  double j_risk = 0.0;
  double mean_return = 0.0;
  double var_return = 0.0;
  double policy_mean_norm = 0.0;
  double policy_sigma_mean = 0.0;
  std::map<std::string, double> extra;

  bool operator==(const IterationRecord&) const = default;
};

}  // namespace riskpg
