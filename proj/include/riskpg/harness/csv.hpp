#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskpg/record.hpp"

namespace riskpg {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& fixed_columns() {
  static const std::vector<std::string> cols{"experiment", "algo",       "gamma",       "seed",
                                             "iter",       "j_risk",     "mean_return", "var_return",
                                             "policy_mean_norm", "policy_sigma_mean"};
  return cols;
}

/// Shortest text that is unambiguous at 17 significant digits.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> extra_columns(const std::vector<IterationRecord>& records) {
  std::set<std::string> keys;
  for (const auto& r : records)
    for (const auto& [k, v] : r.extra) keys.insert(k);
  return {keys.begin(), keys.end()};
}

/// Header row, then one row per record; extras sorted by key, blank when a
/// record lacks that key.
inline void write_csv(std::ostream& os, const std::vector<IterationRecord>& records) {
  const auto extras = extra_columns(records);
  std::string line;
  for (const auto& c : fixed_columns()) line += (line.empty() ? "" : ",") + c;
  for (const auto& c : extras) line += "," + c;
  os << line << '\n';
  for (const auto& r : records) {
    if (r.experiment.find(',') != std::string::npos || r.algo.find(',') != std::string::npos)
      throw std::invalid_argument("write_csv: text fields may not contain commas");
    os << r.experiment << ',' << r.algo << ',' << format_real(r.gamma) << ',' << r.seed << ',' << r.iter << ','
       << format_real(r.j_risk) << ',' << format_real(r.mean_return) << ',' << format_real(r.var_return) << ','
       << format_real(r.policy_mean_norm) << ',' << format_real(r.policy_sigma_mean);
    for (const auto& k : extras) {
      os << ',';
      if (auto it = r.extra.find(k); it != r.extra.end()) os << format_real(it->second);
    }
    os << '\n';
  }
}

inline void emit_csv(const std::vector<IterationRecord>& records, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_csv(os, records);
  os.flush();
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Inverse of write_csv.
inline std::vector<IterationRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("read_csv: missing header");
  const auto header = split_csv_line(line);
  const auto& fixed = fixed_columns();
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
    throw IoError("read_csv: unexpected header");
  std::vector<IterationRecord> out;
  while (std::getline(is, line)) {
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw IoError("read_csv: row has " + std::to_string(cells.size()) + " cells");
    IterationRecord r;
    r.experiment = cells[0];
    r.algo = cells[1];
    r.gamma = std::stod(cells[2]);
    r.seed = std::stoull(cells[3]);
    r.iter = std::stoull(cells[4]);
    r.j_risk = std::stod(cells[5]);
    r.mean_return = std::stod(cells[6]);
    r.var_return = std::stod(cells[7]);
    r.policy_mean_norm = std::stod(cells[8]);
    r.policy_sigma_mean = std::stod(cells[9]);
    for (std::size_t c = fixed.size(); c < header.size(); ++c)
      if (!cells[c].empty()) r.extra[header[c]] = std::stod(cells[c]);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<IterationRecord> load_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_csv(is);
}

}  // namespace riskpg
