#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmnoma/assignment.hpp"
#include "mmnoma/channel.hpp"

namespace mmnoma {

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  char buf[32];
  if (v == static_cast<double>(static_cast<long long>(v)) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[32];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

/// Gains file: one row per user, one comma-separated column per beam.
inline void write_gains_csv(const GainMatrix& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_gains_csv: cannot open " + path);
  for (std::size_t k = 0; k < g.num_users; ++k) {
    for (std::size_t m = 0; m < g.num_beams; ++m) {
      if (m) out << ',';
      out << format_double(g(k, m));
    }
    out << '\n';
  }
}

inline GainMatrix read_gains_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_gains_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error("read_gains_csv: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_gains_csv: empty file " + path);
  GainMatrix g(rows.size(), rows.front().size());
  for (std::size_t k = 0; k < g.num_users; ++k) {
    for (std::size_t m = 0; m < g.num_beams; ++m) g(k, m) = rows[k][m];
  }
  return g;
}

/// Assignment file: beam user lists in decode order plus quotas.
inline void write_assignment_json(const Assignment& a, const std::string& path) {
  nlohmann::json j;
  j["num_users"] = a.num_users();
  j["quotas"] = a.quotas;
  j["beams"] = a.order;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_assignment_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

inline Assignment read_assignment_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_assignment_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  const std::size_t num_users = j.at("num_users").get<std::size_t>();
  auto beams = j.at("beams").get<std::vector<std::vector<int>>>();
  std::vector<int> quotas;
  if (j.contains("quotas")) quotas = j.at("quotas").get<std::vector<int>>();
  return make_assignment(num_users, std::move(beams), std::move(quotas));
}

}  // namespace mmnoma
