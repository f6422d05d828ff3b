#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmnoma/bb.hpp"
#include "mmnoma/channel.hpp"
#include "mmnoma/io.hpp"
#include "mmnoma/matching.hpp"
#include "mmnoma/rates.hpp"
#include "mmnoma/rng.hpp"
#include "mmnoma/sca.hpp"

namespace mmnoma {

enum class Pipeline { exhaust_bb, matching_bb, matching_sca, matching_fixed, random_fixed, oma };

inline const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::exhaust_bb: return "exhaust_bb";
    case Pipeline::matching_bb: return "matching_bb";
    case Pipeline::matching_sca: return "matching_sca";
    case Pipeline::matching_fixed: return "matching_fixed";
    case Pipeline::random_fixed: return "random_fixed";
    case Pipeline::oma: return "oma";
  }
  return "?";
}

inline Pipeline pipeline_from_name(const std::string& s) {
  for (Pipeline p : {Pipeline::exhaust_bb, Pipeline::matching_bb, Pipeline::matching_sca,
                     Pipeline::matching_fixed, Pipeline::random_fixed, Pipeline::oma}) {
    if (s == pipeline_name(p)) return p;
  }
  throw std::invalid_argument("unknown pipeline: " + s);
}

struct ExperimentConfig {
  int users = 8;
  int beams = 4;
  int quota = 2;
  int paths = 3;
  double carrier_frequency_hz = 28e9;
  double alpha_los = 2.0;
  double alpha_nlos = 3.0;
  double cell_radius_m = 10.0;
  double bandwidth_hz = 100e6;  // metadata only; rates stay in bits/s/Hz
  double r_th = 0.1;
  double epsilon = 0.1;
  double epsilon_prime = 0.05;
  double sigma2 = 1.0;
  int trials = 10;
  std::uint64_t master_seed = 1;
  std::vector<double> snr_db_list = {0.0, 10.0};
  std::vector<Pipeline> pipelines = {Pipeline::matching_sca, Pipeline::oma};
  std::string out_path;

  ChannelParams channel_params() const {
    ChannelParams cp;
    cp.carrier_frequency_hz = carrier_frequency_hz;
    cp.num_paths = paths;
    cp.alpha_los = alpha_los;
    cp.alpha_nlos = alpha_nlos;
    cp.cell_radius_m = cell_radius_m;
    cp.num_antennas = beams;
    cp.noise_power = sigma2;
    return cp;
  }

  std::vector<int> quotas() const { return std::vector<int>(static_cast<std::size_t>(beams), quota); }

  void validate() const {
    channel_params().validate();
    if (users < 1 || quota < 1 || trials < 1 || r_th < 0 || epsilon <= 0 || epsilon_prime <= 0 ||
        snr_db_list.empty() || pipelines.empty()) {
      throw std::invalid_argument("ExperimentConfig: invalid field");
    }
  }
};

/// Flat key=value text, '#' comments. Unknown keys are an error.
inline void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    if (key == "users") cfg.users = std::stoi(val);
    else if (key == "beams") cfg.beams = std::stoi(val);
    else if (key == "quota") cfg.quota = std::stoi(val);
    else if (key == "paths") cfg.paths = std::stoi(val);
    else if (key == "carrier_frequency_hz") cfg.carrier_frequency_hz = std::stod(val);
    else if (key == "alpha_los") cfg.alpha_los = std::stod(val);
    else if (key == "alpha_nlos") cfg.alpha_nlos = std::stod(val);
    else if (key == "cell_radius_m") cfg.cell_radius_m = std::stod(val);
    else if (key == "bandwidth_hz") cfg.bandwidth_hz = std::stod(val);
    else if (key == "r_th") cfg.r_th = std::stod(val);
    else if (key == "epsilon") cfg.epsilon = std::stod(val);
    else if (key == "epsilon_prime") cfg.epsilon_prime = std::stod(val);
    else if (key == "trials") cfg.trials = std::stoi(val);
    else if (key == "seed") cfg.master_seed = std::stoull(val);
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

/// P_tot from the operating point SNR = P eta / (sigma^2 M).
inline double transmit_power_from_snr(double snr_db, double sigma2, int beams, double eta) {
  if (sigma2 <= 0 || beams < 1 || eta <= 0) {
    throw std::invalid_argument("transmit_power_from_snr: positive inputs required");
  }
  return std::pow(10.0, snr_db / 10.0) * sigma2 * static_cast<double>(beams) / eta;
}

/// Orthogonal baseline: each beam's users served in equal time shares at full
/// beam power P_tot/M, inter-beam interference from the other beams' full power.
inline double oma_baseline(const GainMatrix& g, const Assignment& a, double p_tot, double sigma2) {
  const double per_beam = p_tot / static_cast<double>(a.num_beams());
  double sum = 0.0;
  for (std::size_t m = 0; m < a.num_beams(); ++m) {
    const std::size_t q = a.order[m].size();
    if (q == 0) continue;
    for (int u : a.order[m]) {
      const std::size_t k = static_cast<std::size_t>(u);
      double inter = sigma2;
      for (std::size_t n = 0; n < a.num_beams(); ++n) {
        if (n == m || a.order[n].empty()) continue;
        inter += g(k, n) * per_beam;
      }
      sum += std::log2(1.0 + g(k, m) * per_beam / inter) / static_cast<double>(q);
    }
  }
  return sum;
}

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  Pipeline pipeline = Pipeline::oma;
  double snr_db = 0.0;
  double sum_rate_bps_hz = 0.0;
  int served_users = 0;
  int iterations = 0;
  double wall_ms = 0.0;
  bool feasible = false;
  // Not serialized; kept so reported rates can be re-derived.
  Assignment assignment;
  PowerAllocation power;
};

struct AggregateRow {
  Pipeline pipeline;
  double snr_db;
  int trials;
  double mean_sum_rate;
  double ci95_halfwidth;
};

struct ExperimentOutcome {
  std::vector<TrialResult> rows;
  std::vector<AggregateRow> aggregates;
};

inline std::string results_csv(const std::vector<TrialResult>& rows) {
  std::ostringstream out;
  out << "trial,seed,pipeline,snr_db,sum_rate_bps_hz,served_users,iterations,wall_ms,feasible\n";
  for (const TrialResult& r : rows) {
    out << r.trial << ',' << r.seed << ',' << pipeline_name(r.pipeline) << ','
        << format_double(r.snr_db) << ',' << format_double(r.sum_rate_bps_hz) << ','
        << r.served_users << ',' << r.iterations << ',' << format_double(r.wall_ms) << ','
        << (r.feasible ? 1 : 0) << '\n';
  }
  return out.str();
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& aggs) {
  std::ostringstream out;
  out << "pipeline,snr_db,trials,mean_sum_rate_bps_hz,ci95_halfwidth\n";
  for (const AggregateRow& a : aggs) {
    out << pipeline_name(a.pipeline) << ',' << format_double(a.snr_db) << ',' << a.trials << ','
        << format_double(a.mean_sum_rate) << ',' << format_double(a.ci95_halfwidth) << '\n';
  }
  return out.str();
}

namespace detail {

inline std::vector<AggregateRow> aggregate(const std::vector<TrialResult>& rows,
                                           const std::vector<Pipeline>& pipelines,
                                           const std::vector<double>& snrs) {
  std::vector<AggregateRow> out;
  for (Pipeline p : pipelines) {
    for (double snr : snrs) {
      std::vector<double> vals;
      for (const TrialResult& r : rows) {
        if (r.pipeline == p && r.snr_db == snr) vals.push_back(r.sum_rate_bps_hz);
      }
      if (vals.empty()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var = vals.size() > 1 ? var / static_cast<double>(vals.size() - 1) : 0.0;
      const double hw = 1.96 * std::sqrt(var / static_cast<double>(vals.size()));
      out.push_back({p, snr, static_cast<int>(vals.size()), mean, hw});
    }
  }
  return out;
}

}  // namespace detail

/// Monte Carlo sweep: per trial draw a channel and beams from the trial's own
/// substream, run every selected pipeline at every SNR. Deterministic per
/// (master_seed, trial) except for the wall-clock column.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ChannelParams cp = cfg.channel_params();
  const double eta = cp.eta();
  const std::vector<int> quotas = cfg.quotas();

  ExperimentOutcome outcome;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t seed = Rng::derive(cfg.master_seed, static_cast<std::uint64_t>(trial));
    const ChannelRealization ch = draw_channel(cp, cfg.users, Rng::derive(seed, 1));
    const BeamSet beams = draw_beams(cfg.beams, Rng::derive(seed, 2));
    const GainMatrix g = equivalent_gains(ch, beams);
    const std::vector<double> r_min = uniform_qos(g.num_users, cfg.r_th);

    for (double snr : cfg.snr_db_list) {
      const double p_tot = transmit_power_from_snr(snr, cfg.sigma2, cfg.beams, eta);
      Matching matched;
      bool have_matching = false;
      auto ensure_matching = [&]() {
        if (!have_matching) {
          matched = swap_phase(deferred_acceptance(g, quotas), g, p_tot, cfg.sigma2).matching;
          have_matching = true;
        }
      };
      // The SCA-guided decode-order search is shared between matching_sca and
      // matching_bb so both report the same order choice.
      OrderSearchedSca searched;
      bool have_search = false;
      auto ensure_order_search = [&]() {
        ensure_matching();
        if (!have_search) {
          searched = solve_sca_order_search(g, matched.assign, r_min, p_tot, cfg.sigma2,
                                            cfg.epsilon_prime);
          have_search = true;
        }
      };

      for (Pipeline p : cfg.pipelines) {
        TrialResult row;
        row.trial = trial;
        row.seed = seed;
        row.pipeline = p;
        row.snr_db = snr;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          switch (p) {
            case Pipeline::exhaust_bb: {
              ExhaustiveResult ex =
                  exhaustive_schedule(g, quotas, r_min, p_tot, cfg.sigma2, cfg.epsilon);
              row.feasible = ex.feasible;
              row.assignment = ex.assignment;
              if (ex.feasible) {
                row.power = ex.report.best_power;
                row.sum_rate_bps_hz = ex.report.sum_rate();
                row.iterations = ex.report.iterations;
                row.served_users = static_cast<int>(ex.assignment.scheduled_count());
              }
              break;
            }
            case Pipeline::matching_bb: {
              ensure_order_search();
              const Assignment& a = searched.assignment;
              BbReport rep = solve_bb(g, a, r_min, p_tot, cfg.sigma2, cfg.epsilon);
              row.assignment = a;
              row.feasible = rep.status != BbStatus::infeasible;
              if (row.feasible) {
                row.power = rep.best_power;
                row.sum_rate_bps_hz = rep.sum_rate();
                row.iterations = rep.iterations;
                row.served_users = static_cast<int>(a.scheduled_count());
              }
              break;
            }
            case Pipeline::matching_sca: {
              ensure_order_search();
              const Assignment& a = searched.assignment;
              const ScaReport& rep = searched.report;
              row.assignment = a;
              row.feasible = rep.feasible;
              if (rep.feasible) {
                row.power = rep.power;
                row.sum_rate_bps_hz = rep.sum_rate;
                row.iterations = rep.iterations;
                row.served_users = static_cast<int>(a.scheduled_count());
              }
              break;
            }
            case Pipeline::matching_fixed: {
              ensure_matching();
              const Assignment& a = matched.assign;
              row.assignment = a;
              row.power = fixed_power_allocation(a, p_tot);
              row.sum_rate_bps_hz = achievable_rates(g, a, row.power, cfg.sigma2).sum_rate();
              row.served_users = static_cast<int>(a.scheduled_count());
              row.feasible = true;
              break;
            }
            case Pipeline::random_fixed: {
              const Assignment a = random_schedule(g, quotas, Rng::derive(seed, 3));
              row.assignment = a;
              row.power = fixed_power_allocation(a, p_tot);
              row.sum_rate_bps_hz = achievable_rates(g, a, row.power, cfg.sigma2).sum_rate();
              row.served_users = static_cast<int>(a.scheduled_count());
              row.feasible = true;
              break;
            }
            case Pipeline::oma: {
              ensure_matching();
              const Assignment& a = matched.assign;
              row.assignment = a;
              row.sum_rate_bps_hz = oma_baseline(g, a, p_tot, cfg.sigma2);
              row.served_users = static_cast<int>(a.scheduled_count());
              row.feasible = true;
              break;
            }
          }
        } catch (const std::exception&) {
          row.feasible = false;
          row.sum_rate_bps_hz = 0.0;
        }
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        outcome.rows.push_back(std::move(row));
      }
    }
  }

  outcome.aggregates = detail::aggregate(outcome.rows, cfg.pipelines, cfg.snr_db_list);

  if (!cfg.out_path.empty()) {
    std::ofstream out(cfg.out_path);
    if (!out) throw std::runtime_error("run_experiment: cannot open " + cfg.out_path);
    out << results_csv(outcome.rows);
    std::string agg_path = cfg.out_path;
    const std::size_t dot = agg_path.rfind('.');
    if (dot != std::string::npos && agg_path.find('/', dot) == std::string::npos) {
      agg_path.insert(dot, "_aggregate");
    } else {
      agg_path += "_aggregate.csv";
    }
    std::ofstream agg(agg_path);
    if (!agg) throw std::runtime_error("run_experiment: cannot open " + agg_path);
    agg << aggregate_csv(outcome.aggregates);
  }
  return outcome;
}

}  // namespace mmnoma
