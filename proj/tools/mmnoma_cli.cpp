#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmnoma/experiment.hpp"
#include "mmnoma/io.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run_cmd(const std::string& config_path, std::uint64_t seed, int trials,
            const std::string& pipelines, const std::string& snr_list, const std::string& out,
            int users, int beams, int quota, double r_th) {
  mmnoma::ExperimentConfig cfg;
  if (!config_path.empty()) mmnoma::apply_config_file(cfg, config_path);
  cfg.master_seed = seed;
  cfg.trials = trials;
  cfg.out_path = out;
  if (users > 0) cfg.users = users;
  if (beams > 0) cfg.beams = beams;
  if (quota > 0) cfg.quota = quota;
  if (r_th >= 0) cfg.r_th = r_th;
  cfg.pipelines.clear();
  for (const std::string& p : split_csv(pipelines)) {
    cfg.pipelines.push_back(mmnoma::pipeline_from_name(p));
  }
  cfg.snr_db_list.clear();
  for (const std::string& s : split_csv(snr_list)) cfg.snr_db_list.push_back(std::stod(s));

  const mmnoma::ExperimentOutcome outcome = mmnoma::run_experiment(cfg);
  std::printf("%s", mmnoma::aggregate_csv(outcome.aggregates).c_str());
  return 0;
}

struct SolveInputs {
  mmnoma::GainMatrix gains;
  mmnoma::Assignment assignment;
};

SolveInputs load_instance(const std::string& gains_path, const std::string& assignment_path) {
  SolveInputs in;
  in.gains = mmnoma::read_gains_csv(gains_path);
  in.assignment = mmnoma::read_assignment_json(assignment_path);
  if (in.assignment.num_users() != in.gains.num_users ||
      in.assignment.num_beams() != in.gains.num_beams) {
    throw std::runtime_error("gains and assignment dimensions disagree");
  }
  return in;
}

void print_solution(const mmnoma::GainMatrix& g, const mmnoma::Assignment& a,
                    const mmnoma::PowerAllocation& p, double sigma2, bool feasible,
                    int iterations) {
  nlohmann::json j;
  j["feasible"] = feasible;
  j["iterations"] = iterations;
  if (feasible) {
    const mmnoma::RateVector rv = mmnoma::achievable_rates(g, a, p, sigma2);
    j["sum_rate_bps_hz"] = rv.sum_rate();
    j["powers"] = p.beta;
    j["rates"] = rv.rate;
  }
  std::printf("%s\n", j.dump(2).c_str());
}

int solve_cmd(const std::string& gains_path, const std::string& assignment_path,
              const std::string& algo, double p_tot, double sigma2, double r_th, double epsilon,
              double epsilon_prime, const std::string& trace_out) {
  const SolveInputs in = load_instance(gains_path, assignment_path);
  const std::vector<double> r_min = mmnoma::uniform_qos(in.gains.num_users, r_th);

  if (algo == "bb") {
    const mmnoma::BbReport rep =
        mmnoma::solve_bb(in.gains, in.assignment, r_min, p_tot, sigma2, epsilon);
    const bool ok = rep.status != mmnoma::BbStatus::infeasible;
    print_solution(in.gains, in.assignment, rep.best_power, sigma2, ok, rep.iterations);
    if (!trace_out.empty()) {
      std::ofstream out(trace_out);
      out << "iteration,upper,lower,open_nodes\n";
      for (const auto& e : rep.gap_history) {
        out << e.iteration << ',' << mmnoma::format_double(e.upper) << ','
            << mmnoma::format_double(e.lower) << ',' << e.open_nodes << '\n';
      }
    }
    return ok ? 0 : 3;
  }
  if (algo == "sca") {
    const mmnoma::ScaReport rep =
        mmnoma::solve_sca(in.gains, in.assignment, r_min, p_tot, sigma2, epsilon_prime);
    print_solution(in.gains, in.assignment, rep.power, sigma2, rep.feasible, rep.iterations);
    if (!trace_out.empty()) {
      std::ofstream out(trace_out);
      out << "iteration,objective\n";
      for (std::size_t i = 0; i < rep.objective_history.size(); ++i) {
        out << i << ',' << mmnoma::format_double(rep.objective_history[i]) << '\n';
      }
    }
    return rep.feasible ? 0 : 3;
  }
  if (algo == "fixed") {
    const mmnoma::PowerAllocation p = mmnoma::fixed_power_allocation(in.assignment, p_tot);
    print_solution(in.gains, in.assignment, p, sigma2, true, 0);
    return 0;
  }
  std::fprintf(stderr, "unknown algorithm '%s' (expected bb, sca or fixed)\n", algo.c_str());
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam scheduling and power allocation experiments"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Monte Carlo experiment sweep");
  std::string config_path, pipelines, snr_list, out;
  std::uint64_t seed = 0;
  int trials = 0, users = 0, beams = 0, quota = 0;
  double r_th = -1.0;
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--seed", seed, "master seed")->required();
  run->add_option("--trials", trials, "number of Monte Carlo trials")->required();
  run->add_option("--pipelines", pipelines,
                  "comma list: exhaust_bb,matching_bb,matching_sca,matching_fixed,random_fixed,oma")
      ->required();
  run->add_option("--snr-list", snr_list, "comma list of SNR points in dB")->required();
  run->add_option("--out", out, "results CSV path (aggregate written alongside)")->required();
  run->add_option("--users", users, "user count override");
  run->add_option("--beams", beams, "beam count override");
  run->add_option("--quota", quota, "per-beam quota override");
  run->add_option("--r-th", r_th, "per-user rate floor override, bits/s/Hz");

  // solve
  auto* solve = app.add_subcommand("solve", "power allocation on one fixed instance");
  std::string gains_path, assignment_path, algo = "bb";
  double p_tot = 1.0, sigma2 = 1.0, s_r_th = 0.1, epsilon = 0.1, epsilon_prime = 0.05;
  solve->add_option("--gains", gains_path, "gains CSV, one row per user")->required();
  solve->add_option("--assignment", assignment_path, "assignment JSON")->required();
  solve->add_option("--algo", algo, "bb, sca or fixed");
  solve->add_option("--p-tot", p_tot, "total power budget")->required();
  solve->add_option("--sigma2", sigma2, "noise power");
  solve->add_option("--r-th", s_r_th, "per-user rate floor, bits/s/Hz");
  solve->add_option("--epsilon", epsilon, "branch-and-bound gap tolerance");
  solve->add_option("--epsilon-prime", epsilon_prime, "surrogate-loop stop tolerance");

  // trace
  auto* trace = app.add_subcommand("trace", "emit solver convergence CSV");
  std::string t_gains, t_assignment, t_algo = "bb", t_out;
  double t_p_tot = 1.0, t_sigma2 = 1.0, t_r_th = 0.1, t_epsilon = 0.1, t_epsilon_prime = 0.05;
  trace->add_option("--gains", t_gains, "gains CSV")->required();
  trace->add_option("--assignment", t_assignment, "assignment JSON")->required();
  trace->add_option("--algo", t_algo, "bb or sca");
  trace->add_option("--p-tot", t_p_tot, "total power budget")->required();
  trace->add_option("--sigma2", t_sigma2, "noise power");
  trace->add_option("--r-th", t_r_th, "per-user rate floor, bits/s/Hz");
  trace->add_option("--epsilon", t_epsilon, "branch-and-bound gap tolerance");
  trace->add_option("--epsilon-prime", t_epsilon_prime, "surrogate-loop stop tolerance");
  trace->add_option("--out", t_out, "trace CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_cmd(config_path, seed, trials, pipelines, snr_list, out, users, beams, quota,
                     r_th);
    }
    if (solve->parsed()) {
      return solve_cmd(gains_path, assignment_path, algo, p_tot, sigma2, s_r_th, epsilon,
                       epsilon_prime, "");
    }
    if (trace->parsed()) {
      return solve_cmd(t_gains, t_assignment, t_algo, t_p_tot, t_sigma2, t_r_th, t_epsilon,
                       t_epsilon_prime, t_out);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
