#include <CLI11.hpp>

#include <Eigen/Core>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "mfgrid/common.hpp"
#include "mfgrid/dispatch.hpp"
#include "mfgrid/metrics.hpp"
#include "mfgrid/results.hpp"
#include "mfgrid/rng.hpp"
#include "mfgrid/scenario.hpp"
#include "mfgrid/simulate.hpp"

namespace {

using namespace mfgrid;

struct CommonArgs {
  std::string scenario = "ieee14-baseline";
  io::Overrides overrides;
  std::string outdir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario,
                  "preset name or scenario JSON path");
  auto opt = [&](const char* flag, auto& slot, const char* help) {
    cmd->add_option_function<std::decay_t<decltype(*slot)>>(
        flag,
        [&slot](const auto& v) { slot = v; },
        help);
  };
  opt("--seed", args.overrides.seed, "random seed");
  opt("--days", args.overrides.days, "simulated days");
  opt("--agents-per-node", args.overrides.agents_per_node,
      "agents at each bus");
  opt("--threads", args.overrides.threads, "worker threads");
  opt("--beta", args.overrides.discount, "discount factor per hour");
  opt("--delta", args.overrides.delta, "belief learning rate");
  opt("--mode", args.overrides.mode,
      "mf-shock-info | mf-no-shock-info | no-learning");
  opt("--vf-tol", args.overrides.vf_tol, "value-function Bellman tolerance");
  opt("--vf-drift-tol", args.overrides.vf_drift_tol,
      "belief drift before a value-function recompute, $/MWh");
  opt("--action-grid", args.overrides.action_grid, "action grid points");
  opt("--soc-grid", args.overrides.soc_grid, "SoC grid points");
  opt("--network", args.overrides.network_path, "network file override");
  opt("--load-shape", args.overrides.load_shape_path,
      "load shape file override");
  cmd->add_option("--outdir", args.outdir, "output directory");
}

void apply_thread_env(io::Overrides& ov) {
  if (ov.threads.has_value()) return;
  if (const char* env = std::getenv("MFG_GRID_THREADS")) {
    try {
      ov.threads = std::stoi(env);
    } catch (const std::exception&) {
      throw InputError("MFG_GRID_THREADS is not an integer");
    }
  }
}

int run_one(const CommonArgs& args) {
  io::Scenario sc = io::load_scenario(args.scenario, args.overrides);
  for (const auto& w : sc.warnings) std::cerr << "warning: " << w << '\n';
  sim::SimulationLog log =
      sim::run_simulation(sc.network, sc.types, sc.config);
  const auto metrics_list = io::standard_metrics(log, sc.config.seed);
  io::emit_results(log, sc, metrics_list, args.outdir);
  std::cout << "run complete: " << sc.config.days << " days, mode "
            << io::mode_name(sc.config.mode) << ", seed " << sc.config.seed
            << ", results in " << args.outdir << '\n';
  for (const auto& n : log.notices) std::cout << "notice: " << n << '\n';
  return 0;
}

int validate_cmd(const CommonArgs& args) {
  io::Scenario sc = io::load_scenario(args.scenario, args.overrides);
  const auto issues = grid::validate_network(sc.network);
  for (const auto& w : sc.warnings) std::cout << "warning: " << w << '\n';
  if (issues.empty()) {
    std::cout << "scenario '" << sc.name << "' valid: " << sc.network.n_buses
              << " buses, " << sc.network.n_lines() << " lines, "
              << sc.types.size() << " agent types, "
              << sc.config.agents_per_node << " agents/node\n";
    return 0;
  }
  for (const auto& i : issues)
    std::cout << "violation: " << i.rule << " (" << i.detail << ")\n";
  throw InputError("network validation failed");
}

// Re-derive IMV / spread / cost series from a stored market table.
int metrics_cmd(const std::string& run_dir, int window_days) {
  const std::string path = run_dir + "/market_hourly.tsv";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  struct Row {
    int day, hour, bus;
    double demand, lmp;
    bool valid;
  };
  std::vector<Row> rows;
  int n_buses = 0, days = 0, hours = 0;
  while (std::getline(in, line)) {
    Row r;
    int ds, ss, inf, valid, breach, licq;
    double lambda;
    if (std::sscanf(line.c_str(), "%d\t%d\t%d\t%lf\t%lf\t%lf\t%d\t%d\t%d\t%d\t%d\t%d",
                    &r.day, &r.hour, &r.bus, &r.demand, &r.lmp, &lambda, &ds,
                    &ss, &inf, &valid, &breach, &licq) != 12)
      throw InputError(path + ": malformed row '" + line + "'");
    r.valid = valid != 0;
    n_buses = std::max(n_buses, r.bus);
    days = std::max(days, r.day);
    hours = std::max(hours, r.hour);
    rows.push_back(r);
  }
  if (rows.empty()) throw InputError(path + ": no data rows");

  const int first_day = std::max(1, days - window_days + 1);
  std::cout << "bus\timv_last" << window_days << "d\tdaily_cost_mean\n";
  for (int b = 1; b <= n_buses; ++b) {
    std::vector<double> prices;
    for (const auto& r : rows)
      if (r.bus == b && r.day >= first_day && r.valid)
        prices.push_back(r.lmp);
    const double v = prices.size() >= 2 ? metrics::imv(prices) : 0.0;
    double cost = 0.0;
    for (const auto& r : rows)
      if (r.bus == b && r.valid) cost += r.lmp * r.demand;
    std::cout << b << '\t' << io::format_double(v) << '\t'
              << io::format_double(cost / days) << '\n';
  }
  return 0;
}

int oracle_cmd(int instances, std::uint64_t seed, bool verbose) {
  double max_dg = 0.0, max_dlmp = 0.0;
  int infeasible = 0;
  for (int k = 0; k < instances; ++k) {
    auto s = rng::Stream::keyed(seed, rng::Purpose::kOracle,
                                static_cast<std::uint64_t>(k));
    const int n = 2 + static_cast<int>(s.uniform_index(3));  // 2..4 buses
    grid::Network net;
    net.n_buses = n;
    net.slack_bus = 0;
    for (int i = 0; i < n; ++i) {
      grid::GeneratorCost g;
      g.alpha = s.uniform(0.0118, 0.0684);
      g.beta = s.uniform(150.0, 233.0);
      g.gamma = 0.0;
      g.capacity = s.uniform(200.0, 600.0);
      net.generators.push_back(g);
    }
    // Random spanning tree plus optional extra edges, L <= 6.
    for (int i = 1; i < n; ++i) {
      grid::Line l;
      l.from = static_cast<int>(s.uniform_index(i));
      l.to = i;
      l.reactance = s.uniform(0.05, 0.4);
      l.capacity = s.uniform(60.0, 400.0);
      net.lines.push_back(l);
    }
    const int extra = static_cast<int>(s.uniform_index(3));
    for (int e = 0; e < extra && net.n_lines() < 6; ++e) {
      grid::Line l;
      l.from = static_cast<int>(s.uniform_index(n));
      l.to = static_cast<int>(s.uniform_index(n));
      if (l.from == l.to) continue;
      l.reactance = s.uniform(0.05, 0.4);
      l.capacity = s.uniform(60.0, 400.0);
      net.lines.push_back(l);
    }
    net.ptdf = grid::compute_ptdf(net.lines, n, 0);

    Eigen::VectorXd demand(n);
    for (int i = 0; i < n; ++i) demand(i) = s.uniform(10.0, 350.0);

    try {
      const auto a = dispatch::solve_ed(net, demand);
      const auto b = dispatch::brute_force_ed(net, demand);
      max_dg = std::max(max_dg, (a.g - b.g).cwiseAbs().maxCoeff());
      max_dlmp = std::max(max_dlmp, (a.lmp - b.lmp).cwiseAbs().maxCoeff());
      if (verbose)
        std::cout << "instance " << k << ": dg="
                  << io::format_double((a.g - b.g).cwiseAbs().maxCoeff())
                  << " dlmp="
                  << io::format_double((a.lmp - b.lmp).cwiseAbs().maxCoeff())
                  << '\n';
    } catch (const InfeasibleError&) {
      ++infeasible;  // both paths must agree; cross-checked in tests
    }
  }
  std::cout << "oracle cross-check: " << instances << " instances, "
            << infeasible << " infeasible, max |dg| = "
            << io::format_double(max_dg)
            << " MW, max |dLMP| = " << io::format_double(max_dlmp)
            << " $/MWh\n";
  if (max_dg > 1e-6 || max_dlmp > 1e-6) {
    std::cerr << "oracle mismatch above 1e-6\n";
    return 3;
  }
  return 0;
}

int sweep_cmd(CommonArgs args, int n_seeds, std::uint64_t base_seed,
              const std::vector<std::string>& modes, int jobs) {
  namespace fs = std::filesystem;
  struct Task {
    std::string mode;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& m : modes)
    for (int k = 0; k < n_seeds; ++k)
      tasks.push_back({m, base_seed + static_cast<std::uint64_t>(k)});

  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const Task& task = tasks[idx];
      try {
        CommonArgs local = args;
        local.overrides.mode = task.mode;
        local.overrides.seed = task.seed;
        io::Scenario sc = io::load_scenario(local.scenario, local.overrides);
        sim::SimulationLog log =
            sim::run_simulation(sc.network, sc.types, sc.config);
        const auto metrics_list = io::standard_metrics(log, sc.config.seed);
        const std::string dir = args.outdir + "/" + task.mode + "/seed" +
                                std::to_string(task.seed);
        io::emit_results(log, sc, metrics_list, dir);
      } catch (const std::exception& e) {
        std::cerr << "sweep task " << task.mode << " seed " << task.seed
                  << " failed: " << e.what() << '\n';
        ++failures;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failures > 0) throw SolverError("sweep: some runs failed");

  // Cross-seed comparison table from the per-run IMV summaries.
  std::ofstream cmp(args.outdir + "/sweep_summary.tsv");
  cmp << "mode\tseed\timv_bus3\tcost_last10d\tspread_bus3_last10d\n";
  for (const auto& task : tasks) {
    const std::string dir = args.outdir + "/" + task.mode + "/seed" +
                            std::to_string(task.seed);
    std::ifstream imv_in(dir + "/imv_summary.tsv");
    std::string line;
    std::getline(imv_in, line);
    double imv3 = 0.0;
    while (std::getline(imv_in, line)) {
      int bus;
      double v;
      long seed;
      if (std::sscanf(line.c_str(), "%d\t%lf\t%ld", &bus, &v, &seed) == 3 &&
          bus == 3)
        imv3 = v;
    }
    std::ifstream cost_in(dir + "/daily_cost.tsv");
    std::getline(cost_in, line);
    std::vector<double> costs;
    while (std::getline(cost_in, line)) {
      int day;
      double v;
      if (std::sscanf(line.c_str(), "%d\t%lf", &day, &v) == 2)
        costs.push_back(v);
    }
    double cost10 = 0.0;
    for (std::size_t d = costs.size() >= 10 ? costs.size() - 10 : 0;
         d < costs.size(); ++d)
      cost10 += costs[d];
    std::ifstream met_in(dir + "/metrics.tsv");
    std::getline(met_in, line);
    std::vector<double> spreads;
    while (std::getline(met_in, line)) {
      char name[128], unit[32], kind[16];
      long seed, index;
      double value;
      if (std::sscanf(line.c_str(), "%127[^\t]\t%31[^\t]\t%15[^\t]\t%ld\t%ld\t%lf",
                      name, unit, kind, &seed, &index, &value) == 6 &&
          std::string(name).rfind("daily_lmp_spread", 0) == 0)
        spreads.push_back(value);
    }
    double spread10 = 0.0;
    int cnt = 0;
    for (std::size_t d = spreads.size() >= 10 ? spreads.size() - 10 : 0;
         d < spreads.size(); ++d, ++cnt)
      spread10 += spreads[d];
    if (cnt > 0) spread10 /= cnt;
    cmp << task.mode << '\t' << task.seed << '\t' << io::format_double(imv3)
        << '\t' << io::format_double(cost10) << '\t'
        << io::format_double(spread10) << '\n';
  }
  std::cout << "sweep complete: " << tasks.size() << " runs, summary in "
            << args.outdir << "/sweep_summary.tsv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfgrid: wholesale market simulation with learning prosumers"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "simulate one scenario");
  add_common(run, run_args);

  CommonArgs val_args;
  auto* val = app.add_subcommand("validate", "load and validate a scenario");
  add_common(val, val_args);

  std::string metrics_dir = "out";
  int metrics_window = 10;
  auto* met = app.add_subcommand("metrics",
                                 "recompute metrics from a stored run");
  met->add_option("--run-dir", metrics_dir, "directory of a finished run");
  met->add_option("--window-days", metrics_window, "IMV window length");

  int oracle_n = 200;
  std::uint64_t oracle_seed = 7;
  bool oracle_verbose = false;
  auto* ora = app.add_subcommand(
      "oracle", "cross-check the dispatch solver against brute force");
  ora->add_option("--instances", oracle_n, "random instances");
  ora->add_option("--seed", oracle_seed, "instance seed");
  ora->add_flag("--verbose", oracle_verbose, "per-instance output");

  CommonArgs sweep_args;
  int sweep_seeds = 10;
  std::uint64_t sweep_base_seed = 1;
  std::vector<std::string> sweep_modes = {"mf-shock-info", "mf-no-shock-info",
                                          "no-learning"};
  int sweep_jobs = static_cast<int>(std::thread::hardware_concurrency());
  auto* swp = app.add_subcommand("sweep", "multi-seed batch across modes");
  add_common(swp, sweep_args);
  swp->add_option("--seeds", sweep_seeds, "number of seeds");
  swp->add_option("--base-seed", sweep_base_seed, "first seed");
  swp->add_option("--modes", sweep_modes, "modes to run");
  swp->add_option("--jobs", sweep_jobs, "concurrent runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      apply_thread_env(run_args.overrides);
      return run_one(run_args);
    }
    if (val->parsed()) return validate_cmd(val_args);
    if (met->parsed()) return metrics_cmd(metrics_dir, metrics_window);
    if (ora->parsed()) return oracle_cmd(oracle_n, oracle_seed, oracle_verbose);
    if (swp->parsed()) {
      apply_thread_env(sweep_args.overrides);
      return sweep_cmd(sweep_args, sweep_seeds, sweep_base_seed, sweep_modes,
                       std::max(1, sweep_jobs));
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const StructuralError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {  // solver / infeasible
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
