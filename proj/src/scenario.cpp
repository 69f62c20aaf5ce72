#include "mfgrid/scenario.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfgrid/common.hpp"
#include "mfgrid/rng.hpp"

namespace mfgrid::io {

using nlohmann::json;

LoadShape parse_load_shape(std::istream& in, const std::string& source,
                           int hours_per_day) {
  LoadShape shape;
  shape.gross.assign(hours_per_day, std::nan(""));
  shape.net.assign(hours_per_day, std::nan(""));
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto pos = line.find('#'); pos != std::string::npos)
      line = line.substr(0, pos);
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      if (cells.size() != 3 || cells[0].find("hour") == std::string::npos)
        throw InputError(source + ":" + std::to_string(line_no) +
                         ": expected header hour,gross_load_fraction,"
                         "net_load_fraction");
      header_seen = true;
      continue;
    }
    if (cells.size() != 3)
      throw InputError(source + ":" + std::to_string(line_no) +
                       ": expected 3 comma-separated values");
    int hour;
    double gross, net;
    try {
      hour = std::stoi(cells[0]);
      gross = std::stod(cells[1]);
      net = std::stod(cells[2]);
    } catch (const std::exception&) {
      throw InputError(source + ":" + std::to_string(line_no) +
                       ": malformed numeric value");
    }
    if (hour < 1 || hour > hours_per_day)
      throw InputError(source + ":" + std::to_string(line_no) +
                       ": hour out of range 1.." +
                       std::to_string(hours_per_day));
    if (!std::isnan(shape.gross[hour - 1]))
      throw InputError(source + ":" + std::to_string(line_no) + ": hour " +
                       std::to_string(hour) + " appears twice");
    if (!std::isfinite(gross) || !std::isfinite(net))
      throw InputError(source + ":" + std::to_string(line_no) +
                       ": non-finite load fraction");
    shape.gross[hour - 1] = gross;
    shape.net[hour - 1] = net;
  }
  for (int h = 0; h < hours_per_day; ++h)
    if (std::isnan(shape.gross[h]))
      throw InputError(source + ": hour " + std::to_string(h + 1) +
                       " missing");
  double mean = 0.0;
  for (double g : shape.gross) mean += g;
  mean /= hours_per_day;
  if (std::abs(mean - 1.0) > 1e-6)
    throw InputError(source + ": gross load mean is " + std::to_string(mean) +
                     ", expected 1");
  return shape;
}

LoadShape load_load_shape(const std::string& path, int hours_per_day) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open load shape file: " + path);
  return parse_load_shape(in, path, hours_per_day);
}

std::string mode_name(sim::Mode mode) {
  switch (mode) {
    case sim::Mode::kMfWithShockInfo: return "mf-shock-info";
    case sim::Mode::kMfWithoutShockInfo: return "mf-no-shock-info";
    case sim::Mode::kNoLearningNoBattery: return "no-learning";
  }
  return "mf-shock-info";
}

sim::Mode mode_from_name(const std::string& name) {
  if (name == "mf-shock-info") return sim::Mode::kMfWithShockInfo;
  if (name == "mf-no-shock-info") return sim::Mode::kMfWithoutShockInfo;
  if (name == "no-learning") return sim::Mode::kNoLearningNoBattery;
  throw InputError("unknown mode '" + name +
                   "' (expected mf-shock-info, mf-no-shock-info or "
                   "no-learning)");
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (const char* env = std::getenv("MFGRID_DATA_DIR")) {
    const fs::path p = fs::path(env) / fs::path(path).filename();
    if (fs::exists(p)) return p.string();
    const fs::path q = fs::path(env) / path;
    if (fs::exists(q)) return q.string();
  }
#ifdef MFGRID_DATA_DIR_DEFAULT
  {
    const fs::path p =
        fs::path(MFGRID_DATA_DIR_DEFAULT) / fs::path(path).filename();
    if (fs::exists(p)) return p.string();
  }
#endif
  return path;  // let the open fail with the original name
}

namespace {

json preset_json(const std::string& name) {
  json base = {
      {"name", "ieee14-baseline"},
      {"network", "ieee14.net"},
      {"load_shape", "loadshape_synthetic.csv"},
      {"mode", "mf-shock-info"},
      {"days", 100},
      {"hours_per_day", 24},
      {"agents_per_node", 3000},
      {"seed", 1},
      {"system_mean_demand_mw", 3700.0},
      {"prosumer_demand_share", 0.35},
      {"battery_mwh_per_node", 250.0},
      {"prosumer_fraction", 0.5},
      {"belief_init_lo_frac", 0.5},
      {"belief_init_hi_frac", 1.5},
      {"delta", 0.5},
      {"discount", 0.999},
      {"regen_prob", 0.0001},
      {"soc_grid", 100},
      {"action_grid", 201},
      {"vf_tol", 1e-4},
      {"vf_drift_tol", 0.1},
      {"weather_band", 0.05},
      {"demand_shock_hits_prosumers", true},
      {"threads", 1},
      {"profile_soc_bins", 5},
      {"profile_action_bins", 5},
      {"probe_count", 5},
      {"efficiency",
       {{"alpha0", 0.95}, {"alpha_c", 0.05}, {"alpha_d", 0.05}}},
      {"demand_shock",
       {{"rate_per_day", 0.1},
        {"first_hour", 19},
        {"last_hour", 21},
        {"magnitude_lo", 0.30},
        {"magnitude_mode", 0.40},
        {"magnitude_hi", 0.50}}},
      {"supply_shock",
       {{"rate_per_day", 0.1},
        {"first_hour", 2},
        {"last_hour", 4},
        {"magnitude_lo", 0.20},
        {"magnitude_mode", 0.25},
        {"magnitude_hi", 0.30}}},
  };
  auto desk = [&](const std::string& mode) {
    json j = base;
    j["name"] = "desk-" + mode;
    j["mode"] = mode;
    j["agents_per_node"] = 200;
    j["days"] = 60;
    // Desk-scale runtime knobs: coarser action grid and looser recompute
    // thresholds, small against the $/MWh scale of the price signal.
    j["action_grid"] = 51;
    j["vf_tol"] = 0.5;
    j["vf_drift_tol"] = 1.0;
    return j;
  };
  if (name == "ieee14-baseline") return base;
  for (const char* mode :
       {"mf-shock-info", "mf-no-shock-info", "no-learning"}) {
    if (name == mode) {
      json j = base;
      j["name"] = name;
      j["mode"] = mode;
      return j;
    }
    if (name == std::string("desk-") + mode) return desk(mode);
  }
  throw InputError("unknown scenario preset '" + name + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError("scenario key '" + key + "': " + e.what());
  }
}

sim::ShockModel shock_from_json(const json& j, const sim::ShockModel& def) {
  sim::ShockModel m = def;
  m.rate_per_day = get_or(j, "rate_per_day", m.rate_per_day);
  // File hours are 1-based.
  m.first_hour = get_or(j, "first_hour", m.first_hour + 1) - 1;
  m.last_hour = get_or(j, "last_hour", m.last_hour + 1) - 1;
  m.magnitude_lo = get_or(j, "magnitude_lo", m.magnitude_lo);
  m.magnitude_mode = get_or(j, "magnitude_mode", m.magnitude_mode);
  m.magnitude_hi = get_or(j, "magnitude_hi", m.magnitude_hi);
  return m;
}

json shock_to_json(const sim::ShockModel& m) {
  return {{"rate_per_day", m.rate_per_day}, {"first_hour", m.first_hour + 1},
          {"last_hour", m.last_hour + 1},  {"magnitude_lo", m.magnitude_lo},
          {"magnitude_mode", m.magnitude_mode},
          {"magnitude_hi", m.magnitude_hi}};
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"ieee14-baseline",  "mf-shock-info",      "mf-no-shock-info",
          "no-learning",      "desk-mf-shock-info", "desk-mf-no-shock-info",
          "desk-no-learning"};
}

Scenario load_scenario_from_json(const json& j, const Overrides& ov) {
  Scenario sc;
  sc.name = get_or<std::string>(j, "name", "unnamed");
  sc.network_path = ov.network_path.value_or(
      get_or<std::string>(j, "network", "ieee14.net"));
  sc.load_shape_path = ov.load_shape_path.value_or(
      get_or<std::string>(j, "load_shape", "loadshape_synthetic.csv"));

  sim::ScenarioConfig& cfg = sc.config;
  cfg.mode = mode_from_name(
      ov.mode.value_or(get_or<std::string>(j, "mode", "mf-shock-info")));
  cfg.days = ov.days.value_or(get_or(j, "days", cfg.days));
  cfg.hours_per_day = get_or(j, "hours_per_day", cfg.hours_per_day);
  cfg.agents_per_node =
      ov.agents_per_node.value_or(get_or(j, "agents_per_node",
                                         cfg.agents_per_node));
  cfg.seed = ov.seed.value_or(
      get_or<std::uint64_t>(j, "seed", cfg.seed));
  cfg.delta = ov.delta.value_or(get_or(j, "delta", cfg.delta));
  cfg.discount = ov.discount.value_or(get_or(j, "discount", cfg.discount));
  cfg.regen_prob = get_or(j, "regen_prob", cfg.regen_prob);
  cfg.soc_grid = ov.soc_grid.value_or(get_or(j, "soc_grid", cfg.soc_grid));
  cfg.action_grid =
      ov.action_grid.value_or(get_or(j, "action_grid", cfg.action_grid));
  cfg.vf_tol = ov.vf_tol.value_or(get_or(j, "vf_tol", cfg.vf_tol));
  cfg.vf_drift_tol =
      ov.vf_drift_tol.value_or(get_or(j, "vf_drift_tol", cfg.vf_drift_tol));
  cfg.weather_band = get_or(j, "weather_band", cfg.weather_band);
  cfg.demand_shock_hits_prosumers = get_or(
      j, "demand_shock_hits_prosumers", cfg.demand_shock_hits_prosumers);
  cfg.threads = ov.threads.value_or(get_or(j, "threads", cfg.threads));
  cfg.profile_soc_bins = get_or(j, "profile_soc_bins", cfg.profile_soc_bins);
  cfg.profile_action_bins =
      get_or(j, "profile_action_bins", cfg.profile_action_bins);
  cfg.probe_count = get_or(j, "probe_count", cfg.probe_count);
  if (j.contains("demand_shock"))
    cfg.demand_shock = shock_from_json(j.at("demand_shock"), cfg.demand_shock);
  if (j.contains("supply_shock"))
    cfg.supply_shock = shock_from_json(j.at("supply_shock"), cfg.supply_shock);

  sc.system_mean_demand_mw =
      get_or(j, "system_mean_demand_mw", sc.system_mean_demand_mw);
  sc.prosumer_demand_share =
      get_or(j, "prosumer_demand_share", sc.prosumer_demand_share);
  sc.battery_mwh_per_node =
      get_or(j, "battery_mwh_per_node", sc.battery_mwh_per_node);
  sc.prosumer_fraction = get_or(j, "prosumer_fraction", sc.prosumer_fraction);
  sc.belief_init_lo_frac =
      get_or(j, "belief_init_lo_frac", sc.belief_init_lo_frac);
  sc.belief_init_hi_frac =
      get_or(j, "belief_init_hi_frac", sc.belief_init_hi_frac);

  prosumer::EfficiencyParams eff;
  if (j.contains("efficiency")) {
    const json& e = j.at("efficiency");
    eff.alpha0 = get_or(e, "alpha0", eff.alpha0);
    eff.alpha_c = get_or(e, "alpha_c", eff.alpha_c);
    eff.alpha_d = get_or(e, "alpha_d", eff.alpha_d);
  }
  if (!(eff.alpha0 > 0.0 && eff.alpha0 < 1.0 &&
        eff.alpha0 - eff.alpha_c > 0.0 && eff.alpha0 - eff.alpha_d > 0.0))
    throw InputError("scenario: efficiency parameters violate positivity");

  if (!(sc.prosumer_fraction >= 0.0 && sc.prosumer_fraction <= 1.0))
    throw InputError("scenario: prosumer_fraction must lie in [0, 1]");
  if (!(sc.prosumer_demand_share >= 0.0 && sc.prosumer_demand_share <= 1.0))
    throw InputError("scenario: prosumer_demand_share must lie in [0, 1]");
  if (!(sc.system_mean_demand_mw > 0.0))
    throw InputError("scenario: system_mean_demand_mw must be positive");
  if (!(sc.battery_mwh_per_node >= 0.0))
    throw InputError("scenario: battery_mwh_per_node must be >= 0");
  if (!(sc.belief_init_lo_frac > 0.0 &&
        sc.belief_init_hi_frac > sc.belief_init_lo_frac))
    throw InputError("scenario: belief init range is not ordered");

  sc.network = grid::load_network(resolve_data_path(sc.network_path),
                                  &sc.warnings);
  const auto issues = grid::validate_network(sc.network);
  if (!issues.empty()) {
    std::string msg = "scenario: network invalid:";
    for (const auto& i : issues) msg += " [" + i.rule + ": " + i.detail + "]";
    throw InputError(msg);
  }
  sc.load_shape = load_load_shape(resolve_data_path(sc.load_shape_path),
                                  cfg.hours_per_day);

  // Population assembly: one consumer and one prosumer type per bus, the
  // node scaling factor drawn once per bus from the scenario seed.
  const int n = sc.network.n_buses;
  const double mean_beta = sc.network.mean_beta();
  const int prosumers = static_cast<int>(
      std::lround(cfg.agents_per_node * sc.prosumer_fraction));
  const int consumers = cfg.agents_per_node - prosumers;
  for (int node = 0; node < n; ++node) {
    auto scale_stream = rng::Stream::keyed(cfg.seed, rng::Purpose::kBusScale,
                                           static_cast<std::uint64_t>(node));
    const double scale = scale_stream.uniform(0.9, 1.1);
    const double node_mean_mw = sc.system_mean_demand_mw * scale / n;

    auto make_type = [&](bool der, int count,
                         const std::vector<double>& curve, double share) {
      prosumer::AgentType t;
      t.id = static_cast<int>(sc.types.size());
      t.node = node;
      t.agent_count = count;
      t.der_owner = der;
      t.has_battery = der && cfg.mode != sim::Mode::kNoLearningNoBattery &&
                      sc.battery_mwh_per_node > 0.0;
      t.capacity_total = t.has_battery ? sc.battery_mwh_per_node : 0.0;
      t.per_agent_capacity =
          t.has_battery ? t.capacity_total / count : 0.0;
      t.load_shape_mwh.resize(cfg.hours_per_day);
      double daily = 0.0;
      for (int h = 0; h < cfg.hours_per_day; ++h) {
        t.load_shape_mwh[h] = share * node_mean_mw * curve[h] / count;
        daily += t.load_shape_mwh[h];
      }
      t.daily_mean_load_mwh = daily / cfg.hours_per_day;
      t.efficiency = eff;
      t.belief_init_lo = sc.belief_init_lo_frac * mean_beta;
      t.belief_init_hi = sc.belief_init_hi_frac * mean_beta;
      return t;
    };
    if (consumers > 0)
      sc.types.push_back(make_type(false, consumers, sc.load_shape.gross,
                                   1.0 - sc.prosumer_demand_share));
    if (prosumers > 0)
      sc.types.push_back(make_type(true, prosumers, sc.load_shape.net,
                                   sc.prosumer_demand_share));
  }
  cfg.validate(n);
  return sc;
}

Scenario load_scenario(const std::string& name_or_path, const Overrides& ov) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return load_scenario_from_json(preset_json(name_or_path), ov);
  std::ifstream in(name_or_path);
  if (!in)
    throw InputError("scenario '" + name_or_path +
                     "' is neither a preset nor a readable file");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);  // allow comments
  } catch (const json::exception& e) {
    throw InputError(name_or_path + ": " + e.what());
  }
  return load_scenario_from_json(j, ov);
}

json scenario_echo(const Scenario& sc) {
  json j = {
      {"name", sc.name},
      {"network", sc.network_path},
      {"load_shape", sc.load_shape_path},
      {"mode", mode_name(sc.config.mode)},
      {"days", sc.config.days},
      {"hours_per_day", sc.config.hours_per_day},
      {"agents_per_node", sc.config.agents_per_node},
      {"seed", sc.config.seed},
      {"system_mean_demand_mw", sc.system_mean_demand_mw},
      {"prosumer_demand_share", sc.prosumer_demand_share},
      {"battery_mwh_per_node", sc.battery_mwh_per_node},
      {"prosumer_fraction", sc.prosumer_fraction},
      {"belief_init_lo_frac", sc.belief_init_lo_frac},
      {"belief_init_hi_frac", sc.belief_init_hi_frac},
      {"delta", sc.config.delta},
      {"discount", sc.config.discount},
      {"regen_prob", sc.config.regen_prob},
      {"soc_grid", sc.config.soc_grid},
      {"action_grid", sc.config.action_grid},
      {"vf_tol", sc.config.vf_tol},
      {"vf_drift_tol", sc.config.vf_drift_tol},
      {"weather_band", sc.config.weather_band},
      {"demand_shock_hits_prosumers",
       sc.config.demand_shock_hits_prosumers},
      // threads is an execution knob, not scenario semantics: results are
      // identical at any worker count, and echoed files must be too.
      {"profile_soc_bins", sc.config.profile_soc_bins},
      {"profile_action_bins", sc.config.profile_action_bins},
      {"probe_count", sc.config.probe_count},
      {"demand_shock", shock_to_json(sc.config.demand_shock)},
      {"supply_shock", shock_to_json(sc.config.supply_shock)},
  };
  if (!sc.types.empty()) {
    j["efficiency"] = {{"alpha0", sc.types.front().efficiency.alpha0},
                       {"alpha_c", sc.types.front().efficiency.alpha_c},
                       {"alpha_d", sc.types.front().efficiency.alpha_d}};
  }
  return j;
}

}  // namespace mfgrid::io
