#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mfgrid/grid_model.hpp"
#include "mfgrid/prosumer.hpp"
#include "mfgrid/simulate.hpp"

namespace mfgrid::io {

// Daily per-hour load fractions; the gross curve is normalized so its daily
// mean is 1, the net curve subtracts behind-the-meter solar.
struct LoadShape {
  std::vector<double> gross;
  std::vector<double> net;
};

LoadShape parse_load_shape(std::istream& in, const std::string& source_name,
                           int hours_per_day = 24);
LoadShape load_load_shape(const std::string& path, int hours_per_day = 24);

// Fully resolved scenario: network, agent population and loop config, plus
// the assembly parameters needed to reproduce it.
struct Scenario {
  std::string name;
  std::string network_path;
  std::string load_shape_path;
  grid::Network network;
  LoadShape load_shape;
  std::vector<prosumer::AgentType> types;
  sim::ScenarioConfig config;

  // Population assembly knobs (echoed into the manifest).
  double system_mean_demand_mw = 3700.0;
  double prosumer_demand_share = 0.35;
  double battery_mwh_per_node = 250.0;
  double prosumer_fraction = 0.5;      // share of each node's agents
  double belief_init_lo_frac = 0.5;    // x mean generator beta
  double belief_init_hi_frac = 1.5;

  std::vector<std::string> warnings;
};

// Command-line overrides applied on top of a preset or scenario file.
struct Overrides {
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> days;
  std::optional<int> agents_per_node;
  std::optional<int> threads;
  std::optional<double> discount;
  std::optional<double> delta;
  std::optional<double> vf_tol;
  std::optional<double> vf_drift_tol;
  std::optional<int> action_grid;
  std::optional<int> soc_grid;
  std::optional<std::string> network_path;
  std::optional<std::string> load_shape_path;
};

std::vector<std::string> preset_names();

// Accepts a built-in preset name or a path to a scenario JSON file.
// Validates everything and resolves all defaults; throws InputError with
// location context on any problem.
Scenario load_scenario(const std::string& name_or_path,
                       const Overrides& overrides);

// Lossless config echo; load_scenario_from_json(echo) reproduces an
// equivalent scenario.
nlohmann::json scenario_echo(const Scenario& scenario);
Scenario load_scenario_from_json(const nlohmann::json& j,
                                 const Overrides& overrides);

std::string mode_name(sim::Mode mode);
sim::Mode mode_from_name(const std::string& name);

// Data files resolve against the working directory first, then
// $MFGRID_DATA_DIR, then the compiled-in source data directory.
std::string resolve_data_path(const std::string& path);

}  // namespace mfgrid::io
