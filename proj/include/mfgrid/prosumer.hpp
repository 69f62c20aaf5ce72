#pragma once

#include <cstdint>
#include <vector>

#include "mfgrid/battery.hpp"
#include "mfgrid/rng.hpp"
#include "mfgrid/value_function.hpp"

namespace mfgrid::prosumer {

// Diminishing-step adaptive update of one belief slot:
// P~_h <- P~_h - delta * (day_index + 1)^{-1/2} (P~_h - observed).
void update_belief(std::vector<double>& beliefs, int hour, double observed,
                   double delta, long day_index);

// Same rule with a shock counter in place of the day index; the counter
// increments by exactly one per observation.
void update_shock_belief(std::vector<double>& beliefs, int hour,
                         double observed, double delta, long& counter);

// One population slice: agents of a type share location, capacity, load
// shape, noise and efficiency. Consumers are the degenerate case with zero
// battery capacity.
struct AgentType {
  int id = 0;
  int node = 0;
  bool der_owner = false;    // behind-the-meter solar/wind; net-load shape
  bool has_battery = false;  // false for consumers and grid-tied baselines
  double capacity_total = 0.0;  // MWh, aggregated over the type
  int agent_count = 0;
  double per_agent_capacity = 0.0;     // MWh
  std::vector<double> load_shape_mwh;  // expected net load per agent per hour
  double daily_mean_load_mwh = 0.0;    // per agent; supply-shock reference
  double noise_lo = 0.8;  // multiplicative triangular noise on the shape
  double noise_mode = 1.0;
  double noise_hi = 1.2;
  EfficiencyParams efficiency;
  double belief_init_lo = 0.0;  // $/MWh
  double belief_init_hi = 0.0;
};

struct AgentState {
  double soc = 0.0;
  std::vector<double> beliefs;     // regular LMP beliefs, one per hour
  std::vector<double> beliefs_ds;  // demand-shock beliefs
  std::vector<double> beliefs_ss;  // supply-shock beliefs
  long tau_d = 0;
  long tau_s = 0;
  long days_elapsed = 0;
  vf::ValueFunction value_cache;      // empty until first solve
  std::vector<double> cache_beliefs;  // belief vector the cache was solved for
};

// Net load draw Q = shape * weather * noise (MWh). weather_factor is shared
// by all agents of the type for the hour; the triangular noise is
// agent-specific, multiplicative on the shape value and mean-preserving.
double draw_net_load(const AgentType& type, int hour, double weather_factor,
                     rng::Stream& agent_stream);

// Fresh random state: SoC uniform on the grid, all three belief vectors
// redrawn, counters reset, value cache invalidated.
void regenerate(AgentState& state, const AgentType& type, int hours_per_day,
                int soc_grid_points, rng::Stream& stream);

}  // namespace mfgrid::prosumer
