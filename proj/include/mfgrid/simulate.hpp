#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mfgrid/dispatch.hpp"
#include "mfgrid/grid_model.hpp"
#include "mfgrid/prosumer.hpp"

namespace mfgrid::sim {

enum class Mode {
  kMfWithShockInfo,     // Algorithm with shock-specific belief sets
  kMfWithoutShockInfo,  // single belief set, no reaction to signals
  kNoLearningNoBattery  // grid-tied baseline: bid = net load
};

enum class ShockKind { kDemand, kSupply };

struct ShockModel {
  double rate_per_day = 0.1;  // Poisson arrival rate of events
  int first_hour = 0;         // 0-based, inclusive window bounds
  int last_hour = 0;
  double magnitude_lo = 0.0;  // triangular magnitude support
  double magnitude_mode = 0.0;
  double magnitude_hi = 0.0;
};

struct ShockEvent {
  ShockKind kind = ShockKind::kDemand;
  int day = 0;
  int first_hour = 0;
  int last_hour = 0;
  double magnitude = 0.0;
};

struct ScenarioConfig {
  Mode mode = Mode::kMfWithShockInfo;
  int days = 100;
  int hours_per_day = 24;
  int agents_per_node = 3000;
  std::uint64_t seed = 1;
  ShockModel demand_shock{0.1, 18, 20, 0.30, 0.40, 0.50};  // 6 PM - 9 PM
  ShockModel supply_shock{0.1, 1, 3, 0.20, 0.25, 0.30};    // 1 AM - 4 AM
  double regen_prob = 0.0001;  // per agent-hour
  double delta = 0.5;          // belief learning rate
  double discount = 0.999;     // per-hour discount factor
  int soc_grid = 100;
  int action_grid = 201;
  double vf_tol = 1e-4;        // Bellman tolerance used inside the loop
  double vf_drift_tol = 0.1;   // $/MWh belief drift before a recompute
  double weather_band = 0.05;  // +- band of the shared weather factor
  bool demand_shock_hits_prosumers = true;
  int threads = 1;
  int profile_soc_bins = 5;
  int profile_action_bins = 5;
  int probe_count = 5;
  bool capture_bids = false;  // per-agent bid capture for small test runs

  void validate(int n_buses) const;  // throws InputError
};

struct MarketRecord {
  int day = 0;
  int hour = 0;
  bool demand_shock = false;
  bool supply_shock = false;
  bool infeasible = false;         // dispatch failed; lmp carried forward
  bool lmp_valid = true;           // false only when no price exists yet
  bool assumption_breach = false;  // total net demand was not positive
  bool licq_violated = false;
  Eigen::VectorXd demand_mw;  // per-node aggregate bid
  Eigen::VectorXd lmp;        // per-node price used for settlement/learning
  double lambda = 0.0;
  double objective = 0.0;
};

struct ProfileCell {
  int type = 0;
  int hour = 0;
  int soc_bin = 0;
  int action_bin = 0;
  int count = 0;
};

struct ProbeSample {
  double q_mwh = 0.0;
  double bid_mwh = 0.0;
  double soc = 0.0;  // before the action
  double action = 0.0;
};

struct ProbeTrace {
  int type_index = 0;
  int agent_index = 0;
  int node = 0;
  std::vector<ProbeSample> samples;
};

struct SimulationLog {
  int days = 0;
  int hours_per_day = 0;
  int n_buses = 0;
  std::vector<MarketRecord> records;    // days * hours_per_day
  std::vector<ShockEvent> shocks;
  std::vector<double> daily_cost;       // $ per day, all agents
  std::vector<double> type_day_cost;    // type-major [type * days + day]
  std::vector<int> type_agent_count;
  int n_types = 0;
  // Pre-decision regular belief of the designated prosumer probe per bus,
  // flattened (day*H + hour) * n_buses + bus; empty in the no-learning mode.
  std::vector<double> probe_beliefs;
  std::vector<std::vector<ProfileCell>> daily_profiles;  // sparse, per day
  // Max-over-types total-variation distance between this day's and the
  // previous day's profile, per (day, hour); NaN for day 0.
  std::vector<double> tv_per_day_hour;
  std::vector<ProbeTrace> probes;
  std::vector<std::string> notices;
  std::vector<std::vector<double>> all_bids;  // only when capture_bids

  const MarketRecord& at(int day, int hour) const {
    return records[static_cast<std::size_t>(day) * hours_per_day + hour];
  }
};

// Poisson day arrivals per kind, full-window events, triangular magnitudes.
// Deterministic given the config seed.
std::vector<ShockEvent> generate_shocks(const ScenarioConfig& config);

// Demand shocks scale the draw by (1 + magnitude); supply shocks subtract
// magnitude times the reference demand level (a distributed-generation
// surge), which may push the net load negative.
double apply_shock(double q_mwh, const ShockEvent& event,
                   double demand_ref_mwh);

// Hourly market loop. Exposed as a class so tests can drive single hours
// and inspect agent state; run_simulation covers the common case.
class Simulation {
 public:
  Simulation(const grid::Network& network,
             std::vector<prosumer::AgentType> types, ScenarioConfig config);

  // Fixed phase order: decisions, bids, aggregation, dispatch, broadcast,
  // belief updates, SoC transitions, regeneration draws.
  void step_hour(int day, int hour);

  void run();  // all days * hours
  const SimulationLog& log() const { return log_; }
  SimulationLog&& take_log() { return std::move(log_); }

  const ScenarioConfig& config() const { return config_; }
  const std::vector<prosumer::AgentType>& types() const { return types_; }
  prosumer::AgentState& agent(int type_index, int agent_index);
  int belief_probe_type(int node) const;  // -1 when the node has none

 private:
  struct Decision {
    double q_mwh = 0.0;
    double action = 0.0;
    double bid_mwh = 0.0;
    double soc_before = 0.0;
  };

  void ensure_value_function(const prosumer::AgentType& type,
                             prosumer::AgentState& state);
  void decide_agent(int type_index, int agent_index, int day, int hour,
                    double demand_mult, double supply_mag);
  void learn_agent(int type_index, int agent_index, int day, int hour,
                   bool demand_flag, bool supply_flag, bool lmp_valid,
                   const Eigen::VectorXd& lmp);
  void finish_day(int day);

  const grid::Network& network_;
  std::vector<prosumer::AgentType> types_;
  ScenarioConfig config_;
  SimulationLog log_;
  std::vector<std::vector<prosumer::AgentState>> agents_;
  std::vector<std::vector<Decision>> decisions_;
  std::vector<double> demand_mult_;  // per (day*H + hour), 1 when unshocked
  std::vector<double> supply_mag_;   // per (day*H + hour), 0 when unshocked
  Eigen::VectorXd last_lmp_;
  bool have_lmp_ = false;
  std::vector<int> belief_probe_type_;  // per node
  std::vector<int> profile_today_;      // (type*H + hour) * bins + bin
  std::vector<int> profile_yesterday_;
  bool learning_ = false;
  bool with_info_ = false;
};

SimulationLog run_simulation(const grid::Network& network,
                             const std::vector<prosumer::AgentType>& types,
                             const ScenarioConfig& config);

// One (type, hour) histogram of (SoC, action) pairs. Bins cover
// [0,1] x [-1,1]; masses sum to 1 whenever any sample exists.
struct Histogram2D {
  int soc_bins = 0;
  int action_bins = 0;
  int samples = 0;
  std::vector<double> mass;  // soc-major
};

Histogram2D empirical_profile(
    const std::vector<std::pair<double, double>>& soc_action_pairs,
    int soc_bins, int action_bins);

// Total variation distance in [0, 1]; throws InputError on binning mismatch.
double profile_distance(const Histogram2D& p1, const Histogram2D& p2);

int profile_bin(double soc, double action, int soc_bins, int action_bins);

}  // namespace mfgrid::sim
