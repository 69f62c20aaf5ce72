#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfgrid/grid_model.hpp"
#include "mfgrid/simulate.hpp"

namespace mfgrid::metrics {

// Incremental mean volatility: mean absolute successive difference of a
// price series. Throws InputError for series shorter than 2.
double imv(std::span<const double> prices);

struct BeliefErrorEntry {
  double error = 0.0;
  bool flagged = false;  // realized price too close to zero for a ratio
};

// Per-day relative error |P~ - P| / |P| between aligned belief and realized
// series; entries with |P| < 1e-9 are flagged instead of divided.
std::vector<BeliefErrorEntry> belief_relative_error(
    std::span<const double> beliefs, std::span<const double> realized);

// Settlement cost summed over all agents for one day: sum of LMP * bid.
double daily_cost(const sim::SimulationLog& log, int day);

// Max minus min over one day of prices; expects exactly hours_per_day values.
double peak_spread(std::span<const double> day_prices, int hours_per_day);

// A candidate policy maps (SoC, hour) to an action; the replay clamps it to
// the feasible interval.
struct CandidatePolicy {
  std::string name;
  std::function<double(double soc, int hour)> action;
};

struct DeviationReport {
  double realized_payoff = 0.0;       // discounted $, negative = net cost
  double best_candidate_payoff = 0.0; // best over the supplied candidates
  double gain = 0.0;                  // max(0, best - realized)
  std::string best_name;
};

// Replays a window of the horizon with one probe agent substituting each
// candidate policy while every other agent's bid stays frozen; dispatch is
// re-solved so the probe's finite-agent price impact is retained. The
// realized policy is always an implicit candidate, so gain >= 0.
DeviationReport deviation_gain(const grid::Network& network,
                               const std::vector<prosumer::AgentType>& types,
                               const sim::SimulationLog& log, int probe_index,
                               std::span<const CandidatePolicy> candidates,
                               int start_day, int end_day, double discount);

// Deterministic heuristic candidate set: constant actions plus
// charge/discharge schedules keyed to the probe node's realized price
// profile over the replay window.
std::vector<CandidatePolicy> heuristic_candidates(
    const sim::SimulationLog& log, int probe_index, int count, int start_day,
    int end_day);

}  // namespace mfgrid::metrics
