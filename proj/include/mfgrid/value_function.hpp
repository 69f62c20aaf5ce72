#pragma once

#include <cstdint>
#include <vector>

#include "mfgrid/battery.hpp"

namespace mfgrid::vf {

// Expected discounted value per unit of battery capacity, tabulated over
// (hour of day x SoC grid point) for one belief vector. Hour H wraps to 1.
struct ValueFunction {
  int soc_points = 0;
  int hours = 0;
  int action_points = 0;
  double discount = 0.0;
  std::vector<double> values;          // hours x soc_points, hour-major
  std::vector<std::uint16_t> policy;   // greedy action index, for warm starts

  // Diagnostics from the solve that produced the table.
  std::vector<double> sweep_residuals;  // sup-norm change per VI sweep
  double bellman_residual = 0.0;        // final synchronous residual
  int policy_iterations = 0;

  bool empty() const { return values.empty(); }
  double value(int hour, int soc_index) const {
    return values[static_cast<std::size_t>(hour) * soc_points + soc_index];
  }
};

struct SolveConfig {
  int action_points = 201;
  double tolerance = 1e-6;  // Bellman residual, $ per unit capacity
  int max_sweeps = 500000;
  // Policy-iteration fast path before the value-iteration polish. Both
  // paths land on the same fixed point; pure VI is kept for the contraction
  // diagnostics.
  bool accelerate = true;
};

// Value-iteration fixed point of the cyclic-day Bellman equation. Actions
// are searched on a uniform grid over [-e, 1-e]; the landing SoC snaps to
// the nearest grid point. Throws InputError on non-finite beliefs or
// malformed sizes.
ValueFunction solve_value_function(const std::vector<double>& beliefs,
                                   const prosumer::EfficiencyParams& eff,
                                   double discount, int soc_points,
                                   const SolveConfig& config,
                                   const ValueFunction* warm_start = nullptr);

// One-step lookahead on the action grid: maximizes
// reward_kernel(a, price_now) + beta * V_{h+1}(e + a). price_now is the
// hour's belief, or a shock belief substituted for it. Ties break toward
// the smallest |a|, then toward discharge. Result lies in [-e, 1-e].
double optimal_action(const ValueFunction& vf, double e, int hour,
                      double price_now, const prosumer::EfficiencyParams& eff);

}  // namespace mfgrid::vf
