#pragma once

namespace mfgrid::prosumer {

// Rate-dependent charge/discharge efficiency, linear in the rate.
// Requires alpha0 - alpha_c > 0 and alpha0 - alpha_d > 0 so efficiency stays
// positive over the whole action range.
struct EfficiencyParams {
  double alpha0 = 0.95;
  double alpha_c = 0.05;
  double alpha_d = 0.05;
};

// eta(a) = alpha0 + alpha_d*a for a < 0, alpha0 - alpha_c*a for a >= 0.
// Throws InputError outside |a| <= 1.
double efficiency(double a, const EfficiencyParams& params);

// Clipped state-of-charge transition max{min{e + a, 1}, 0}.
double soc_transition(double e, double a);

// Quantity bid in MWh (signed; negative sells). q is the net load as a
// fraction of the battery capacity; the battery term clamps the action to
// what the state of charge allows.
double make_bid(double e, double a, double q, double capacity,
                const EfficiencyParams& params);

// Per-unit-capacity stage payoff of acting at price p: sale revenue when
// discharging, purchase cost when charging. Strictly concave in a.
double reward_kernel(double a, double price, const EfficiencyParams& params);

}  // namespace mfgrid::prosumer
