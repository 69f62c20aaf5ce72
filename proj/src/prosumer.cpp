#include "mfgrid/prosumer.hpp"

#include <algorithm>
#include <cmath>

#include "mfgrid/common.hpp"

namespace mfgrid::prosumer {

double efficiency(double a, const EfficiencyParams& p) {
  if (!(std::abs(a) <= 1.0))
    throw InputError("efficiency: action must lie in [-1, 1]");
  return a < 0.0 ? p.alpha0 + p.alpha_d * a : p.alpha0 - p.alpha_c * a;
}

double soc_transition(double e, double a) {
  return std::max(std::min(e + a, 1.0), 0.0);
}

double make_bid(double e, double a, double q, double capacity,
                const EfficiencyParams& p) {
  const double base = q * capacity;
  if (a < 0.0) {
    const double flow = std::max(-e, a);  // fraction actually discharged
    return base + efficiency(a, p) * capacity * flow;
  }
  const double flow = std::min(1.0 - e, a);  // fraction actually charged
  return base + capacity * flow / efficiency(a, p);
}

double reward_kernel(double a, double price, const EfficiencyParams& p) {
  if (a < 0.0) return -(p.alpha0 + p.alpha_d * a) * a * price;
  return -a * price / (p.alpha0 - p.alpha_c * a);
}

namespace {

double step_size(double delta, long count) {
  return delta / std::sqrt(static_cast<double>(count + 1));
}

}  // namespace

void update_belief(std::vector<double>& beliefs, int hour, double observed,
                   double delta, long day_index) {
  auto& slot = beliefs.at(static_cast<std::size_t>(hour));
  slot -= step_size(delta, day_index) * (slot - observed);
}

void update_shock_belief(std::vector<double>& beliefs, int hour,
                         double observed, double delta, long& counter) {
  auto& slot = beliefs.at(static_cast<std::size_t>(hour));
  slot -= step_size(delta, counter) * (slot - observed);
  ++counter;
}

double draw_net_load(const AgentType& type, int hour, double weather_factor,
                     rng::Stream& agent_stream) {
  const double omega = type.load_shape_mwh.at(static_cast<std::size_t>(hour)) *
                       weather_factor;
  const double noise =
      agent_stream.triangular(type.noise_lo, type.noise_mode, type.noise_hi);
  return omega * noise;
}

void regenerate(AgentState& state, const AgentType& type, int hours_per_day,
                int soc_grid_points, rng::Stream& stream) {
  const int idx =
      std::min<int>(static_cast<int>(stream.uniform_index(soc_grid_points)),
                    soc_grid_points - 1);
  state.soc = soc_grid_points > 1
                  ? static_cast<double>(idx) / (soc_grid_points - 1)
                  : 0.0;
  auto redraw = [&](std::vector<double>& v) {
    v.resize(hours_per_day);
    for (auto& p : v)
      p = stream.uniform(type.belief_init_lo, type.belief_init_hi);
  };
  redraw(state.beliefs);
  redraw(state.beliefs_ds);
  redraw(state.beliefs_ss);
  state.tau_d = 0;
  state.tau_s = 0;
  state.days_elapsed = 0;
  state.value_cache = vf::ValueFunction{};
  state.cache_beliefs.clear();
}

}  // namespace mfgrid::prosumer
