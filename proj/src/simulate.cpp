#include "mfgrid/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "mfgrid/common.hpp"

namespace mfgrid::sim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Static outputs land in per-index slots, so any schedule gives identical
// results; dynamic chunking only balances the value-function solves.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n < 2) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  const int grain = 8;
  auto worker = [&] {
    while (true) {
      const int begin = next.fetch_add(grain);
      if (begin >= n) return;
      const int end = std::min(begin + grain, n);
      for (int i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int t_count = std::min(threads, n);
  pool.reserve(t_count - 1);
  for (int t = 1; t < t_count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace

void ScenarioConfig::validate(int n_buses) const {
  if (days < 1) throw InputError("config: days must be >= 1");
  if (hours_per_day < 1) throw InputError("config: hours_per_day must be >= 1");
  if (agents_per_node < 1)
    throw InputError("config: agents_per_node must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw InputError("config: learning rate delta must lie in (0, 1)");
  if (!(discount > 0.0 && discount < 1.0))
    throw InputError("config: discount must lie in (0, 1)");
  if (soc_grid < 2) throw InputError("config: soc_grid must be >= 2");
  if (action_grid < 2) throw InputError("config: action_grid must be >= 2");
  if (!(regen_prob >= 0.0 && regen_prob <= 1.0))
    throw InputError("config: regen_prob must lie in [0, 1]");
  if (!(vf_tol > 0.0)) throw InputError("config: vf_tol must be positive");
  if (!(vf_drift_tol >= 0.0))
    throw InputError("config: vf_drift_tol must be >= 0");
  if (profile_soc_bins < 1 || profile_action_bins < 1)
    throw InputError("config: profile bins must be >= 1");
  auto check_window = [&](const ShockModel& m, const char* name) {
    if (m.rate_per_day < 0.0)
      throw InputError(std::string("config: ") + name + " rate must be >= 0");
    if (m.first_hour < 0 || m.last_hour >= hours_per_day ||
        m.first_hour > m.last_hour)
      throw InputError(std::string("config: ") + name +
                       " window outside the day");
    if (!(m.magnitude_lo <= m.magnitude_mode &&
          m.magnitude_mode <= m.magnitude_hi))
      throw InputError(std::string("config: ") + name +
                       " magnitude support is not ordered");
  };
  check_window(demand_shock, "demand_shock");
  check_window(supply_shock, "supply_shock");
  if (threads < 1) throw InputError("config: threads must be >= 1");
  (void)n_buses;
}

std::vector<ShockEvent> generate_shocks(const ScenarioConfig& config) {
  std::vector<ShockEvent> events;
  for (int day = 0; day < config.days; ++day) {
    auto arrivals = rng::Stream::keyed(config.seed, rng::Purpose::kShockArrival,
                                       static_cast<std::uint64_t>(day));
    auto magnitudes = rng::Stream::keyed(
        config.seed, rng::Purpose::kShockMagnitude,
        static_cast<std::uint64_t>(day));
    const int n_demand = arrivals.poisson(config.demand_shock.rate_per_day);
    const int n_supply = arrivals.poisson(config.supply_shock.rate_per_day);
    for (int k = 0; k < n_demand; ++k) {
      events.push_back({ShockKind::kDemand, day, config.demand_shock.first_hour,
                        config.demand_shock.last_hour,
                        magnitudes.triangular(config.demand_shock.magnitude_lo,
                                              config.demand_shock.magnitude_mode,
                                              config.demand_shock.magnitude_hi)});
    }
    for (int k = 0; k < n_supply; ++k) {
      events.push_back({ShockKind::kSupply, day, config.supply_shock.first_hour,
                        config.supply_shock.last_hour,
                        magnitudes.triangular(config.supply_shock.magnitude_lo,
                                              config.supply_shock.magnitude_mode,
                                              config.supply_shock.magnitude_hi)});
    }
  }
  return events;
}

double apply_shock(double q_mwh, const ShockEvent& event,
                   double demand_ref_mwh) {
  if (event.kind == ShockKind::kDemand) return q_mwh * (1.0 + event.magnitude);
  return q_mwh - event.magnitude * demand_ref_mwh;
}

int profile_bin(double soc, double action, int soc_bins, int action_bins) {
  int sb = static_cast<int>(soc * soc_bins);
  sb = std::clamp(sb, 0, soc_bins - 1);
  int ab = static_cast<int>((action + 1.0) * 0.5 * action_bins);
  ab = std::clamp(ab, 0, action_bins - 1);
  return sb * action_bins + ab;
}

Histogram2D empirical_profile(
    const std::vector<std::pair<double, double>>& soc_action_pairs,
    int soc_bins, int action_bins) {
  if (soc_action_pairs.empty())
    throw InputError("empirical_profile: no samples");
  Histogram2D h;
  h.soc_bins = soc_bins;
  h.action_bins = action_bins;
  h.samples = static_cast<int>(soc_action_pairs.size());
  h.mass.assign(static_cast<std::size_t>(soc_bins) * action_bins, 0.0);
  const double w = 1.0 / h.samples;
  for (const auto& [soc, action] : soc_action_pairs)
    h.mass[profile_bin(soc, action, soc_bins, action_bins)] += w;
  return h;
}

double profile_distance(const Histogram2D& p1, const Histogram2D& p2) {
  if (p1.soc_bins != p2.soc_bins || p1.action_bins != p2.action_bins)
    throw InputError("profile_distance: binning mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p1.mass.size(); ++i)
    sum += std::abs(p1.mass[i] - p2.mass[i]);
  return 0.5 * sum;
}

Simulation::Simulation(const grid::Network& network,
                       std::vector<prosumer::AgentType> types,
                       ScenarioConfig config)
    : network_(network), types_(std::move(types)), config_(std::move(config)) {
  config_.validate(network_.n_buses);
  const auto issues = grid::validate_network(network_);
  if (!issues.empty())
    throw InputError("simulation: invalid network: " + issues.front().rule +
                     " (" + issues.front().detail + ")");
  for (const auto& t : types_) {
    if (t.node < 0 || t.node >= network_.n_buses)
      throw InputError("simulation: type " + std::to_string(t.id) +
                       " references bus " + std::to_string(t.node + 1) +
                       " outside the network");
    if (static_cast<int>(t.load_shape_mwh.size()) != config_.hours_per_day)
      throw InputError("simulation: type " + std::to_string(t.id) +
                       " load shape length mismatch");
    if (t.has_battery && !(t.per_agent_capacity > 0.0))
      throw InputError("simulation: battery type with zero capacity");
  }

  learning_ = config_.mode != Mode::kNoLearningNoBattery;
  with_info_ = config_.mode == Mode::kMfWithShockInfo;

  const int h_day = config_.hours_per_day;
  const int n_types = static_cast<int>(types_.size());
  log_.days = config_.days;
  log_.hours_per_day = h_day;
  log_.n_buses = network_.n_buses;
  log_.n_types = n_types;
  log_.shocks = generate_shocks(config_);
  log_.daily_cost.assign(config_.days, 0.0);
  log_.type_day_cost.assign(static_cast<std::size_t>(n_types) * config_.days,
                            0.0);
  log_.type_agent_count.resize(n_types);
  for (int ti = 0; ti < n_types; ++ti)
    log_.type_agent_count[ti] = types_[ti].agent_count;
  log_.records.reserve(static_cast<std::size_t>(config_.days) * h_day);
  log_.tv_per_day_hour.assign(static_cast<std::size_t>(config_.days) * h_day,
                              kNaN);
  log_.daily_profiles.resize(config_.days);
  if (learning_)
    log_.probe_beliefs.assign(
        static_cast<std::size_t>(config_.days) * h_day * network_.n_buses,
        kNaN);

  const int total_hours = config_.days * h_day;
  demand_mult_.assign(total_hours, 1.0);
  supply_mag_.assign(total_hours, 0.0);
  for (const auto& ev : log_.shocks) {
    for (int h = ev.first_hour; h <= ev.last_hour; ++h) {
      const int t = ev.day * h_day + h;
      if (ev.kind == ShockKind::kDemand)
        demand_mult_[t] *= 1.0 + ev.magnitude;
      else
        supply_mag_[t] += ev.magnitude;
    }
  }

  // Agent states. The no-learning mode never touches beliefs or value
  // functions, so agents stay zero-initialized there.
  agents_.resize(n_types);
  decisions_.resize(n_types);
  for (int ti = 0; ti < n_types; ++ti) {
    agents_[ti].resize(types_[ti].agent_count);
    decisions_[ti].resize(types_[ti].agent_count);
    if (learning_ && types_[ti].has_battery) {
      for (int ai = 0; ai < types_[ti].agent_count; ++ai) {
        auto stream = rng::Stream::keyed(config_.seed, rng::Purpose::kAgentInit,
                                         static_cast<std::uint64_t>(ti),
                                         static_cast<std::uint64_t>(ai));
        prosumer::regenerate(agents_[ti][ai], types_[ti], h_day,
                             config_.soc_grid, stream);
      }
    }
  }

  belief_probe_type_.assign(network_.n_buses, -1);
  for (int ti = 0; ti < n_types; ++ti)
    if (types_[ti].has_battery && belief_probe_type_[types_[ti].node] < 0)
      belief_probe_type_[types_[ti].node] = ti;

  // Deviation probes: prosumer agents spread over the buses.
  for (int p = 0; p < config_.probe_count; ++p) {
    const int node = (2 + 3 * p) % network_.n_buses;
    const int ti = belief_probe_type_[node];
    if (ti < 0) continue;
    ProbeTrace trace;
    trace.type_index = ti;
    trace.agent_index = std::min(p, types_[ti].agent_count - 1);
    trace.node = node;
    trace.samples.reserve(total_hours);
    log_.probes.push_back(std::move(trace));
  }

  const std::size_t bins = static_cast<std::size_t>(config_.profile_soc_bins) *
                           config_.profile_action_bins;
  profile_today_.assign(static_cast<std::size_t>(n_types) * h_day * bins, 0);
  profile_yesterday_.assign(profile_today_.size(), 0);

  if (config_.capture_bids)
    log_.all_bids.resize(total_hours);
}

prosumer::AgentState& Simulation::agent(int type_index, int agent_index) {
  return agents_.at(type_index).at(agent_index);
}

int Simulation::belief_probe_type(int node) const {
  return belief_probe_type_.at(node);
}

void Simulation::ensure_value_function(const prosumer::AgentType& type,
                                       prosumer::AgentState& state) {
  bool stale = state.value_cache.empty();
  if (!stale) {
    double drift = 0.0;
    for (std::size_t h = 0; h < state.beliefs.size(); ++h)
      drift = std::max(drift,
                       std::abs(state.beliefs[h] - state.cache_beliefs[h]));
    stale = drift > config_.vf_drift_tol;
  }
  if (!stale) return;
  vf::SolveConfig sc;
  sc.action_points = config_.action_grid;
  sc.tolerance = config_.vf_tol;
  sc.accelerate = true;
  const vf::ValueFunction* warm =
      state.value_cache.empty() ? nullptr : &state.value_cache;
  state.value_cache = vf::solve_value_function(
      state.beliefs, type.efficiency, config_.discount, config_.soc_grid, sc,
      warm);
  state.cache_beliefs = state.beliefs;
}

void Simulation::decide_agent(int ti, int ai, int day, int hour,
                              double demand_mult, double supply_mag) {
  const prosumer::AgentType& type = types_[ti];
  prosumer::AgentState& st = agents_[ti][ai];
  Decision& d = decisions_[ti][ai];

  // Shared weather factor: every agent of the type derives the same value
  // from the same stream key.
  auto weather_stream = rng::Stream::keyed(
      config_.seed, rng::Purpose::kWeather, static_cast<std::uint64_t>(ti),
      static_cast<std::uint64_t>(day), static_cast<std::uint64_t>(hour));
  const double weather =
      weather_stream.uniform(1.0 - config_.weather_band,
                             1.0 + config_.weather_band);
  auto noise_stream = rng::Stream::keyed(
      config_.seed, rng::Purpose::kAgentNoise, static_cast<std::uint64_t>(ti),
      static_cast<std::uint64_t>(ai), static_cast<std::uint64_t>(day),
      static_cast<std::uint64_t>(hour));
  double q = prosumer::draw_net_load(type, hour, weather, noise_stream);

  // Shocks enter at the draw level so nodal aggregation inherits them. A
  // supply shock is a distributed-generation surge, so it lands on DER
  // owners in every mode; paired-seed runs then share the exogenous world.
  if (demand_mult != 1.0 &&
      (!type.der_owner || config_.demand_shock_hits_prosumers))
    q *= demand_mult;
  if (supply_mag != 0.0 && type.der_owner)
    q -= supply_mag * type.daily_mean_load_mwh;

  d.q_mwh = q;
  d.soc_before = st.soc;
  d.action = 0.0;
  d.bid_mwh = q;
  if (!learning_ || !type.has_battery) return;

  ensure_value_function(type, st);
  double price_now = st.beliefs[hour];
  if (with_info_ && demand_mult != 1.0)
    price_now = st.beliefs_ds[hour];
  else if (with_info_ && supply_mag != 0.0)
    price_now = st.beliefs_ss[hour];
  d.action = vf::optimal_action(st.value_cache, st.soc, hour, price_now,
                                type.efficiency);
  d.bid_mwh = prosumer::make_bid(st.soc, d.action,
                                 q / type.per_agent_capacity,
                                 type.per_agent_capacity, type.efficiency);
}

void Simulation::learn_agent(int ti, int ai, int day, int hour,
                             bool demand_flag, bool supply_flag,
                             bool lmp_valid, const Eigen::VectorXd& lmp) {
  const prosumer::AgentType& type = types_[ti];
  prosumer::AgentState& st = agents_[ti][ai];
  const Decision& d = decisions_[ti][ai];

  if (learning_ && type.has_battery) {
    if (lmp_valid) {
      const double observed = lmp(type.node);
      if (with_info_ && demand_flag)
        prosumer::update_shock_belief(st.beliefs_ds, hour, observed,
                                      config_.delta, st.tau_d);
      else if (with_info_ && supply_flag)
        prosumer::update_shock_belief(st.beliefs_ss, hour, observed,
                                      config_.delta, st.tau_s);
      else
        prosumer::update_belief(st.beliefs, hour, observed, config_.delta,
                                st.days_elapsed);
    }
    st.soc = prosumer::soc_transition(st.soc, d.action);
    auto regen_stream = rng::Stream::keyed(
        config_.seed, rng::Purpose::kRegen, static_cast<std::uint64_t>(ti),
        static_cast<std::uint64_t>(ai), static_cast<std::uint64_t>(day),
        static_cast<std::uint64_t>(hour));
    if (regen_stream.bernoulli(config_.regen_prob))
      prosumer::regenerate(st, type, config_.hours_per_day, config_.soc_grid,
                           regen_stream);
  }
}

void Simulation::step_hour(int day, int hour) {
  const int h_day = config_.hours_per_day;
  const int t = day * h_day + hour;
  const double demand_mult = demand_mult_[t];
  const double supply_mag = supply_mag_[t];
  const bool demand_flag = demand_mult != 1.0;
  const bool supply_flag = supply_mag != 0.0;
  const int n_types = static_cast<int>(types_.size());

  // Phases 1-2: per-agent decisions and bids.
  std::vector<std::pair<int, int>> flat;
  int total_agents = 0;
  for (int ti = 0; ti < n_types; ++ti) total_agents += types_[ti].agent_count;
  flat.reserve(total_agents);
  for (int ti = 0; ti < n_types; ++ti)
    for (int ai = 0; ai < types_[ti].agent_count; ++ai) flat.push_back({ti, ai});
  parallel_for(total_agents, config_.threads, [&](int idx) {
    decide_agent(flat[idx].first, flat[idx].second, day, hour, demand_mult,
                 supply_mag);
  });

  // Phase 3: nodal aggregation and population profile, fixed agent order.
  Eigen::VectorXd demand = Eigen::VectorXd::Zero(network_.n_buses);
  const int bins = config_.profile_soc_bins * config_.profile_action_bins;
  for (int ti = 0; ti < n_types; ++ti) {
    int* prof = profile_today_.data() +
                (static_cast<std::size_t>(ti) * h_day + hour) * bins;
    for (int ai = 0; ai < types_[ti].agent_count; ++ai) {
      const Decision& d = decisions_[ti][ai];
      demand(types_[ti].node) += d.bid_mwh;
      ++prof[profile_bin(d.soc_before, d.action, config_.profile_soc_bins,
                         config_.profile_action_bins)];
    }
  }
  if (config_.capture_bids) {
    auto& row = log_.all_bids[t];
    row.reserve(total_agents);
    for (int ti = 0; ti < n_types; ++ti)
      for (int ai = 0; ai < types_[ti].agent_count; ++ai)
        row.push_back(decisions_[ti][ai].bid_mwh);
  }

  // Phase 4: dispatch.
  MarketRecord rec;
  rec.day = day;
  rec.hour = hour;
  rec.demand_shock = demand_flag;
  rec.supply_shock = supply_flag;
  rec.demand_mw = demand;  // one-hour periods: MWh and MW coincide
  rec.assumption_breach = !(demand.sum() > 0.0);
  if (rec.assumption_breach)
    log_.notices.push_back("day " + std::to_string(day + 1) + " hour " +
                           std::to_string(hour + 1) +
                           ": total net demand not positive");
  try {
    const dispatch::DispatchResult r = dispatch::solve_ed(network_, demand);
    rec.lmp = r.lmp;
    rec.lambda = r.lambda;
    rec.objective = r.objective;
    rec.licq_violated = r.licq_violated;
    last_lmp_ = r.lmp;
    have_lmp_ = true;
  } catch (const InfeasibleError& e) {
    rec.infeasible = true;
    log_.notices.push_back("day " + std::to_string(day + 1) + " hour " +
                           std::to_string(hour + 1) +
                           ": dispatch infeasible; carrying previous LMP (" +
                           e.what() + ")");
    if (have_lmp_) {
      rec.lmp = last_lmp_;
    } else {
      rec.lmp = Eigen::VectorXd::Constant(network_.n_buses, kNaN);
      rec.lmp_valid = false;
    }
  }

  // Phase 5: broadcast bookkeeping (pre-update beliefs of the probes).
  if (learning_) {
    for (int node = 0; node < network_.n_buses; ++node) {
      const int ti = belief_probe_type_[node];
      if (ti < 0) continue;
      log_.probe_beliefs[static_cast<std::size_t>(t) * network_.n_buses +
                         node] = agents_[ti][0].beliefs[hour];
    }
  }

  // Phases 6-8: belief updates, SoC transitions, regeneration draws.
  parallel_for(total_agents, config_.threads, [&](int idx) {
    learn_agent(flat[idx].first, flat[idx].second, day, hour, demand_flag,
                supply_flag, rec.lmp_valid, rec.lmp);
  });

  // Settlement bookkeeping.
  if (rec.lmp_valid) {
    double hour_cost = 0.0;
    for (int ti = 0; ti < n_types; ++ti) {
      const double price = rec.lmp(types_[ti].node);
      double type_bid = 0.0;
      for (int ai = 0; ai < types_[ti].agent_count; ++ai)
        type_bid += decisions_[ti][ai].bid_mwh;
      const double c = price * type_bid;
      log_.type_day_cost[static_cast<std::size_t>(ti) * config_.days + day] +=
          c;
      hour_cost += c;
    }
    log_.daily_cost[day] += hour_cost;
  }
  for (auto& probe : log_.probes) {
    const Decision& d = decisions_[probe.type_index][probe.agent_index];
    probe.samples.push_back({d.q_mwh, d.bid_mwh, d.soc_before, d.action});
  }
  log_.records.push_back(std::move(rec));

  if (hour == h_day - 1) finish_day(day);
}

void Simulation::finish_day(int day) {
  const int h_day = config_.hours_per_day;
  const int n_types = static_cast<int>(types_.size());
  const int bins = config_.profile_soc_bins * config_.profile_action_bins;

  // Sparse profile snapshot and day-over-day total variation.
  auto& cells = log_.daily_profiles[day];
  for (int ti = 0; ti < n_types; ++ti) {
    for (int h = 0; h < h_day; ++h) {
      const int* today = profile_today_.data() +
                         (static_cast<std::size_t>(ti) * h_day + h) * bins;
      for (int b = 0; b < bins; ++b) {
        if (today[b] != 0)
          cells.push_back({ti, h, b / config_.profile_action_bins,
                           b % config_.profile_action_bins, today[b]});
      }
    }
  }
  if (day > 0) {
    for (int h = 0; h < h_day; ++h) {
      double worst = 0.0;
      for (int ti = 0; ti < n_types; ++ti) {
        const int* today = profile_today_.data() +
                           (static_cast<std::size_t>(ti) * h_day + h) * bins;
        const int* prev = profile_yesterday_.data() +
                          (static_cast<std::size_t>(ti) * h_day + h) * bins;
        const double inv = 1.0 / types_[ti].agent_count;
        double sum = 0.0;
        for (int b = 0; b < bins; ++b)
          sum += std::abs(today[b] - prev[b]) * inv;
        worst = std::max(worst, 0.5 * sum);
      }
      log_.tv_per_day_hour[static_cast<std::size_t>(day) * h_day + h] = worst;
    }
  }
  std::swap(profile_today_, profile_yesterday_);
  std::fill(profile_today_.begin(), profile_today_.end(), 0);

  // Advance each learning agent's day counter.
  if (learning_) {
    for (int ti = 0; ti < n_types; ++ti) {
      if (!types_[ti].has_battery) continue;
      for (auto& st : agents_[ti]) ++st.days_elapsed;
    }
  }
}

void Simulation::run() {
  for (int day = 0; day < config_.days; ++day)
    for (int hour = 0; hour < config_.hours_per_day; ++hour)
      step_hour(day, hour);
}

SimulationLog run_simulation(const grid::Network& network,
                             const std::vector<prosumer::AgentType>& types,
                             const ScenarioConfig& config) {
  Simulation s(network, types, config);
  s.run();
  return s.take_log();
}

}  // namespace mfgrid::sim
