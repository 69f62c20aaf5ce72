#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mfgrid/common.hpp"
#include "mfgrid/scenario.hpp"
#include "mfgrid/simulate.hpp"

using namespace mfgrid;

namespace {

grid::Network small_net() {
  grid::Network net;
  net.n_buses = 2;
  net.slack_bus = 1;
  net.lines = {{0, 1, 0.1, 1000.0}};
  net.generators = {{0.02, 150.0, 0.0, 600.0}, {0.05, 200.0, 0.0, 600.0}};
  net.ptdf = grid::compute_ptdf(net.lines, 2, 1);
  return net;
}

prosumer::AgentType flat_type(int id, int node, int count, bool battery,
                              double load_mwh) {
  prosumer::AgentType t;
  t.id = id;
  t.node = node;
  t.der_owner = battery;
  t.has_battery = battery;
  t.agent_count = count;
  t.capacity_total = battery ? count * 1.0 : 0.0;
  t.per_agent_capacity = battery ? 1.0 : 0.0;
  t.load_shape_mwh = std::vector<double>(24, load_mwh);
  t.daily_mean_load_mwh = load_mwh;
  t.noise_lo = t.noise_mode = t.noise_hi = 1.0;  // deterministic loads
  t.belief_init_lo = 100.0;
  t.belief_init_hi = 300.0;
  return t;
}

sim::ScenarioConfig quiet_config(sim::Mode mode, int days) {
  sim::ScenarioConfig c;
  c.mode = mode;
  c.days = days;
  c.agents_per_node = 4;
  c.seed = 42;
  c.demand_shock.rate_per_day = 0.0;
  c.supply_shock.rate_per_day = 0.0;
  c.regen_prob = 0.0;
  c.weather_band = 0.0;
  c.soc_grid = 20;
  c.action_grid = 21;
  c.vf_tol = 1e-4;
  c.vf_drift_tol = 0.5;
  c.threads = 1;
  c.probe_count = 2;
  return c;
}

}  // namespace

TEST_CASE("shock generation: zero rate means no events") {
  auto cfg = quiet_config(sim::Mode::kNoLearningNoBattery, 100);
  CHECK(sim::generate_shocks(cfg).empty());
}

TEST_CASE("shock generation: Poisson day counts and triangular supports") {
  sim::ScenarioConfig cfg;
  cfg.days = 10000;
  cfg.seed = 5;
  const auto events = sim::generate_shocks(cfg);
  long demand_count = 0, supply_count = 0;
  for (const auto& ev : events) {
    if (ev.kind == sim::ShockKind::kDemand) {
      ++demand_count;
      CHECK(ev.first_hour == 18);
      CHECK(ev.last_hour == 20);
      CHECK(ev.magnitude >= 0.30);
      CHECK(ev.magnitude <= 0.50);
    } else {
      ++supply_count;
      CHECK(ev.first_hour == 1);
      CHECK(ev.last_hour == 3);
      CHECK(ev.magnitude >= 0.20);
      CHECK(ev.magnitude <= 0.30);
    }
    CHECK(ev.day >= 0);
    CHECK(ev.day < 10000);
  }
  // Rate 0.1/day over 1e4 days: expect about 1e3 per kind within 3 sigma.
  CHECK(std::abs(demand_count - 1000.0) < 3.0 * std::sqrt(1000.0));
  CHECK(std::abs(supply_count - 1000.0) < 3.0 * std::sqrt(1000.0));
}

TEST_CASE("apply_shock arithmetic") {
  sim::ShockEvent none{sim::ShockKind::kDemand, 0, 18, 20, 0.0};
  CHECK(sim::apply_shock(0.2, none, 1.0) == 0.2);
  sim::ShockEvent demand{sim::ShockKind::kDemand, 0, 18, 20, 0.40};
  CHECK(sim::apply_shock(0.2, demand, 1.0) == doctest::Approx(0.28));
  sim::ShockEvent supply{sim::ShockKind::kSupply, 0, 1, 3, 0.25};
  CHECK(sim::apply_shock(0.2, supply, 1.0) == doctest::Approx(-0.05));
}

TEST_CASE("grid-tied baseline: every bid equals the drawn net load") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {
      flat_type(0, 0, 4, false, 50.0), flat_type(1, 1, 4, true, 40.0)};
  types[1].has_battery = false;  // no-learning mode strips batteries
  auto cfg = quiet_config(sim::Mode::kNoLearningNoBattery, 2);
  cfg.capture_bids = true;
  const auto log = sim::run_simulation(net, types, cfg);

  for (const auto& rec : log.records) {
    CHECK(rec.demand_mw(0) == doctest::Approx(4 * 50.0).epsilon(1e-12));
    CHECK(rec.demand_mw(1) == doctest::Approx(4 * 40.0).epsilon(1e-12));
  }
  for (const auto& row : log.all_bids) {
    REQUIRE(row.size() == 8);
    for (int i = 0; i < 4; ++i) CHECK(row[i] == doctest::Approx(50.0));
    for (int i = 4; i < 8; ++i) CHECK(row[i] == doctest::Approx(40.0));
  }
}

TEST_CASE("stationary input gives an identical LMP every hour") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {flat_type(0, 0, 1, false, 80.0)};
  auto cfg = quiet_config(sim::Mode::kNoLearningNoBattery, 2);
  const auto log = sim::run_simulation(net, types, cfg);
  const double first = log.records.front().lmp(0);
  for (const auto& rec : log.records) {
    CHECK(rec.lmp(0) == first);
    CHECK(rec.lmp(0) == rec.lmp(1));  // uncongested: one uniform price
  }
}

TEST_CASE("aggregation identity: nodal demand is the sum of agent bids") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {
      flat_type(0, 0, 3, false, 60.0), flat_type(1, 1, 5, true, 30.0)};
  auto cfg = quiet_config(sim::Mode::kMfWithShockInfo, 2);
  cfg.capture_bids = true;
  auto cfg2 = cfg;
  cfg2.weather_band = 0.05;  // exercise the random path too
  for (const auto& c : {cfg, cfg2}) {
    const auto log = sim::run_simulation(net, types, c);
    for (std::size_t t = 0; t < log.records.size(); ++t) {
      const auto& row = log.all_bids[t];
      const double bus0 = std::accumulate(row.begin(), row.begin() + 3, 0.0);
      const double bus1 = std::accumulate(row.begin() + 3, row.end(), 0.0);
      CHECK(log.records[t].demand_mw(0) ==
            doctest::Approx(bus0).epsilon(1e-12));
      CHECK(log.records[t].demand_mw(1) ==
            doctest::Approx(bus1).epsilon(1e-12));
    }
  }
}

TEST_CASE("bid-minus-load equals the efficiency-adjusted battery flow") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {
      flat_type(0, 0, 2, false, 60.0), flat_type(1, 1, 2, true, 30.0)};
  auto cfg = quiet_config(sim::Mode::kMfWithShockInfo, 3);
  sim::Simulation s(net, types, cfg);
  s.run();
  const auto& log = s.log();
  const auto& eff = types[1].efficiency;
  for (const auto& probe : log.probes) {
    const auto& type = types[probe.type_index];
    if (!type.has_battery) continue;
    for (const auto& sample : probe.samples) {
      const double battery = sample.bid_mwh - sample.q_mwh;
      const double a = sample.action;
      double want = 0.0;
      if (a < 0)
        want = prosumer::efficiency(a, eff) * type.per_agent_capacity *
               std::max(-sample.soc, a);
      else
        want = type.per_agent_capacity * std::min(1.0 - sample.soc, a) /
               prosumer::efficiency(a, eff);
      CHECK(battery == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("signaled demand shock with trained shock beliefs cuts net demand") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {
      flat_type(0, 0, 2, false, 60.0), flat_type(1, 1, 6, true, 30.0)};
  auto cfg = quiet_config(sim::Mode::kMfWithShockInfo, 1);
  cfg.demand_shock.rate_per_day = 0.7;

  // Pick a seed whose day 0 carries exactly one demand event, then compare
  // with-info against without-info on that seed with engineered states:
  // full batteries and a demand-shock belief far above the regular one.
  bool found = false;
  for (std::uint64_t seed = 1; seed < 100 && !found; ++seed) {
    cfg.seed = seed;
    int day0_events = 0;
    for (const auto& ev : sim::generate_shocks(cfg))
      if (ev.day == 0 && ev.kind == sim::ShockKind::kDemand) ++day0_events;
    found = day0_events == 1;
  }
  REQUIRE(found);

  auto cfg_plain = cfg;
  cfg_plain.mode = sim::Mode::kMfWithoutShockInfo;
  sim::Simulation with_info(net, types, cfg);
  sim::Simulation no_info(net, types, cfg_plain);
  for (auto* s : {&with_info, &no_info}) {
    for (int h = 0; h < 19; ++h) s->step_hour(0, h);
    for (int ai = 0; ai < 6; ++ai) {
      auto& st = s->agent(1, ai);
      st.soc = 1.0;
      st.value_cache = vf::ValueFunction{};
      std::fill(st.beliefs_ds.begin(), st.beliefs_ds.end(), 1000.0);
      std::fill(st.beliefs.begin(), st.beliefs.end(), 180.0);
    }
    s->step_hour(0, 19);  // inside the 6-9 PM window
  }
  const auto& rec_info = with_info.log().at(0, 19);
  const auto& rec_plain = no_info.log().at(0, 19);
  REQUIRE(rec_info.demand_shock);
  REQUIRE(rec_plain.demand_shock);
  // With-info agents see P~DS = 1000 and dump their batteries, so the
  // aggregate at their bus sits strictly below the no-info counterfactual.
  CHECK(rec_info.demand_mw(1) < rec_plain.demand_mw(1) - 1e-9);
}

TEST_CASE("population profile histograms and distances behave") {
  std::vector<std::pair<double, double>> all_idle(5, {0.0, 0.0});
  const auto h1 = sim::empirical_profile(all_idle, 10, 11);
  double total = 0.0;
  for (double m : h1.mass) total += m;
  CHECK(total == doctest::Approx(1.0));
  CHECK(h1.mass[sim::profile_bin(0.0, 0.0, 10, 11)] == doctest::Approx(1.0));

  std::vector<std::pair<double, double>> all_full(5, {1.0, 1.0});
  const auto h2 = sim::empirical_profile(all_full, 10, 11);
  CHECK(sim::profile_distance(h1, h2) == doctest::Approx(1.0));
  CHECK(sim::profile_distance(h1, h1) == 0.0);
  CHECK(sim::profile_distance(h1, h2) ==
        doctest::Approx(sim::profile_distance(h2, h1)));

  const auto h3 = sim::empirical_profile(all_idle, 9, 11);
  CHECK_THROWS_AS(sim::profile_distance(h1, h3), InputError);
  CHECK_THROWS_AS(sim::empirical_profile({}, 10, 11), InputError);
}

TEST_CASE("mode isolation: the baseline never initializes beliefs") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {flat_type(0, 0, 2, true, 30.0)};
  types[0].has_battery = false;
  auto cfg = quiet_config(sim::Mode::kNoLearningNoBattery, 1);
  sim::Simulation s(net, types, cfg);
  s.run();
  CHECK(s.agent(0, 0).beliefs.empty());
  CHECK(s.agent(0, 1).value_cache.empty());
  CHECK(s.log().probe_beliefs.empty());
}

TEST_CASE("identical config and seed reproduce the log bit for bit") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {
      flat_type(0, 0, 3, false, 60.0), flat_type(1, 1, 3, true, 30.0)};
  auto cfg = quiet_config(sim::Mode::kMfWithShockInfo, 2);
  cfg.weather_band = 0.05;
  cfg.regen_prob = 0.01;
  cfg.demand_shock.rate_per_day = 0.3;
  const auto a = sim::run_simulation(net, types, cfg);
  const auto b = sim::run_simulation(net, types, cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    CHECK((a.records[t].demand_mw.array() ==
           b.records[t].demand_mw.array()).all());
    CHECK((a.records[t].lmp.array() == b.records[t].lmp.array()).all());
  }
  CHECK(a.daily_cost == b.daily_cost);
  REQUIRE(a.probe_beliefs.size() == b.probe_beliefs.size());
  for (std::size_t i = 0; i < a.probe_beliefs.size(); ++i) {
    if (std::isnan(a.probe_beliefs[i]))
      CHECK(std::isnan(b.probe_beliefs[i]));  // buses without a prosumer
    else
      CHECK(a.probe_beliefs[i] == b.probe_beliefs[i]);
  }
}

TEST_CASE("thread count does not change the results") {
  const auto net = small_net();
  std::vector<prosumer::AgentType> types = {
      flat_type(0, 0, 5, false, 60.0), flat_type(1, 1, 5, true, 30.0)};
  auto cfg = quiet_config(sim::Mode::kMfWithShockInfo, 2);
  cfg.weather_band = 0.05;
  const auto a = sim::run_simulation(net, types, cfg);
  cfg.threads = 4;
  const auto b = sim::run_simulation(net, types, cfg);
  for (std::size_t t = 0; t < a.records.size(); ++t) {
    CHECK((a.records[t].demand_mw.array() ==
           b.records[t].demand_mw.array()).all());
    CHECK((a.records[t].lmp.array() == b.records[t].lmp.array()).all());
  }
}

TEST_CASE("config validation rejects malformed windows and rates") {
  auto cfg = quiet_config(sim::Mode::kMfWithShockInfo, 1);
  cfg.demand_shock.first_hour = 22;
  cfg.demand_shock.last_hour = 25;
  CHECK_THROWS_AS(cfg.validate(2), InputError);
  cfg = quiet_config(sim::Mode::kMfWithShockInfo, 0);
  CHECK_THROWS_AS(cfg.validate(2), InputError);
  cfg = quiet_config(sim::Mode::kMfWithShockInfo, 1);
  cfg.delta = 1.5;
  CHECK_THROWS_AS(cfg.validate(2), InputError);
}
