#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfgrid/common.hpp"
#include "mfgrid/metrics.hpp"

using namespace mfgrid;

namespace {

// Synthetic one-bus log with chosen prices and a single battery probe whose
// realized policy is idle.
struct Fixture {
  grid::Network net;
  std::vector<prosumer::AgentType> types;
  sim::SimulationLog log;
};

Fixture flat_price_fixture(int days, double load_mwh) {
  Fixture f;
  f.net.n_buses = 1;
  f.net.slack_bus = 0;
  f.net.generators = {{0.02, 150.0, 0.0, 2000.0}};
  f.net.ptdf.resize(0, 1);

  prosumer::AgentType t;
  t.id = 0;
  t.node = 0;
  t.der_owner = true;
  t.has_battery = true;
  t.agent_count = 1;
  t.capacity_total = 1.0;
  t.per_agent_capacity = 1.0;
  t.load_shape_mwh = std::vector<double>(24, load_mwh);
  t.daily_mean_load_mwh = load_mwh;
  f.types = {t};

  f.log.days = days;
  f.log.hours_per_day = 24;
  f.log.n_buses = 1;
  f.log.n_types = 1;
  f.log.type_agent_count = {1};
  sim::ProbeTrace probe;
  probe.type_index = 0;
  probe.agent_index = 0;
  probe.node = 0;
  for (int d = 0; d < days; ++d) {
    for (int h = 0; h < 24; ++h) {
      sim::MarketRecord rec;
      rec.day = d;
      rec.hour = h;
      rec.demand_mw = Eigen::VectorXd::Constant(1, load_mwh);
      const auto r = dispatch::solve_ed(f.net, rec.demand_mw);
      rec.lmp = r.lmp;
      rec.lambda = r.lambda;
      f.log.records.push_back(rec);
      probe.samples.push_back({load_mwh, load_mwh, 0.0, 0.0});
    }
    f.log.daily_cost.push_back(0.0);
  }
  f.log.probes = {probe};
  return f;
}

}  // namespace

TEST_CASE("imv: direct evaluation, constants, homogeneity, shift") {
  const std::vector<double> p{1.0, 3.0, 2.0};
  CHECK(metrics::imv(p) == doctest::Approx(1.5));
  CHECK(metrics::imv(std::vector<double>{5.0, 5.0, 5.0, 5.0}) == 0.0);
  CHECK_THROWS_AS(metrics::imv(std::vector<double>{1.0}), InputError);

  std::vector<double> q{4.0, 1.0, 7.0, 2.0, 2.5};
  const double base = metrics::imv(q);
  std::vector<double> scaled = q, shifted = q;
  for (auto& v : scaled) v *= 3.5;
  for (auto& v : shifted) v += 123.0;
  CHECK(metrics::imv(scaled) == doctest::Approx(3.5 * base).epsilon(1e-12));
  CHECK(metrics::imv(shifted) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("imv of pooled runs equals the mean of per-run imvs") {
  // Equal-length runs: the averaged IMV is the mean of individual IMVs.
  std::vector<double> run1{1.0, 2.0, 4.0};
  std::vector<double> run2{3.0, 1.0, 2.0};
  const double mean_imv = 0.5 * (metrics::imv(run1) + metrics::imv(run2));
  CHECK(mean_imv == doctest::Approx(0.5 * (1.5 + 1.5)));
}

TEST_CASE("belief relative error with near-zero guard") {
  const std::vector<double> beliefs{100.0, 110.0, 50.0};
  const std::vector<double> realized{100.0, 100.0, 0.0};
  const auto out = metrics::belief_relative_error(beliefs, realized);
  CHECK(out[0].error == 0.0);
  CHECK(out[1].error == doctest::Approx(0.10));
  CHECK_FALSE(out[1].flagged);
  CHECK(out[2].flagged);
}

TEST_CASE("daily cost: zero bids and a single settled megawatt-hour") {
  auto f = flat_price_fixture(1, 0.0);
  CHECK(metrics::daily_cost(f.log, 0) == 0.0);

  // One agent buying 1 MWh at LMP = 0.02*1 + 150 for a single hour.
  auto g = flat_price_fixture(1, 1.0);
  for (int h = 1; h < 24; ++h) {
    g.log.records[h].demand_mw.setZero();
    g.log.records[h].lmp.setZero();
  }
  CHECK(metrics::daily_cost(g.log, 0) ==
        doctest::Approx(0.02 * 1.0 + 150.0).epsilon(1e-12));
}

TEST_CASE("peak spread") {
  std::vector<double> flat(24, 100.0);
  CHECK(metrics::peak_spread(flat, 24) == 0.0);
  flat[23] = 150.0;
  CHECK(metrics::peak_spread(flat, 24) == 50.0);
  CHECK_THROWS_AS(metrics::peak_spread(std::vector<double>{1.0, 2.0}, 24),
                  InputError);
}

TEST_CASE("deviation gain: the realized policy itself gains nothing") {
  auto f = flat_price_fixture(3, 100.0);
  std::vector<metrics::CandidatePolicy> own{
      {"realized", [](double, int) { return 0.0; }}};
  const auto rep = metrics::deviation_gain(f.net, f.types, f.log, 0, own, 0,
                                           2, 0.99);
  CHECK(rep.gain == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.best_candidate_payoff ==
        doctest::Approx(rep.realized_payoff).epsilon(1e-12));
}

TEST_CASE("deviation gain: charge-shifting candidates lose at flat prices") {
  auto f = flat_price_fixture(3, 100.0);
  const auto candidates = metrics::heuristic_candidates(f.log, 0, 20, 0, 2);
  REQUIRE(candidates.size() == 20);
  const auto rep = metrics::deviation_gain(f.net, f.types, f.log, 0,
                                           candidates, 0, 2, 0.99);
  // Flat prices plus round-trip losses: every battery move costs money.
  CHECK(rep.best_candidate_payoff <= rep.realized_payoff + 1e-9);
  CHECK(rep.gain == 0.0);
}

TEST_CASE("deviation gain input validation") {
  auto f = flat_price_fixture(2, 10.0);
  std::vector<metrics::CandidatePolicy> empty;
  CHECK_THROWS_AS(
      metrics::deviation_gain(f.net, f.types, f.log, 0, empty, 0, 1, 0.99),
      InputError);
  std::vector<metrics::CandidatePolicy> one{
      {"hold", [](double, int) { return 0.0; }}};
  CHECK_THROWS_AS(
      metrics::deviation_gain(f.net, f.types, f.log, 5, one, 0, 1, 0.99),
      InputError);
  CHECK_THROWS_AS(
      metrics::deviation_gain(f.net, f.types, f.log, 0, one, 1, 5, 0.99),
      InputError);
}

TEST_CASE("heuristic candidates are deterministic and include schedules") {
  auto f = flat_price_fixture(2, 10.0);
  const auto a = metrics::heuristic_candidates(f.log, 0, 50, 0, 1);
  const auto b = metrics::heuristic_candidates(f.log, 0, 50, 0, 1);
  REQUIRE(a.size() == 50);
  REQUIRE(b.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].name == b[i].name);
  int schedules = 0;
  for (const auto& c : a)
    if (c.name.rfind("sched_", 0) == 0) ++schedules;
  CHECK(schedules >= 20);
}
