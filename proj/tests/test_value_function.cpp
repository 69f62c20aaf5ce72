#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mfgrid/common.hpp"
#include "mfgrid/value_function.hpp"

using namespace mfgrid;
using prosumer::EfficiencyParams;

namespace {

double kernel_ref(double a, double price, const EfficiencyParams& p) {
  const double eta =
      a < 0 ? p.alpha0 + p.alpha_d * a : p.alpha0 - p.alpha_c * a;
  return a < 0 ? -eta * a * price : -a * price / eta;
}

// Finite-horizon backward induction over `days` whole days with terminal
// value zero: an independent rollout oracle for the cyclic solver.
struct Rollout {
  std::vector<std::vector<double>> v;       // per step, per grid point
  std::vector<std::vector<double>> action;  // optimal action per step/state
};

Rollout rollout_oracle(const std::vector<double>& beliefs,
                       const EfficiencyParams& eff, double discount,
                       int soc_points, int action_points, int days) {
  const int hours = static_cast<int>(beliefs.size());
  const int steps = days * hours;
  Rollout r;
  r.v.assign(steps + 1, std::vector<double>(soc_points, 0.0));
  r.action.assign(steps, std::vector<double>(soc_points, 0.0));
  for (int t = steps - 1; t >= 0; --t) {
    const int h = t % hours;
    for (int i = 0; i < soc_points; ++i) {
      const double e = static_cast<double>(i) / (soc_points - 1);
      double best = -1e300;
      double best_a = 0.0;
      for (int k = 0; k < action_points; ++k) {
        const double landing = static_cast<double>(k) / (action_points - 1);
        const double a = landing - e;
        const int j = static_cast<int>(std::lround(landing * (soc_points - 1)));
        const double val =
            kernel_ref(a, beliefs[h], eff) + discount * r.v[t + 1][j];
        if (val > best) {
          best = val;
          best_a = a;
        }
      }
      r.v[t][i] = best;
      r.action[t][i] = best_a;
    }
  }
  return r;
}

}  // namespace

TEST_CASE("flat positive beliefs: idle is optimal at empty charge") {
  const std::vector<double> beliefs(24, 120.0);
  EfficiencyParams eff;
  vf::SolveConfig cfg;
  cfg.action_points = 51;
  cfg.tolerance = 1e-8;
  const auto v = vf::solve_value_function(beliefs, eff, 0.95, 50, cfg);

  // Round-trip losses make arbitrage at one flat price unprofitable, so the
  // 3-day rollout oracle never moves from an empty battery either.
  const auto oracle = rollout_oracle(beliefs, eff, 0.95, 50, 51, 3);
  for (int h = 0; h < 24; ++h) {
    CHECK(oracle.action[h][0] == 0.0);
    CHECK(vf::optimal_action(v, 0.0, h, beliefs[h], eff) == 0.0);
  }
  CHECK(v.value(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("discount to zero: table collapses to the myopic maximum") {
  std::vector<double> beliefs(24);
  for (int h = 0; h < 24; ++h) beliefs[h] = 40.0 + 10.0 * (h % 5);
  EfficiencyParams eff;
  vf::SolveConfig cfg;
  cfg.action_points = 101;
  cfg.tolerance = 1e-10;
  const double beta = 1e-6;
  const auto v = vf::solve_value_function(beliefs, eff, beta, 40, cfg);

  double max_belief = 0.0;
  for (double b : beliefs) max_belief = std::max(max_belief, std::abs(b));
  for (int h = 0; h < 24; ++h) {
    for (int i = 0; i < 40; ++i) {
      const double e = static_cast<double>(i) / 39.0;
      double myopic = -1e300;
      for (int k = 0; k < 101; ++k) {
        const double a = static_cast<double>(k) / 100.0 - e;
        myopic = std::max(myopic, kernel_ref(a, beliefs[h], eff));
      }
      CHECK(std::abs(v.value(h, i) - myopic) < 1e-4 * max_belief);
    }
  }
}

TEST_CASE("value is nondecreasing in stored energy at positive prices") {
  std::vector<double> beliefs(24);
  for (int h = 0; h < 24; ++h)
    beliefs[h] = 150.0 + 60.0 * std::sin(h * 0.26);
  EfficiencyParams eff;
  vf::SolveConfig cfg;
  cfg.tolerance = 1e-8;
  const auto v = vf::solve_value_function(beliefs, eff, 0.999, 100, cfg);
  for (int h = 0; h < 24; ++h)
    for (int i = 0; i + 1 < 100; ++i)
      CHECK(v.value(h, i + 1) >= v.value(h, i) - 1e-9);
}

TEST_CASE("pure value iteration contracts by at most the discount factor") {
  std::vector<double> beliefs(24);
  for (int h = 0; h < 24; ++h) beliefs[h] = 100.0 + 5.0 * h;
  EfficiencyParams eff;
  vf::SolveConfig cfg;
  cfg.accelerate = false;
  cfg.tolerance = 1e-6;
  cfg.action_points = 51;
  for (double beta : {0.8, 0.95}) {
    const auto v = vf::solve_value_function(beliefs, eff, beta, 30, cfg);
    REQUIRE(v.sweep_residuals.size() >= 2);
    for (std::size_t k = 1; k < v.sweep_residuals.size(); ++k) {
      if (v.sweep_residuals[k - 1] == 0.0) break;
      CHECK(v.sweep_residuals[k] <=
            (beta + 1e-12) * v.sweep_residuals[k - 1]);
    }
    CHECK(v.bellman_residual <= 1e-6);
  }
}

TEST_CASE("policy-iteration fast path and pure sweeps agree") {
  std::vector<double> beliefs(24);
  for (int h = 0; h < 24; ++h)
    beliefs[h] = 180.0 + 40.0 * std::cos(0.3 * h) + 3.0 * (h % 3);
  EfficiencyParams eff;
  vf::SolveConfig fast, slow;
  fast.tolerance = slow.tolerance = 1e-9;
  fast.action_points = slow.action_points = 101;
  slow.accelerate = false;
  const double beta = 0.95;
  const auto a = vf::solve_value_function(beliefs, eff, beta, 60, fast);
  const auto b = vf::solve_value_function(beliefs, eff, beta, 60, slow);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
  CHECK(diff < 1e-6);
}

TEST_CASE("optimal actions match an exhaustive grid search with ties") {
  std::vector<double> beliefs(24, 50.0);
  beliefs[3] = 300.0;  // strict daily peak
  EfficiencyParams eff;
  vf::SolveConfig cfg;
  cfg.tolerance = 1e-8;
  const auto v = vf::solve_value_function(beliefs, eff, 0.999, 100, cfg);

  auto exhaustive = [&](double e, int h, double price) {
    double best = -1e300, best_a = 0.0;
    for (int k = 0; k < v.action_points; ++k) {
      const double landing =
          static_cast<double>(k) / (v.action_points - 1);
      const double a = landing - e;
      const int j = std::lround(landing * (v.soc_points - 1));
      const double val =
          kernel_ref(a, price, eff) +
          v.discount * v.value((h + 1) % 24, j);
      bool take = val > best;
      if (val == best) {
        take = std::abs(a) < std::abs(best_a) ||
               (std::abs(a) == std::abs(best_a) && a < best_a);
      }
      if (take) {
        best = val;
        best_a = a;
      }
    }
    return best_a;
  };

  // Full battery at the strict peak: discharge.
  const double a_full = vf::optimal_action(v, 1.0, 3, beliefs[3], eff);
  CHECK(a_full < 0.0);
  CHECK(a_full == exhaustive(1.0, 3, beliefs[3]));
  // Empty battery at the peak: nothing to sell, charging is suboptimal.
  const double a_empty = vf::optimal_action(v, 0.0, 3, beliefs[3], eff);
  CHECK(a_empty == 0.0);
  // Feasibility of the returned action everywhere.
  for (double e : {0.0, 0.17, 0.5, 0.83, 1.0}) {
    for (int h = 0; h < 24; h += 5) {
      const double a = vf::optimal_action(v, e, h, beliefs[h], eff);
      CHECK(a >= -e - 1e-15);
      CHECK(a <= 1.0 - e + 1e-15);
      CHECK(a == exhaustive(e, h, beliefs[h]));
    }
  }
}

TEST_CASE("input validation") {
  EfficiencyParams eff;
  vf::SolveConfig cfg;
  std::vector<double> bad(24, 100.0);
  bad[5] = std::nan("");
  CHECK_THROWS_AS(vf::solve_value_function(bad, eff, 0.95, 50, cfg),
                  InputError);
  std::vector<double> ok(24, 100.0);
  CHECK_THROWS_AS(vf::solve_value_function(ok, eff, 1.0, 50, cfg),
                  InputError);
  CHECK_THROWS_AS(vf::solve_value_function(ok, eff, 0.95, 1, cfg),
                  InputError);
  EfficiencyParams broken{0.5, 0.6, 0.1};
  CHECK_THROWS_AS(vf::solve_value_function(ok, broken, 0.95, 50, cfg),
                  InputError);
}
