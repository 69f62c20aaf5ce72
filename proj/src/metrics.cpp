#include "mfgrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfgrid/battery.hpp"
#include "mfgrid/common.hpp"
#include "mfgrid/dispatch.hpp"

namespace mfgrid::metrics {

double imv(std::span<const double> prices) {
  if (prices.size() < 2)
    throw InputError("imv: need at least two prices");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < prices.size(); ++i)
    sum += std::abs(prices[i + 1] - prices[i]);
  return sum / static_cast<double>(prices.size() - 1);
}

std::vector<BeliefErrorEntry> belief_relative_error(
    std::span<const double> beliefs, std::span<const double> realized) {
  if (beliefs.size() != realized.size())
    throw InputError("belief_relative_error: series lengths differ");
  std::vector<BeliefErrorEntry> out(beliefs.size());
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    if (std::abs(realized[i]) < 1e-9) {
      out[i] = {std::abs(beliefs[i] - realized[i]), true};
    } else {
      out[i] = {std::abs(beliefs[i] - realized[i]) / std::abs(realized[i]),
                false};
    }
  }
  return out;
}

double daily_cost(const sim::SimulationLog& log, int day) {
  if (day < 0 || day >= log.days) throw InputError("daily_cost: day out of range");
  double sum = 0.0;
  for (int h = 0; h < log.hours_per_day; ++h) {
    const auto& rec = log.at(day, h);
    if (!rec.lmp_valid) continue;
    sum += rec.lmp.dot(rec.demand_mw);
  }
  return sum;
}

double peak_spread(std::span<const double> day_prices, int hours_per_day) {
  if (static_cast<int>(day_prices.size()) != hours_per_day)
    throw InputError("peak_spread: expected exactly one day of prices");
  const auto [lo, hi] = std::minmax_element(day_prices.begin(),
                                            day_prices.end());
  return *hi - *lo;
}

namespace {

// Discounted payoff of one policy for the probe over the replay window,
// with all other agents' bids frozen and dispatch re-solved hour by hour.
double replay_policy(const grid::Network& network,
                     const std::vector<prosumer::AgentType>& types,
                     const sim::SimulationLog& log,
                     const sim::ProbeTrace& probe,
                     const std::function<double(double, int)>* policy,
                     int start_day, int end_day, double discount) {
  const auto& type = types[probe.type_index];
  const int h_day = log.hours_per_day;
  double soc = probe.samples[static_cast<std::size_t>(start_day) * h_day].soc;
  double payoff = 0.0;
  double disc = 1.0;
  Eigen::VectorXd last_lmp;
  bool have_lmp = false;
  for (int day = start_day; day <= end_day; ++day) {
    for (int h = 0; h < h_day; ++h) {
      const int t = day * h_day + h;
      const auto& rec = log.records[t];
      const auto& sample = probe.samples[t];
      double action = 0.0;
      double bid = sample.q_mwh;
      if (policy == nullptr) {
        action = sample.action;
        bid = sample.bid_mwh;
        soc = sample.soc;  // keep the replay glued to the recorded path
      } else if (type.has_battery) {
        action = std::clamp((*policy)(soc, h), -soc, 1.0 - soc);
        bid = prosumer::make_bid(soc, action,
                                 sample.q_mwh / type.per_agent_capacity,
                                 type.per_agent_capacity, type.efficiency);
      }
      Eigen::VectorXd demand = rec.demand_mw;
      demand(probe.node) += bid - sample.bid_mwh;
      double price;
      try {
        price = dispatch::solve_ed(network, demand).lmp(probe.node);
        last_lmp = Eigen::VectorXd::Constant(1, price);
        have_lmp = true;
      } catch (const InfeasibleError&) {
        if (!have_lmp) {
          disc *= discount;
          continue;  // no price to settle against, mirror the live loop
        }
        price = last_lmp(0);
      }
      payoff += disc * (-price * bid);
      disc *= discount;
      soc = prosumer::soc_transition(soc, action);
    }
  }
  return payoff;
}

}  // namespace

DeviationReport deviation_gain(const grid::Network& network,
                               const std::vector<prosumer::AgentType>& types,
                               const sim::SimulationLog& log, int probe_index,
                               std::span<const CandidatePolicy> candidates,
                               int start_day, int end_day, double discount) {
  if (candidates.empty())
    throw InputError("deviation_gain: empty candidate set");
  if (probe_index < 0 || probe_index >= static_cast<int>(log.probes.size()))
    throw InputError("deviation_gain: probe index out of range");
  if (start_day < 0 || end_day >= log.days || start_day > end_day)
    throw InputError("deviation_gain: bad replay window");
  const auto& probe = log.probes[probe_index];

  DeviationReport report;
  report.realized_payoff = replay_policy(network, types, log, probe, nullptr,
                                         start_day, end_day, discount);
  report.best_candidate_payoff = -std::numeric_limits<double>::infinity();
  for (const auto& cand : candidates) {
    const double p = replay_policy(network, types, log, probe, &cand.action,
                                   start_day, end_day, discount);
    if (p > report.best_candidate_payoff) {
      report.best_candidate_payoff = p;
      report.best_name = cand.name;
    }
  }
  report.gain =
      std::max(0.0, report.best_candidate_payoff - report.realized_payoff);
  return report;
}

std::vector<CandidatePolicy> heuristic_candidates(
    const sim::SimulationLog& log, int probe_index, int count, int start_day,
    int end_day) {
  if (probe_index < 0 || probe_index >= static_cast<int>(log.probes.size()))
    throw InputError("heuristic_candidates: probe index out of range");
  const auto& probe = log.probes[probe_index];
  const int h_day = log.hours_per_day;

  // Mean realized price per hour of day at the probe's node over the window.
  std::vector<double> mean_price(h_day, 0.0);
  std::vector<int> n(h_day, 0);
  for (int day = start_day; day <= end_day; ++day) {
    for (int h = 0; h < h_day; ++h) {
      const auto& rec = log.at(day, h);
      if (!rec.lmp_valid) continue;
      mean_price[h] += rec.lmp(probe.node);
      ++n[h];
    }
  }
  for (int h = 0; h < h_day; ++h)
    if (n[h] > 0) mean_price[h] /= n[h];

  // Hours ranked by mean price (ties by hour index for determinism).
  std::vector<int> order(h_day);
  for (int h = 0; h < h_day; ++h) order[h] = h;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return mean_price[a] < mean_price[b];
  });

  std::vector<CandidatePolicy> out;
  // Constant-action policies, a in {-1, -0.9, ..., 1}.
  for (int k = -10; k <= 10 && static_cast<int>(out.size()) < count; ++k) {
    const double a = k / 10.0;
    out.push_back({"const_a=" + std::to_string(a),
                   [a](double, int) { return a; }});
  }
  // Threshold schedules: charge through the n cheapest hours, discharge
  // through the n dearest, at a fixed rate.
  const double rates[] = {0.25, 0.5, 1.0};
  for (int span = 2; static_cast<int>(out.size()) < count; ++span) {
    for (double rate : rates) {
      if (static_cast<int>(out.size()) >= count) break;
      std::vector<char> cheap(h_day, 0), dear(h_day, 0);
      for (int j = 0; j < span && j < h_day; ++j) {
        cheap[order[j]] = 1;
        dear[order[h_day - 1 - j]] = 1;
      }
      out.push_back({"sched_span=" + std::to_string(span) +
                         "_rate=" + std::to_string(rate),
                     [cheap, dear, rate](double, int h) {
                       if (cheap[h]) return rate;
                       if (dear[h]) return -rate;
                       return 0.0;
                     }});
    }
    if (span > h_day) break;
  }
  return out;
}

}  // namespace mfgrid::metrics
