#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mfgrid/scenario.hpp"
#include "mfgrid/simulate.hpp"

namespace mfgrid::io {

// Named per-day or per-hour series with units, tagged by seed.
struct MetricSeries {
  std::string name;
  std::string unit;
  std::string index_kind;  // "day" or "hour"
  std::uint64_t seed = 0;
  std::vector<double> values;
};

struct RunManifest {
  nlohmann::json document;  // config echo, hashes, timestamps, file inventory
};

// Writes the delimited result tables and the manifest under outdir:
// market_hourly.tsv, belief_error.tsv, imv_summary.tsv, daily_cost.tsv,
// profiles.tsv, shocks.tsv, metrics.tsv, summary.json, manifest.json.
// Numbers are printed with 17 significant digits, locale-independent.
RunManifest emit_results(const sim::SimulationLog& log,
                         const Scenario& scenario,
                         const std::vector<MetricSeries>& metrics,
                         const std::string& outdir);

// Shortest-exact decimal formatting via std::to_chars (17 significant
// digits general format).
std::string format_double(double v);

std::uint64_t fnv1a_file(const std::string& path);

// Convenience: the standard metric series for one finished run (per-bus IMV
// inputs, daily cost, daily spread at a reference bus).
std::vector<MetricSeries> standard_metrics(const sim::SimulationLog& log,
                                           std::uint64_t seed,
                                           int window_days = 10,
                                           int reference_bus = 2);

}  // namespace mfgrid::io
