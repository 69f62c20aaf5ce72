#include "mfgrid/results.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mfgrid/common.hpp"
#include "mfgrid/metrics.hpp"

namespace mfgrid::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("fnv1a_file: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 15];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  return h;
}

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

class TableWriter {
 public:
  TableWriter(const std::filesystem::path& path) : path_(path.string()) {
    out_.open(path);
    if (!out_) throw IoError("cannot open for writing: " + path_);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << '\t';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw IoError("write failure: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

std::string fmt_int(long v) { return std::to_string(v); }

}  // namespace

std::vector<MetricSeries> standard_metrics(const sim::SimulationLog& log,
                                           std::uint64_t seed,
                                           int window_days,
                                           int reference_bus) {
  std::vector<MetricSeries> out;
  if (log.records.empty()) return out;
  const int h_day = log.hours_per_day;
  const int bus = std::min(reference_bus, log.n_buses - 1);

  MetricSeries cost{"daily_cost_total", "$", "day", seed, log.daily_cost};
  out.push_back(std::move(cost));

  MetricSeries spread{"daily_lmp_spread_bus" + std::to_string(bus + 1),
                      "$/MWh", "day", seed, {}};
  std::vector<double> day_prices(h_day);
  for (int d = 0; d < log.days; ++d) {
    for (int h = 0; h < h_day; ++h) day_prices[h] = log.at(d, h).lmp(bus);
    spread.values.push_back(
        metrics::peak_spread(day_prices, h_day));
  }
  out.push_back(std::move(spread));

  const int first_day = std::max(0, log.days - window_days);
  MetricSeries imv_series{"imv_last" + std::to_string(window_days) +
                              "d_per_bus",
                          "$/MWh", "hour", seed, {}};
  for (int b = 0; b < log.n_buses; ++b) {
    std::vector<double> prices;
    prices.reserve(static_cast<std::size_t>(log.days - first_day) * h_day);
    for (int d = first_day; d < log.days; ++d)
      for (int h = 0; h < h_day; ++h)
        if (log.at(d, h).lmp_valid) prices.push_back(log.at(d, h).lmp(b));
    imv_series.values.push_back(
        prices.size() >= 2 ? metrics::imv(prices) : 0.0);
  }
  out.push_back(std::move(imv_series));
  return out;
}

RunManifest emit_results(const sim::SimulationLog& log,
                         const Scenario& scenario,
                         const std::vector<MetricSeries>& metrics_list,
                         const std::string& outdir) {
  namespace fs = std::filesystem;
  const std::string started = timestamp_utc();
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create output directory " + outdir + ": " +
                        ec.message());
  const fs::path base(outdir);
  std::vector<std::string> files;

  {
    TableWriter t(base / "market_hourly.tsv");
    t.row({"day", "hour", "bus", "demand_mw", "lmp", "lambda", "demand_shock",
           "supply_shock", "infeasible", "lmp_valid", "assumption_breach",
           "licq_violated"});
    for (const auto& rec : log.records) {
      for (int b = 0; b < log.n_buses; ++b) {
        t.row({fmt_int(rec.day + 1), fmt_int(rec.hour + 1), fmt_int(b + 1),
               format_double(rec.demand_mw(b)), format_double(rec.lmp(b)),
               format_double(rec.lambda), fmt_int(rec.demand_shock),
               fmt_int(rec.supply_shock), fmt_int(rec.infeasible),
               fmt_int(rec.lmp_valid), fmt_int(rec.assumption_breach),
               fmt_int(rec.licq_violated)});
      }
    }
    t.close();
    files.push_back("market_hourly.tsv");
  }

  {
    TableWriter t(base / "belief_error.tsv");
    t.row({"day", "hour", "bus", "belief", "lmp", "relative_error",
           "flagged"});
    if (!log.probe_beliefs.empty()) {
      for (const auto& rec : log.records) {
        const std::size_t t_idx =
            static_cast<std::size_t>(rec.day) * log.hours_per_day + rec.hour;
        for (int b = 0; b < log.n_buses; ++b) {
          const double belief =
              log.probe_beliefs[t_idx * log.n_buses + b];
          if (std::isnan(belief)) continue;
          const double price = rec.lmp(b);
          const bool flagged = !rec.lmp_valid || std::abs(price) < 1e-9;
          const double err =
              flagged ? std::abs(belief - price)
                      : std::abs(belief - price) / std::abs(price);
          t.row({fmt_int(rec.day + 1), fmt_int(rec.hour + 1), fmt_int(b + 1),
                 format_double(belief), format_double(price),
                 format_double(err), fmt_int(flagged)});
        }
      }
    }
    t.close();
    files.push_back("belief_error.tsv");
  }

  {
    TableWriter t(base / "imv_summary.tsv");
    t.row({"bus", "imv", "seed"});
    for (const auto& m : metrics_list) {
      if (m.name.rfind("imv_", 0) != 0) continue;
      for (std::size_t b = 0; b < m.values.size(); ++b)
        t.row({fmt_int(static_cast<long>(b) + 1), format_double(m.values[b]),
               fmt_int(static_cast<long>(m.seed))});
    }
    t.close();
    files.push_back("imv_summary.tsv");
  }

  {
    TableWriter t(base / "daily_cost.tsv");
    t.row({"day", "total_cost"});
    for (std::size_t d = 0; d < log.daily_cost.size(); ++d)
      t.row({fmt_int(static_cast<long>(d) + 1),
             format_double(log.daily_cost[d])});
    t.close();
    files.push_back("daily_cost.tsv");
  }

  {
    TableWriter t(base / "profiles.tsv");
    t.row({"day", "type", "hour", "soc_bin", "action_bin", "count", "mass"});
    for (std::size_t d = 0; d < log.daily_profiles.size(); ++d) {
      for (const auto& c : log.daily_profiles[d]) {
        const int denom = c.type < static_cast<int>(log.type_agent_count.size())
                              ? log.type_agent_count[c.type]
                              : 0;
        t.row({fmt_int(static_cast<long>(d) + 1), fmt_int(c.type),
               fmt_int(c.hour + 1), fmt_int(c.soc_bin), fmt_int(c.action_bin),
               fmt_int(c.count),
               format_double(denom > 0 ? static_cast<double>(c.count) / denom
                                       : 0.0)});
      }
    }
    t.close();
    files.push_back("profiles.tsv");
  }

  {
    TableWriter t(base / "shocks.tsv");
    t.row({"kind", "day", "first_hour", "last_hour", "magnitude"});
    for (const auto& ev : log.shocks)
      t.row({ev.kind == sim::ShockKind::kDemand ? "demand" : "supply",
             fmt_int(ev.day + 1), fmt_int(ev.first_hour + 1),
             fmt_int(ev.last_hour + 1), format_double(ev.magnitude)});
    t.close();
    files.push_back("shocks.tsv");
  }

  {
    TableWriter t(base / "metrics.tsv");
    t.row({"name", "unit", "index_kind", "seed", "index", "value"});
    for (const auto& m : metrics_list)
      for (std::size_t i = 0; i < m.values.size(); ++i)
        t.row({m.name, m.unit, m.index_kind, fmt_int(static_cast<long>(m.seed)),
               fmt_int(static_cast<long>(i) + 1), format_double(m.values[i])});
    t.close();
    files.push_back("metrics.tsv");
  }

  {
    json summary;
    summary["scenario"] = scenario_echo(scenario);
    summary["days"] = log.days;
    summary["n_buses"] = log.n_buses;
    summary["shock_events"] = log.shocks.size();
    summary["notices"] = log.notices;
    double final_tv = 0.0;
    bool have_tv = false;
    if (log.days >= 2) {
      for (int h = 0; h < log.hours_per_day; ++h) {
        const double v = log.tv_per_day_hour[static_cast<std::size_t>(
                             log.days - 1) * log.hours_per_day + h];
        if (!std::isnan(v)) {
          final_tv = std::max(final_tv, v);
          have_tv = true;
        }
      }
    }
    if (have_tv) summary["final_day_max_tv"] = final_tv;
    std::ofstream out(base / "summary.json");
    out << summary.dump(2) << '\n';
    if (!out) throw IoError("write failure: summary.json");
    files.push_back("summary.json");
  }

  RunManifest manifest;
  json& m = manifest.document;
  m["code_version"] = "mfgrid 0.1.0";
  m["seed"] = scenario.config.seed;
  m["threads"] = scenario.config.threads;
  m["scenario"] = scenario_echo(scenario);
  {
    const std::string echo = m["scenario"].dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : echo) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    m["config_hash"] = buf;
  }
  m["started_at"] = started;
  m["finished_at"] = timestamp_utc();
  m["files"] = json::array();
  for (const auto& f : files) {
    const std::string full = (base / f).string();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a_file(full)));
    m["files"].push_back({{"name", f},
                          {"bytes", std::filesystem::file_size(full)},
                          {"fnv1a", buf}});
  }
  std::ofstream out(base / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) throw IoError("write failure: manifest.json");
  return manifest;
}

}  // namespace mfgrid::io
