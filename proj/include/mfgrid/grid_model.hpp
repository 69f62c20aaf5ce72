#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfgrid::grid {

// Quadratic generation cost C(g) = 0.5*alpha*g^2 + beta*g + gamma, capped at
// capacity. gamma never enters prices, only reported objectives.
struct GeneratorCost {
  double alpha = 0.0;     // $/MW^2 h
  double beta = 0.0;      // $/MWh
  double gamma = 0.0;     // $
  double capacity = 0.0;  // MW
};

struct Line {
  int from = 0;  // 0-based bus index
  int to = 0;
  std::optional<double> reactance;  // p.u.; may be absent when PTDF is given
  double capacity = 0.0;            // MW
};

// Static network data. One generator per bus; ptdf is L x N with the slack
// column identically zero. Read-only after construction, safe to share
// across threads.
struct Network {
  int n_buses = 0;
  int slack_bus = 0;  // 0-based
  std::vector<Line> lines;
  std::vector<GeneratorCost> generators;
  Eigen::MatrixXd ptdf;

  int n_lines() const { return static_cast<int>(lines.size()); }
  double total_capacity() const;
  double mean_beta() const;
};

// DC power-flow PTDF: branch susceptance flow matrix times the inverse of
// the reduced nodal susceptance matrix, slack column zeroed.
// Throws StructuralError if the graph is disconnected, InputError if any
// reactance is missing or non-positive.
Eigen::MatrixXd compute_ptdf(const std::vector<Line>& lines, int n_buses,
                             int slack_bus);

struct ValidationIssue {
  std::string rule;    // short rule id, e.g. "generator.alpha_positive"
  std::string detail;  // human-readable location/context
};

// Reports every violated invariant; empty means valid. Never mutates.
std::vector<ValidationIssue> validate_network(const Network& network);

bool is_connected(const std::vector<Line>& lines, int n_buses);

// Network file: sections [buses], [generators], [lines], optional [ptdf].
// Bus indices in files are 1-based. Parse errors carry line numbers.
Network parse_network(std::istream& in, const std::string& source_name,
                      std::vector<std::string>* warnings = nullptr);
Network load_network(const std::string& path,
                     std::vector<std::string>* warnings = nullptr);

}  // namespace mfgrid::grid
