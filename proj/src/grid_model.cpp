#include "mfgrid/grid_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mfgrid/common.hpp"

namespace mfgrid::grid {

double Network::total_capacity() const {
  double sum = 0.0;
  for (const auto& g : generators) sum += g.capacity;
  return sum;
}

double Network::mean_beta() const {
  if (generators.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& g : generators) sum += g.beta;
  return sum / static_cast<double>(generators.size());
}

bool is_connected(const std::vector<Line>& lines, int n_buses) {
  if (n_buses <= 1) return true;
  std::vector<std::vector<int>> adj(n_buses);
  for (const auto& l : lines) {
    if (l.from < 0 || l.from >= n_buses || l.to < 0 || l.to >= n_buses)
      return false;
    adj[l.from].push_back(l.to);
    adj[l.to].push_back(l.from);
  }
  std::vector<char> seen(n_buses, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n_buses;
}

Eigen::MatrixXd compute_ptdf(const std::vector<Line>& lines, int n_buses,
                             int slack_bus) {
  const int n_lines = static_cast<int>(lines.size());
  if (n_buses < 1) throw InputError("compute_ptdf: need at least one bus");
  if (slack_bus < 0 || slack_bus >= n_buses)
    throw InputError("compute_ptdf: slack bus out of range");
  for (int l = 0; l < n_lines; ++l) {
    const auto& line = lines[l];
    if (!line.reactance.has_value())
      throw InputError("compute_ptdf: line " + std::to_string(l + 1) +
                       " has no reactance");
    if (*line.reactance <= 0.0)
      throw InputError("compute_ptdf: line " + std::to_string(l + 1) +
                       " has non-positive reactance");
    if (line.from == line.to || line.from < 0 || line.from >= n_buses ||
        line.to < 0 || line.to >= n_buses)
      throw InputError("compute_ptdf: line " + std::to_string(l + 1) +
                       " has invalid endpoints");
  }
  if (!is_connected(lines, n_buses))
    throw StructuralError("compute_ptdf: network graph is not connected");

  // Nodal susceptance matrix and branch flow matrix.
  Eigen::MatrixXd b_bus = Eigen::MatrixXd::Zero(n_buses, n_buses);
  Eigen::MatrixXd b_flow = Eigen::MatrixXd::Zero(n_lines, n_buses);
  for (int l = 0; l < n_lines; ++l) {
    const auto& line = lines[l];
    const double b = 1.0 / *line.reactance;
    b_bus(line.from, line.from) += b;
    b_bus(line.to, line.to) += b;
    b_bus(line.from, line.to) -= b;
    b_bus(line.to, line.from) -= b;
    b_flow(l, line.from) = b;
    b_flow(l, line.to) = -b;
  }

  // Invert the slack-reduced system; the slack column of X stays zero, which
  // zeroes the slack column of the PTDF.
  std::vector<int> keep;
  keep.reserve(n_buses - 1);
  for (int n = 0; n < n_buses; ++n)
    if (n != slack_bus) keep.push_back(n);

  const int m = n_buses - 1;
  Eigen::MatrixXd b_red(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) b_red(i, j) = b_bus(keep[i], keep[j]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(b_red);
  Eigen::MatrixXd x_red = lu.solve(Eigen::MatrixXd::Identity(m, m));

  Eigen::MatrixXd x_full = Eigen::MatrixXd::Zero(n_buses, n_buses);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) x_full(keep[i], keep[j]) = x_red(i, j);

  Eigen::MatrixXd ptdf = b_flow * x_full;
  ptdf.col(slack_bus).setZero();
  return ptdf;
}

std::vector<ValidationIssue> validate_network(const Network& network) {
  std::vector<ValidationIssue> issues;
  const int n = network.n_buses;
  if (n < 1) {
    issues.push_back({"network.n_buses", "bus count must be >= 1"});
    return issues;
  }
  if (network.slack_bus < 0 || network.slack_bus >= n)
    issues.push_back({"network.slack_bus", "slack bus out of range"});

  if (static_cast<int>(network.generators.size()) != n) {
    issues.push_back(
        {"network.one_generator_per_bus",
         "expected " + std::to_string(n) + " generators, found " +
             std::to_string(network.generators.size())});
  }
  for (std::size_t i = 0; i < network.generators.size(); ++i) {
    const auto& g = network.generators[i];
    const std::string where = "bus " + std::to_string(i + 1);
    if (!(g.alpha > 0.0))
      issues.push_back({"generator.alpha_positive", where});
    if (!(g.capacity > 0.0))
      issues.push_back({"generator.capacity_positive", where});
  }
  for (std::size_t l = 0; l < network.lines.size(); ++l) {
    const auto& line = network.lines[l];
    const std::string where = "line " + std::to_string(l + 1);
    if (line.from == line.to)
      issues.push_back({"line.distinct_endpoints", where});
    if (line.from < 0 || line.from >= n || line.to < 0 || line.to >= n)
      issues.push_back({"line.bus_in_range", where});
    if (!(line.capacity > 0.0))
      issues.push_back({"line.capacity_positive", where});
    if (line.reactance.has_value() && !(*line.reactance > 0.0))
      issues.push_back({"line.reactance_positive", where});
  }
  if (network.ptdf.rows() != network.n_lines() || network.ptdf.cols() != n) {
    issues.push_back(
        {"ptdf.dimensions",
         "expected " + std::to_string(network.n_lines()) + "x" +
             std::to_string(n) + ", found " +
             std::to_string(network.ptdf.rows()) + "x" +
             std::to_string(network.ptdf.cols())});
  } else if (network.slack_bus >= 0 && network.slack_bus < n &&
             network.ptdf.rows() > 0 &&
             network.ptdf.col(network.slack_bus).cwiseAbs().maxCoeff() != 0.0) {
    issues.push_back({"ptdf.slack_column_zero",
                      "bus " + std::to_string(network.slack_bus + 1)});
  }
  if (!is_connected(network.lines, n) && n > 1)
    issues.push_back({"network.connected", "graph is not connected"});
  return issues;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::string& source, int line_no,
                             const std::string& what) {
  throw InputError(source + ":" + std::to_string(line_no) + ": " + what);
}

double to_double(const std::string& tok, const std::string& source,
                 int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    parse_fail(source, line_no, "expected a number, got '" + tok + "'");
  }
}

int to_int(const std::string& tok, const std::string& source, int line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    parse_fail(source, line_no, "expected an integer, got '" + tok + "'");
  }
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Network parse_network(std::istream& in, const std::string& source,
                      std::vector<std::string>* warnings) {
  Network net;
  std::vector<Eigen::VectorXd> ptdf_rows;
  bool have_ptdf_section = false;
  std::string section;
  std::string raw;
  int line_no = 0;
  int declared_buses = -1;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto pos = line.find('#'); pos != std::string::npos)
      line = line.substr(0, pos);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        parse_fail(source, line_no, "malformed section header '" + line + "'");
      section = line.substr(1, line.size() - 2);
      if (section != "buses" && section != "generators" &&
          section != "lines" && section != "ptdf")
        parse_fail(source, line_no, "unknown section '" + section + "'");
      if (section == "ptdf") have_ptdf_section = true;
      continue;
    }
    if (section.empty())
      parse_fail(source, line_no, "content before any section header");

    if (section == "buses") {
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        parse_fail(source, line_no, "expected key = value in [buses]");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key == "count") {
        declared_buses = to_int(val, source, line_no);
        if (declared_buses < 1)
          parse_fail(source, line_no, "bus count must be >= 1");
        net.n_buses = declared_buses;
      } else if (key == "slack") {
        net.slack_bus = to_int(val, source, line_no) - 1;
      } else {
        parse_fail(source, line_no, "unknown key '" + key + "' in [buses]");
      }
    } else if (section == "generators") {
      const auto toks = split_ws(line);
      if (toks.size() != 5)
        parse_fail(source, line_no,
                   "expected: bus alpha beta gamma capacity");
      const int bus = to_int(toks[0], source, line_no) - 1;
      if (declared_buses < 0)
        parse_fail(source, line_no, "[buses] count must come first");
      if (bus < 0 || bus >= declared_buses)
        parse_fail(source, line_no, "generator bus out of range");
      if (static_cast<int>(net.generators.size()) <= bus)
        net.generators.resize(declared_buses);
      net.generators[bus] = {to_double(toks[1], source, line_no),
                             to_double(toks[2], source, line_no),
                             to_double(toks[3], source, line_no),
                             to_double(toks[4], source, line_no)};
    } else if (section == "lines") {
      const auto toks = split_ws(line);
      if (toks.size() != 4)
        parse_fail(source, line_no, "expected: from to reactance capacity");
      Line l;
      l.from = to_int(toks[0], source, line_no) - 1;
      l.to = to_int(toks[1], source, line_no) - 1;
      if (toks[2] != "-") l.reactance = to_double(toks[2], source, line_no);
      l.capacity = to_double(toks[3], source, line_no);
      net.lines.push_back(l);
    } else {  // ptdf
      const auto toks = split_ws(line);
      if (declared_buses > 0 &&
          static_cast<int>(toks.size()) != declared_buses)
        parse_fail(source, line_no,
                   "ptdf row " + std::to_string(ptdf_rows.size() + 1) +
                       ": expected " + std::to_string(declared_buses) +
                       " entries, found " + std::to_string(toks.size()));
      Eigen::VectorXd row(toks.size());
      for (std::size_t j = 0; j < toks.size(); ++j)
        row(static_cast<int>(j)) = to_double(toks[j], source, line_no);
      ptdf_rows.push_back(std::move(row));
    }
  }

  if (net.n_buses < 1)
    throw InputError(source + ": missing [buses] count");
  if (static_cast<int>(net.generators.size()) != net.n_buses)
    net.generators.resize(net.n_buses);

  const bool all_reactances =
      std::all_of(net.lines.begin(), net.lines.end(),
                  [](const Line& l) { return l.reactance.has_value(); });

  if (have_ptdf_section) {
    if (static_cast<int>(ptdf_rows.size()) != net.n_lines())
      throw InputError(source + ": [ptdf] has " +
                       std::to_string(ptdf_rows.size()) + " rows, expected " +
                       std::to_string(net.n_lines()));
    net.ptdf.resize(net.n_lines(), net.n_buses);
    for (int l = 0; l < net.n_lines(); ++l) net.ptdf.row(l) = ptdf_rows[l];
    if (all_reactances && warnings)
      warnings->push_back(source +
                          ": both reactances and [ptdf] given; the supplied "
                          "matrix wins");
  } else {
    net.ptdf = compute_ptdf(net.lines, net.n_buses, net.slack_bus);
  }
  return net;
}

Network load_network(const std::string& path,
                     std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open network file: " + path);
  return parse_network(in, path, warnings);
}

}  // namespace mfgrid::grid
