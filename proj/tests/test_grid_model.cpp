#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <sstream>

#include "mfgrid/common.hpp"
#include "mfgrid/grid_model.hpp"
#include "mfgrid/rng.hpp"
#include "mfgrid/scenario.hpp"

using namespace mfgrid;
using grid::Line;

namespace {

grid::Network two_bus() {
  grid::Network net;
  net.n_buses = 2;
  net.slack_bus = 1;
  net.lines = {{0, 1, 0.1, 100.0}};
  net.generators = {{0.02, 150.0, 0.0, 600.0}, {0.02, 160.0, 0.0, 600.0}};
  net.ptdf = grid::compute_ptdf(net.lines, 2, 1);
  return net;
}

}  // namespace

TEST_CASE("two buses, one line: injection at bus 1 flows entirely on it") {
  const auto ptdf = grid::compute_ptdf({{0, 1, 0.1, 100.0}}, 2, 1);
  CHECK(ptdf.rows() == 1);
  CHECK(ptdf(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ptdf(0, 1) == 0.0);
}

TEST_CASE("slack column is identically zero") {
  const std::vector<Line> lines = {{0, 1, 0.2, 50.0},
                                   {1, 2, 0.1, 50.0},
                                   {0, 2, 0.15, 50.0},
                                   {2, 3, 0.3, 50.0}};
  for (int slack = 0; slack < 4; ++slack) {
    const auto ptdf = grid::compute_ptdf(lines, 4, slack);
    CHECK(ptdf.col(slack).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("equal-reactance triangle splits an injection 2/3 - 1/3") {
  // Independent dense DC power-flow solve for the 3-bus ring.
  const std::vector<Line> lines = {{0, 2, 0.1, 50.0},
                                   {0, 1, 0.1, 50.0},
                                   {1, 2, 0.1, 50.0}};
  const auto ptdf = grid::compute_ptdf(lines, 3, 2);

  Eigen::Matrix2d b_red;
  const double b = 1.0 / 0.1;
  b_red << 2 * b, -b, -b, 2 * b;  // buses 1,2 reduced by slack bus 3
  Eigen::Vector2d inj(1.0, 0.0);
  const Eigen::Vector2d theta = b_red.ldlt().solve(inj);
  const double f_02 = b * (theta(0) - 0.0);
  const double f_01 = b * (theta(0) - theta(1));
  const double f_12 = b * (theta(1) - 0.0);

  CHECK(ptdf(0, 0) == doctest::Approx(f_02).epsilon(1e-12));
  CHECK(ptdf(1, 0) == doctest::Approx(f_01).epsilon(1e-12));
  CHECK(ptdf(2, 0) == doctest::Approx(f_12).epsilon(1e-12));
  CHECK(ptdf(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(ptdf(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("Kirchhoff consistency on random connected networks") {
  for (int trial = 0; trial < 20; ++trial) {
    auto s = rng::Stream::keyed(100 + trial, rng::Purpose::kOracle);
    const int n = 3 + static_cast<int>(s.uniform_index(5));
    std::vector<Line> lines;
    for (int i = 1; i < n; ++i)
      lines.push_back({static_cast<int>(s.uniform_index(i)), i,
                       s.uniform(0.05, 0.5), 100.0});
    for (int e = 0; e < 3; ++e) {
      const int u = static_cast<int>(s.uniform_index(n));
      const int v = static_cast<int>(s.uniform_index(n));
      if (u != v) lines.push_back({u, v, s.uniform(0.05, 0.5), 100.0});
    }
    const int slack = static_cast<int>(s.uniform_index(n));
    const auto ptdf = grid::compute_ptdf(lines, n, slack);

    Eigen::VectorXd inj(n);
    for (int i = 0; i < n; ++i) inj(i) = s.uniform(-50.0, 50.0);
    inj(slack) -= inj.sum();  // zero net injection
    const Eigen::VectorXd flow = ptdf * inj;

    // Reconstruct nodal balances from the flows.
    Eigen::VectorXd balance = inj;
    for (std::size_t l = 0; l < lines.size(); ++l) {
      balance(lines[l].from) -= flow(l);
      balance(lines[l].to) += flow(l);
    }
    CHECK(balance.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("compute_ptdf is bitwise deterministic") {
  const std::vector<Line> lines = {{0, 1, 0.2, 50.0}, {1, 2, 0.3, 60.0}};
  const auto a = grid::compute_ptdf(lines, 3, 0);
  const auto b = grid::compute_ptdf(lines, 3, 0);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("compute_ptdf input and structure errors") {
  CHECK_THROWS_AS(grid::compute_ptdf({{0, 1, std::nullopt, 10.0}}, 2, 0),
                  InputError);
  // Disconnected: bus 2 is isolated.
  CHECK_THROWS_AS(grid::compute_ptdf({{0, 1, 0.1, 10.0}}, 3, 0),
                  StructuralError);
}

TEST_CASE("validate_network: bundled 14-bus file is clean") {
  const auto net = grid::load_network(io::resolve_data_path("ieee14.net"));
  CHECK(net.n_buses == 14);
  CHECK(net.n_lines() == 20);
  CHECK(grid::validate_network(net).empty());
}

TEST_CASE("validate_network reports the offending rule and location") {
  auto net = two_bus();
  net.generators[1].alpha = 0.0;
  const auto issues = grid::validate_network(net);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].rule == "generator.alpha_positive");
  CHECK(issues[0].detail == "bus 2");

  auto net2 = two_bus();
  net2.ptdf.resize(3, 2);
  const auto issues2 = grid::validate_network(net2);
  REQUIRE(!issues2.empty());
  CHECK(issues2[0].rule == "ptdf.dimensions");
}

TEST_CASE("network file parsing reports line numbers") {
  std::istringstream bad(
      "[buses]\ncount = 2\nslack = 1\n[generators]\n1 0.02 150 0 600\n"
      "2 0.02 oops 0 600\n");
  CHECK_THROWS_WITH_AS(grid::parse_network(bad, "net"),
                       "net:6: expected a number, got 'oops'", InputError);
}

TEST_CASE("supplied ptdf wins over reactances, with a warning") {
  std::istringstream in(
      "[buses]\ncount = 2\nslack = 2\n[generators]\n1 0.02 150 0 600\n"
      "2 0.02 160 0 600\n[lines]\n1 2 0.1 100\n[ptdf]\n0.5 0\n");
  std::vector<std::string> warnings;
  const auto net = grid::parse_network(in, "net", &warnings);
  CHECK(net.ptdf(0, 0) == 0.5);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("matrix wins") != std::string::npos);
}
