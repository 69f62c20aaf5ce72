#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "mfgrid/grid_model.hpp"
#include "mfgrid/lcp.hpp"

namespace mfgrid::dispatch {

// KKT system of the hourly economic dispatch as an LCP over
// x = (g_1..g_N, lambda, mu_upper_1..L, mu_lower_1..L, eta_upper_1..N).
// M is demand-free; u is affine in the demand vector.
struct LcpProblem {
  Eigen::VectorXd u;
  Eigen::MatrixXd m;
  int n_buses = 0;
  int n_lines = 0;

  int dim() const { return 2 * n_buses + 2 * n_lines + 1; }
  int idx_gen(int n) const { return n; }
  int idx_lambda() const { return n_buses; }
  int idx_mu_upper(int l) const { return n_buses + 1 + l; }
  int idx_mu_lower(int l) const { return n_buses + 1 + n_lines + l; }
  int idx_eta(int n) const { return n_buses + 1 + 2 * n_lines + n; }
};

struct DispatchResult {
  Eigen::VectorXd g;         // MW per bus
  double lambda = 0.0;       // balance dual, $/MWh
  Eigen::VectorXd mu_upper;  // per-line flow duals, $/MWh
  Eigen::VectorXd mu_lower;
  Eigen::VectorXd eta_upper;  // per-bus capacity duals, $/MWh
  Eigen::VectorXd lmp;        // $/MWh
  double objective = 0.0;     // $
  bool licq_violated = false;
  int pivots = 0;
  double kkt_residual = 0.0;  // scaled max of primal/dual/complementarity slack
};

LcpProblem build_kkt_lcp(const grid::Network& network,
                         const Eigen::VectorXd& demand);

// Production path: Lemke on the KKT LCP, prices from the duals. Throws
// InfeasibleError naming the binding resource when demand cannot be served.
DispatchResult solve_ed(const grid::Network& network,
                        const Eigen::VectorXd& demand);

// Verification oracle: enumerates active sets of the balance, flow and
// capacity constraints in cardinality order and solves each
// equality-constrained QP densely, returning the KKT-consistent one.
// Guarded to N <= 4, L <= 6.
DispatchResult brute_force_ed(const grid::Network& network,
                              const Eigen::VectorXd& demand);

struct LipschitzEstimate {
  double value = 0.0;  // $/MWh per MW, sup of sampled difference quotients
  int samples_used = 0;
  int samples_skipped = 0;  // infeasible perturbations
};

// Empirical Lipschitz constant of the LMP map: max over sampled
// single-coordinate demand perturbation pairs within the given radius of
// ||LMP(B)-LMP(B')||_inf / ||B-B'||_inf. Identical pairs count as 0.
LipschitzEstimate estimate_lipschitz(const grid::Network& network,
                                     const Eigen::VectorXd& base_demand,
                                     int n_samples, double radius,
                                     std::uint64_t seed);

}  // namespace mfgrid::dispatch
