#pragma once

#include <Eigen/Core>

namespace mfgrid::lcp {

// Find x >= 0 with w = u + M x >= 0 and x'w = 0.
struct Solution {
  Eigen::VectorXd x;
  int pivots = 0;
  // max_i |x_i * (u + Mx)_i| / max(1, ||u||_inf)
  double complementarity_residual = 0.0;
};

struct Options {
  // 0 means the default 10 * n^2 bound.
  int max_pivots = 0;
  double pivot_tolerance = 1e-11;
};

// Lemke complementary pivoting with lexicographic anti-cycling. The pivot
// sequence is deterministic; identical inputs give bitwise-identical
// solutions. Throws InfeasibleError on ray termination (for copositive-plus
// M this certifies an infeasible problem) and SolverError when the pivot
// budget is exhausted.
Solution solve_lcp(const Eigen::VectorXd& u, const Eigen::MatrixXd& m,
                   const Options& options = {});

}  // namespace mfgrid::lcp
