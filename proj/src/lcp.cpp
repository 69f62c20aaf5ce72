#include "mfgrid/lcp.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "mfgrid/common.hpp"

namespace mfgrid::lcp {

namespace {

// Lexicographic ratio comparison between rows r1 and r2 of the tableau for
// entering column c: compares (rhs, B^-1 row)/pivot without divisions.
// Returns true when r1 strictly precedes r2. Exact comparisons keep the
// anti-cycling argument intact; a final index tie-break keeps the pivot
// choice deterministic under floating-point degeneracy.
bool lex_less(const Eigen::MatrixXd& t, int r1, int r2, int c, int n,
              int rhs_col) {
  const double p1 = t(r1, c);
  const double p2 = t(r2, c);
  double d = t(r1, rhs_col) * p2 - t(r2, rhs_col) * p1;
  if (d != 0.0) return d < 0.0;
  for (int j = 0; j < n; ++j) {
    d = t(r1, j) * p2 - t(r2, j) * p1;
    if (d != 0.0) return d < 0.0;
  }
  return r1 < r2;
}

void pivot(Eigen::MatrixXd& t, std::vector<int>& basis, int row, int col) {
  t.row(row) /= t(row, col);
  for (int i = 0; i < t.rows(); ++i) {
    if (i == row) continue;
    const double f = t(i, col);
    if (f != 0.0) t.row(i) -= f * t.row(row);
  }
  basis[row] = col;
}

}  // namespace

Solution solve_lcp(const Eigen::VectorXd& u, const Eigen::MatrixXd& m,
                   const Options& options) {
  const int n = static_cast<int>(u.size());
  if (m.rows() != n || m.cols() != n)
    throw InputError("solve_lcp: dimension mismatch between u and M");

  const double u_scale = std::max(1.0, n > 0 ? u.cwiseAbs().maxCoeff() : 0.0);
  auto finish = [&](const Eigen::VectorXd& x, int pivots) {
    Solution sol;
    sol.x = x;
    sol.pivots = pivots;
    const Eigen::VectorXd w = u + m * x;
    double res = 0.0;
    for (int i = 0; i < n; ++i) res = std::max(res, std::abs(x(i) * w(i)));
    sol.complementarity_residual = res / u_scale;
    return sol;
  };

  if (n == 0) return finish(Eigen::VectorXd(), 0);
  if (u.minCoeff() >= 0.0) return finish(Eigen::VectorXd::Zero(n), 0);

  // Columns: 0..n-1 basis-inverse (w vars), n..2n-1 x vars, 2n artificial
  // z0, 2n+1 right-hand side.
  const int z0_col = 2 * n;
  const int rhs_col = 2 * n + 1;
  Eigen::MatrixXd t(n, 2 * n + 2);
  t.leftCols(n) = Eigen::MatrixXd::Identity(n, n);
  t.middleCols(n, n) = -m;
  t.col(z0_col) = -Eigen::VectorXd::Ones(n);
  t.col(rhs_col) = u;
  std::vector<int> basis(n);
  for (int i = 0; i < n; ++i) basis[i] = i;

  // Drive z0 in against the most negative u row (lexicographic tie-break).
  int row = 0;
  for (int i = 1; i < n; ++i) {
    if (t(i, rhs_col) < t(row, rhs_col) ||
        (t(i, rhs_col) == t(row, rhs_col) && lex_less(t, i, row, z0_col, n,
                                                      rhs_col)))
      row = i;
  }
  int leaving = basis[row];
  pivot(t, basis, row, z0_col);
  int pivots = 1;

  const int max_pivots =
      options.max_pivots > 0 ? options.max_pivots : 10 * n * n;
  const double eps = options.pivot_tolerance;

  while (true) {
    // Complement of the variable that just left the basis.
    const int entering = leaving < n ? leaving + n : leaving - n;

    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (t(i, entering) <= eps) continue;
      if (best < 0 || lex_less(t, i, best, entering, n, rhs_col)) best = i;
    }
    if (best < 0) {
      throw InfeasibleError(
          "solve_lcp: ray termination after " + std::to_string(pivots) +
          " pivots (no complementary solution; problem infeasible)");
    }
    // Let z0 leave on a scalar ratio tie so the algorithm terminates.
    if (basis[best] != z0_col) {
      int z0_row = -1;
      for (int i = 0; i < n; ++i)
        if (basis[i] == z0_col) {
          z0_row = i;
          break;
        }
      if (z0_row >= 0 && t(z0_row, entering) > eps &&
          t(z0_row, rhs_col) * t(best, entering) ==
              t(best, rhs_col) * t(z0_row, entering))
        best = z0_row;
    }

    leaving = basis[best];
    pivot(t, basis, best, entering);
    ++pivots;

    if (leaving == z0_col) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < n; ++i)
        if (basis[i] >= n && basis[i] < 2 * n)
          x(basis[i] - n) = t(i, rhs_col);
      // Pivoting leaves harmless negative dust in basic values.
      for (int i = 0; i < n; ++i)
        if (x(i) < 0.0 && x(i) > -1e-9 * u_scale) x(i) = 0.0;
      return finish(x, pivots);
    }
    if (pivots > max_pivots)
      throw SolverError("solve_lcp: pivot limit " +
                        std::to_string(max_pivots) + " exceeded");
  }
}

}  // namespace mfgrid::lcp
