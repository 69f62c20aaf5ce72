#include "mfgrid/dispatch.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mfgrid/common.hpp"
#include "mfgrid/rng.hpp"

namespace mfgrid::dispatch {

namespace {

void check_inputs(const grid::Network& net, const Eigen::VectorXd& demand) {
  if (static_cast<int>(demand.size()) != net.n_buses)
    throw InputError("dispatch: demand vector has " +
                     std::to_string(demand.size()) + " entries, network has " +
                     std::to_string(net.n_buses) + " buses");
  if (static_cast<int>(net.generators.size()) != net.n_buses)
    throw InputError("dispatch: network has no generator list of size N");
  if (net.ptdf.rows() != net.n_lines() || net.ptdf.cols() != net.n_buses)
    throw InputError("dispatch: PTDF dimensions do not match the network");
}

Eigen::VectorXd lmp_from_duals(const grid::Network& net, double lambda,
                               const Eigen::VectorXd& mu_upper,
                               const Eigen::VectorXd& mu_lower) {
  Eigen::VectorXd lmp = Eigen::VectorXd::Constant(net.n_buses, lambda);
  if (net.n_lines() > 0)
    lmp -= net.ptdf.transpose() * (mu_upper - mu_lower);
  return lmp;
}

double dispatch_objective(const grid::Network& net, const Eigen::VectorXd& g) {
  double obj = 0.0;
  for (int n = 0; n < net.n_buses; ++n) {
    const auto& c = net.generators[n];
    obj += 0.5 * c.alpha * g(n) * g(n) + c.beta * g(n) + c.gamma;
  }
  return obj;
}

// Rank test on the active-constraint Jacobian (rows in generation space).
// Assumption 1 is not enforced, only reported.
bool licq_holds(const grid::Network& net, const Eigen::VectorXd& demand,
                const Eigen::VectorXd& g, double tol) {
  const int n = net.n_buses;
  const int n_lines = net.n_lines();
  std::vector<Eigen::RowVectorXd> rows;
  if (std::abs(g.sum() - demand.sum()) <= tol)
    rows.push_back(Eigen::RowVectorXd::Ones(n));
  if (n_lines > 0) {
    const Eigen::VectorXd flow = net.ptdf * (g - demand);
    for (int l = 0; l < n_lines; ++l) {
      if (std::abs(net.lines[l].capacity - flow(l)) <= tol)
        rows.push_back(-net.ptdf.row(l));
      if (std::abs(net.lines[l].capacity + flow(l)) <= tol)
        rows.push_back(net.ptdf.row(l));
    }
  }
  for (int i = 0; i < n; ++i) {
    if (std::abs(g(i)) <= tol) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      r(i) = -1.0;
      rows.push_back(r);
    }
    if (std::abs(net.generators[i].capacity - g(i)) <= tol) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
      r(i) = 1.0;
      rows.push_back(r);
    }
  }
  if (rows.empty()) return true;
  const int m = static_cast<int>(rows.size());
  if (m > n) return false;
  Eigen::MatrixXd jac(m, n);
  for (int i = 0; i < m; ++i) jac.row(i) = rows[i];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
  qr.setThreshold(1e-10);
  return qr.rank() == m;
}

}  // namespace

LcpProblem build_kkt_lcp(const grid::Network& net,
                         const Eigen::VectorXd& demand) {
  check_inputs(net, demand);
  const int n = net.n_buses;
  const int l_count = net.n_lines();
  LcpProblem p;
  p.n_buses = n;
  p.n_lines = l_count;
  const int dim = p.dim();
  p.u = Eigen::VectorXd::Zero(dim);
  p.m = Eigen::MatrixXd::Zero(dim, dim);

  const Eigen::VectorXd ptdf_b =
      l_count > 0 ? Eigen::VectorXd(net.ptdf * demand) : Eigen::VectorXd();

  for (int i = 0; i < n; ++i) {
    const auto& gen = net.generators[i];
    p.u(p.idx_gen(i)) = gen.beta;
    p.u(p.idx_eta(i)) = gen.capacity;
    p.m(p.idx_gen(i), p.idx_gen(i)) = gen.alpha;
    p.m(p.idx_gen(i), p.idx_lambda()) = -1.0;
    p.m(p.idx_gen(i), p.idx_eta(i)) = 1.0;
    p.m(p.idx_lambda(), p.idx_gen(i)) = 1.0;
    p.m(p.idx_eta(i), p.idx_gen(i)) = -1.0;
  }
  p.u(p.idx_lambda()) = -demand.sum();
  for (int l = 0; l < l_count; ++l) {
    p.u(p.idx_mu_upper(l)) = net.lines[l].capacity + ptdf_b(l);
    p.u(p.idx_mu_lower(l)) = net.lines[l].capacity - ptdf_b(l);
    for (int i = 0; i < n; ++i) {
      p.m(p.idx_gen(i), p.idx_mu_upper(l)) = net.ptdf(l, i);
      p.m(p.idx_gen(i), p.idx_mu_lower(l)) = -net.ptdf(l, i);
      p.m(p.idx_mu_upper(l), p.idx_gen(i)) = -net.ptdf(l, i);
      p.m(p.idx_mu_lower(l), p.idx_gen(i)) = net.ptdf(l, i);
    }
  }
  return p;
}

DispatchResult solve_ed(const grid::Network& net,
                        const Eigen::VectorXd& demand) {
  check_inputs(net, demand);
  if (demand.sum() > net.total_capacity())
    throw InfeasibleError(
        "solve_ed: total demand " + std::to_string(demand.sum()) +
        " MW exceeds system generation capacity " +
        std::to_string(net.total_capacity()) + " MW");

  const LcpProblem p = build_kkt_lcp(net, demand);
  lcp::Solution sol;
  try {
    sol = lcp::solve_lcp(p.u, p.m);
  } catch (const InfeasibleError&) {
    throw InfeasibleError(
        "solve_ed: dispatch infeasible under transmission flow limits "
        "(demand " +
        std::to_string(demand.sum()) + " MW not deliverable)");
  }

  const int n = net.n_buses;
  const int l_count = net.n_lines();
  DispatchResult r;
  r.pivots = sol.pivots;
  r.g.resize(n);
  r.mu_upper.resize(l_count);
  r.mu_lower.resize(l_count);
  r.eta_upper.resize(n);
  for (int i = 0; i < n; ++i) {
    r.g(i) = sol.x(p.idx_gen(i));
    r.eta_upper(i) = sol.x(p.idx_eta(i));
  }
  r.lambda = sol.x(p.idx_lambda());
  for (int l = 0; l < l_count; ++l) {
    r.mu_upper(l) = sol.x(p.idx_mu_upper(l));
    r.mu_lower(l) = sol.x(p.idx_mu_lower(l));
  }
  r.lmp = lmp_from_duals(net, r.lambda, r.mu_upper, r.mu_lower);
  r.objective = dispatch_objective(net, r.g);

  const Eigen::VectorXd w = p.u + p.m * sol.x;
  const double scale = std::max(1.0, p.u.cwiseAbs().maxCoeff());
  double res = sol.complementarity_residual;
  res = std::max(res, -std::min(0.0, w.minCoeff()) / scale);
  res = std::max(res, -std::min(0.0, sol.x.minCoeff()) / scale);
  r.kkt_residual = res;
  if (res > 1e-8)
    throw SolverError("solve_ed: KKT residual " + std::to_string(res) +
                      " above tolerance");

  const double act_tol = 1e-7 * std::max(1.0, demand.cwiseAbs().maxCoeff());
  r.licq_violated = !licq_holds(net, demand, r.g, act_tol);
  return r;
}

namespace {

struct ActiveSet {
  bool balance = false;
  // 0 inactive, 1 upper bound, 2 lower bound
  std::array<std::uint8_t, 6> line_state{};
  // 0 free, 1 at zero, 2 at capacity
  std::array<std::uint8_t, 4> gen_state{};
  int cardinality = 0;
};

}  // namespace

DispatchResult brute_force_ed(const grid::Network& net,
                              const Eigen::VectorXd& demand) {
  check_inputs(net, demand);
  const int n = net.n_buses;
  const int l_count = net.n_lines();
  if (n > 4 || l_count > 6)
    throw InputError("brute_force_ed: guarded to N <= 4 and L <= 6 (got N=" +
                     std::to_string(n) + ", L=" + std::to_string(l_count) +
                     ")");

  // Enumerate every active-set combination, smallest cardinality first.
  std::vector<ActiveSet> combos;
  int line_pow = 1;
  for (int l = 0; l < l_count; ++l) line_pow *= 3;
  int gen_pow = 1;
  for (int i = 0; i < n; ++i) gen_pow *= 3;
  combos.reserve(2 * line_pow * gen_pow);
  for (int bal = 0; bal <= 1; ++bal) {
    for (int lc = 0; lc < line_pow; ++lc) {
      for (int gc = 0; gc < gen_pow; ++gc) {
        ActiveSet s;
        s.balance = bal == 1;
        s.cardinality = bal;
        int rest = lc;
        for (int l = 0; l < l_count; ++l) {
          s.line_state[l] = static_cast<std::uint8_t>(rest % 3);
          rest /= 3;
          if (s.line_state[l] != 0) ++s.cardinality;
        }
        rest = gc;
        for (int i = 0; i < n; ++i) {
          s.gen_state[i] = static_cast<std::uint8_t>(rest % 3);
          rest /= 3;
          if (s.gen_state[i] != 0) ++s.cardinality;
        }
        combos.push_back(s);
      }
    }
  }
  std::stable_sort(combos.begin(), combos.end(),
                   [](const ActiveSet& a, const ActiveSet& b) {
                     return a.cardinality < b.cardinality;
                   });

  const double scale = std::max({1.0, demand.cwiseAbs().maxCoeff(),
                                 net.total_capacity()});
  const double feas_tol = 1e-7 * scale;
  const double dual_tol = 1e-7 * scale;

  const Eigen::VectorXd ptdf_b =
      l_count > 0 ? Eigen::VectorXd(net.ptdf * demand) : Eigen::VectorXd();

  for (const auto& s : combos) {
    // Unknowns: g (n), lambda (if balance), mu per active line, eta per
    // active generator bound (sign depends on which bound).
    int dim = n + (s.balance ? 1 : 0);
    std::vector<int> act_lines, act_gens;
    for (int l = 0; l < l_count; ++l)
      if (s.line_state[l] != 0) act_lines.push_back(l);
    for (int i = 0; i < n; ++i)
      if (s.gen_state[i] != 0) act_gens.push_back(i);
    dim += static_cast<int>(act_lines.size() + act_gens.size());

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    const int col_lambda = n;
    const int col_mu = n + (s.balance ? 1 : 0);
    const int col_eta = col_mu + static_cast<int>(act_lines.size());

    // Stationarity rows.
    for (int i = 0; i < n; ++i) {
      a(i, i) = net.generators[i].alpha;
      rhs(i) = -net.generators[i].beta;
      if (s.balance) a(i, col_lambda) = -1.0;
      for (std::size_t k = 0; k < act_lines.size(); ++k) {
        const int l = act_lines[k];
        const double sign = s.line_state[l] == 1 ? 1.0 : -1.0;
        a(i, col_mu + static_cast<int>(k)) = sign * net.ptdf(l, i);
      }
      for (std::size_t k = 0; k < act_gens.size(); ++k) {
        if (act_gens[k] != i) continue;
        const double sign = s.gen_state[i] == 2 ? 1.0 : -1.0;
        a(i, col_eta + static_cast<int>(k)) = sign;
      }
    }
    int row = n;
    if (s.balance) {
      a.row(row).head(n).setOnes();
      rhs(row) = demand.sum();
      ++row;
    }
    for (std::size_t k = 0; k < act_lines.size(); ++k) {
      const int l = act_lines[k];
      a.row(row).head(n) = net.ptdf.row(l);
      rhs(row) = (s.line_state[l] == 1 ? net.lines[l].capacity
                                       : -net.lines[l].capacity) +
                 ptdf_b(l);
      ++row;
    }
    for (std::size_t k = 0; k < act_gens.size(); ++k) {
      const int i = act_gens[k];
      a(row, i) = 1.0;
      rhs(row) = s.gen_state[i] == 2 ? net.generators[i].capacity : 0.0;
      ++row;
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);

    const Eigen::VectorXd g = sol.head(n);
    const double lambda = s.balance ? sol(col_lambda) : 0.0;

    // Primal feasibility.
    bool ok = g.sum() >= demand.sum() - feas_tol;
    for (int i = 0; ok && i < n; ++i)
      ok = g(i) >= -feas_tol && g(i) <= net.generators[i].capacity + feas_tol;
    if (ok && l_count > 0) {
      const Eigen::VectorXd flow = net.ptdf * (g - demand);
      for (int l = 0; ok && l < l_count; ++l)
        ok = std::abs(flow(l)) <= net.lines[l].capacity + feas_tol;
    }
    if (!ok) continue;

    // Dual feasibility.
    if (s.balance && lambda < -dual_tol) continue;
    Eigen::VectorXd mu_upper = Eigen::VectorXd::Zero(l_count);
    Eigen::VectorXd mu_lower = Eigen::VectorXd::Zero(l_count);
    bool dual_ok = true;
    for (std::size_t k = 0; dual_ok && k < act_lines.size(); ++k) {
      const int l = act_lines[k];
      const double v = sol(col_mu + static_cast<int>(k));
      if (v < -dual_tol) dual_ok = false;
      (s.line_state[l] == 1 ? mu_upper(l) : mu_lower(l)) = std::max(v, 0.0);
    }
    Eigen::VectorXd eta_upper = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; dual_ok && k < act_gens.size(); ++k) {
      const int i = act_gens[k];
      const double v = sol(col_eta + static_cast<int>(k));
      if (v < -dual_tol) dual_ok = false;
      if (s.gen_state[i] == 2) eta_upper(i) = std::max(v, 0.0);
    }
    if (!dual_ok) continue;

    DispatchResult r;
    r.g = g.cwiseMax(0.0);
    for (int i = 0; i < n; ++i)
      r.g(i) = std::min(r.g(i), net.generators[i].capacity);
    r.lambda = std::max(lambda, 0.0);
    r.mu_upper = mu_upper;
    r.mu_lower = mu_lower;
    r.eta_upper = eta_upper;
    r.lmp = lmp_from_duals(net, r.lambda, r.mu_upper, r.mu_lower);
    r.objective = dispatch_objective(net, r.g);
    const double act_tol = 1e-7 * std::max(1.0, demand.cwiseAbs().maxCoeff());
    r.licq_violated = !licq_holds(net, demand, r.g, act_tol);
    return r;
  }
  throw InfeasibleError(
      "brute_force_ed: no KKT-consistent active set; problem infeasible");
}

LipschitzEstimate estimate_lipschitz(const grid::Network& net,
                                     const Eigen::VectorXd& base_demand,
                                     int n_samples, double radius,
                                     std::uint64_t seed) {
  check_inputs(net, base_demand);
  if (n_samples < 1) throw InputError("estimate_lipschitz: n_samples >= 1");
  if (radius < 0.0) throw InputError("estimate_lipschitz: radius >= 0");

  LipschitzEstimate est;
  for (int s = 0; s < n_samples; ++s) {
    auto stream = rng::Stream::keyed(seed, rng::Purpose::kLipschitz,
                                     static_cast<std::uint64_t>(s));
    const int axis = static_cast<int>(stream.uniform_index(net.n_buses));
    const double t1 = stream.uniform(-radius, radius);
    const double t2 = stream.uniform(-radius, radius);
    Eigen::VectorXd b1 = base_demand;
    Eigen::VectorXd b2 = base_demand;
    b1(axis) += t1;
    b2(axis) += t2;
    try {
      const DispatchResult r1 = solve_ed(net, b1);
      const DispatchResult r2 = solve_ed(net, b2);
      const double db = std::abs(t1 - t2);
      if (db == 0.0) {
        ++est.samples_used;  // identical pair contributes 0 by convention
        continue;
      }
      const double dlmp = (r1.lmp - r2.lmp).cwiseAbs().maxCoeff();
      est.value = std::max(est.value, dlmp / db);
      ++est.samples_used;
    } catch (const InfeasibleError&) {
      ++est.samples_skipped;
    }
  }
  return est;
}

}  // namespace mfgrid::dispatch
