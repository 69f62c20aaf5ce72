#include "mfgrid/value_function.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "mfgrid/common.hpp"

namespace mfgrid::vf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-solve geometry. The action grid is uniform on [-e, 1-e], so the
// landing positions k/(A-1) and their snapped grid indices are the same for
// every starting SoC; only the action value a = u_k - e depends on e.
struct Geometry {
  int soc_points = 0;
  int hours = 0;
  int action_points = 0;
  std::vector<double> landing;    // u_k = k/(A-1)
  std::vector<int> landing_idx;   // round(u_k * (G-1))
  std::vector<double> soc;        // e_i = i/(G-1)
  std::vector<int> charge_start;  // first k with u_k >= e_i

  void init(int g, int h, int a) {
    soc_points = g;
    hours = h;
    action_points = a;
    landing.resize(a);
    landing_idx.resize(a);
    const double da = 1.0 / (a - 1);
    const double gm1 = static_cast<double>(g - 1);
    for (int k = 0; k < a; ++k) {
      landing[k] = k * da;
      landing_idx[k] = static_cast<int>(std::lround(landing[k] * gm1));
    }
    soc.resize(g);
    charge_start.resize(g);
    const double dg = 1.0 / (g - 1);
    int k0 = 0;
    for (int i = 0; i < g; ++i) {
      soc[i] = i * dg;
      while (k0 < a && landing[k0] < soc[i]) ++k0;
      charge_start[i] = k0;
    }
  }
};

struct Workspace {
  Geometry geom;
  std::vector<double> cont;  // discounted continuation per landing point
  std::vector<double> val;   // scratch action values for one state
  std::vector<double> next_v;
  std::vector<double> rew;       // H x G reward along a fixed policy
  std::vector<int> nxt;          // H x G landing index along a fixed policy
  std::vector<double> acc;       // day-composed discounted reward
  std::vector<int> day_end;      // day-composed end state
  std::vector<int> color;
  std::vector<int> path;
};

thread_local Workspace tls_ws;

// Fills val[0..A) with reward(a_k) + cont[k] for the state with SoC e and
// charge branch starting at k0. Two branchless loops so the compiler can
// vectorize; the division in the charge branch is the price of the
// rate-dependent efficiency.
inline void action_values(const Geometry& g, const double* cont, double e,
                          int k0, double price,
                          const prosumer::EfficiencyParams& eff,
                          double* val) {
  const int a_count = g.action_points;
  const double* u = g.landing.data();
  const double pa0 = price * eff.alpha0;
  const double pad = price * eff.alpha_d;
  for (int k = 0; k < k0; ++k) {
    const double t = u[k] - e;  // t < 0, discharging
    val[k] = cont[k] - t * (pa0 + pad * t);
  }
  for (int k = k0; k < a_count; ++k) {
    const double t = u[k] - e;  // t >= 0, charging
    val[k] = cont[k] - price * t / (eff.alpha0 - eff.alpha_c * t);
  }
}

inline double max_of(const double* val, int n) {
  double m0 = kNegInf, m1 = kNegInf, m2 = kNegInf, m3 = kNegInf;
  int k = 0;
  for (; k + 4 <= n; k += 4) {
    m0 = std::max(m0, val[k]);
    m1 = std::max(m1, val[k + 1]);
    m2 = std::max(m2, val[k + 2]);
    m3 = std::max(m3, val[k + 3]);
  }
  for (; k < n; ++k) m0 = std::max(m0, val[k]);
  return std::max(std::max(m0, m1), std::max(m2, m3));
}

void fill_continuation(const Geometry& g, const double* v_next,
                       double discount, double* cont) {
  for (int k = 0; k < g.action_points; ++k)
    cont[k] = discount * v_next[g.landing_idx[k]];
}

// One in-place Gauss-Seidel sweep through the cyclic day, hours processed
// backward so each hour sees this sweep's update of its successor. Returns
// the sup-norm change.
double vi_sweep(Workspace& ws, const std::vector<double>& beliefs,
                const prosumer::EfficiencyParams& eff, double discount,
                std::vector<double>& v) {
  const Geometry& g = ws.geom;
  double residual = 0.0;
  for (int h = g.hours - 1; h >= 0; --h) {
    const double* v_next = v.data() + static_cast<std::size_t>(
                                          (h + 1) % g.hours) * g.soc_points;
    fill_continuation(g, v_next, discount, ws.cont.data());
    double* row = v.data() + static_cast<std::size_t>(h) * g.soc_points;
    for (int i = 0; i < g.soc_points; ++i) {
      action_values(g, ws.cont.data(), g.soc[i], g.charge_start[i],
                    beliefs[h], eff, ws.val.data());
      const double m = max_of(ws.val.data(), g.action_points);
      residual = std::max(residual, std::abs(m - row[i]));
      row[i] = m;
    }
  }
  return residual;
}

// Synchronous Bellman application against a frozen table: new values and
// greedy policy. Returns the sup-norm Bellman residual and whether the
// greedy policy differs from `policy`.
struct ImproveOutcome {
  double residual = 0.0;
  bool policy_changed = false;
};

ImproveOutcome improve(Workspace& ws, const std::vector<double>& beliefs,
                       const prosumer::EfficiencyParams& eff, double discount,
                       const std::vector<double>& v,
                       std::vector<std::uint16_t>& policy,
                       std::vector<double>& v_out) {
  const Geometry& g = ws.geom;
  ImproveOutcome out;
  for (int h = g.hours - 1; h >= 0; --h) {
    const double* v_next = v.data() + static_cast<std::size_t>(
                                          (h + 1) % g.hours) * g.soc_points;
    fill_continuation(g, v_next, discount, ws.cont.data());
    const double* v_row = v.data() + static_cast<std::size_t>(h) * g.soc_points;
    double* out_row =
        v_out.data() + static_cast<std::size_t>(h) * g.soc_points;
    std::uint16_t* pol_row =
        policy.data() + static_cast<std::size_t>(h) * g.soc_points;
    for (int i = 0; i < g.soc_points; ++i) {
      action_values(g, ws.cont.data(), g.soc[i], g.charge_start[i],
                    beliefs[h], eff, ws.val.data());
      const double m = max_of(ws.val.data(), g.action_points);
      int best = 0;
      while (ws.val[best] != m) ++best;
      out_row[i] = m;
      out.residual = std::max(out.residual, std::abs(m - v_row[i]));
      if (pol_row[i] != best) {
        pol_row[i] = static_cast<std::uint16_t>(best);
        out.policy_changed = true;
      }
    }
  }
  return out;
}

// Exact evaluation of a fixed stationary policy on the cyclic day. The
// one-day composition turns each SoC node into a functional graph; cycle
// values come in closed form, tree nodes by back-substitution.
void evaluate_policy(Workspace& ws, const std::vector<double>& beliefs,
                     const prosumer::EfficiencyParams& eff, double discount,
                     const std::vector<std::uint16_t>& policy,
                     std::vector<double>& v) {
  const Geometry& g = ws.geom;
  const int gp = g.soc_points;
  const int hours = g.hours;

  for (int h = 0; h < hours; ++h) {
    const double price = beliefs[h];
    for (int i = 0; i < gp; ++i) {
      const int k = policy[static_cast<std::size_t>(h) * gp + i];
      const double a = g.landing[k] - g.soc[i];
      ws.rew[static_cast<std::size_t>(h) * gp + i] =
          prosumer::reward_kernel(a, price, eff);
      ws.nxt[static_cast<std::size_t>(h) * gp + i] = g.landing_idx[k];
    }
  }

  // Compose one day starting at hour 0.
  for (int i = 0; i < gp; ++i) {
    double acc = 0.0;
    double bf = 1.0;
    int x = i;
    for (int h = 0; h < hours; ++h) {
      acc += bf * ws.rew[static_cast<std::size_t>(h) * gp + x];
      x = ws.nxt[static_cast<std::size_t>(h) * gp + x];
      bf *= discount;
    }
    ws.acc[i] = acc;
    ws.day_end[i] = x;
  }
  const double gamma = std::pow(discount, hours);

  // V0(i) = acc(i) + gamma * V0(end(i)) over the functional graph `day_end`.
  double* v0 = v.data();
  std::fill(ws.color.begin(), ws.color.end(), 0);
  for (int start = 0; start < gp; ++start) {
    if (ws.color[start] == 2) continue;
    ws.path.clear();
    int x = start;
    while (ws.color[x] == 0) {
      ws.color[x] = 1;
      ws.path.push_back(x);
      x = ws.day_end[x];
    }
    if (ws.color[x] == 1) {
      // Found a new cycle; locate it on the path and solve it in closed form.
      std::size_t pos = ws.path.size();
      while (pos > 0 && ws.path[pos - 1] != x) --pos;
      --pos;
      const std::size_t cyc_len = ws.path.size() - pos;
      const double denom = 1.0 - std::pow(gamma, static_cast<double>(cyc_len));
      for (std::size_t j = pos; j < ws.path.size(); ++j) {
        double sum = 0.0;
        double bf = 1.0;
        int y = ws.path[j];
        for (std::size_t m = 0; m < cyc_len; ++m) {
          sum += bf * ws.acc[y];
          y = ws.day_end[y];
          bf *= gamma;
        }
        v0[ws.path[j]] = sum / denom;
        ws.color[ws.path[j]] = 2;
      }
      ws.path.resize(pos);
    }
    // Back-substitute the tree part of the path.
    for (std::size_t j = ws.path.size(); j-- > 0;) {
      const int y = ws.path[j];
      v0[y] = ws.acc[y] + gamma * v0[ws.day_end[y]];
      ws.color[y] = 2;
    }
  }

  // Remaining hours by one backward pass; hour H wraps to the solved V0.
  for (int h = hours - 1; h >= 1; --h) {
    const double* v_next =
        v.data() + static_cast<std::size_t>((h + 1) % hours) * gp;
    double* row = v.data() + static_cast<std::size_t>(h) * gp;
    for (int i = 0; i < gp; ++i) {
      row[i] = ws.rew[static_cast<std::size_t>(h) * gp + i] +
               discount * v_next[ws.nxt[static_cast<std::size_t>(h) * gp + i]];
    }
  }
}

void validate_inputs(const std::vector<double>& beliefs,
                     const prosumer::EfficiencyParams& eff, double discount,
                     int soc_points, const SolveConfig& config) {
  if (beliefs.empty())
    throw InputError("solve_value_function: empty belief vector");
  for (double p : beliefs)
    if (!std::isfinite(p))
      throw InputError("solve_value_function: non-finite belief");
  if (!(discount > 0.0 && discount < 1.0))
    throw InputError("solve_value_function: discount must lie in (0, 1)");
  if (soc_points < 2)
    throw InputError("solve_value_function: need at least 2 SoC grid points");
  if (config.action_points < 2)
    throw InputError("solve_value_function: need at least 2 action points");
  if (!(config.tolerance > 0.0))
    throw InputError("solve_value_function: tolerance must be positive");
  if (!(eff.alpha0 > 0.0 && eff.alpha0 < 1.0 && eff.alpha_c >= 0.0 &&
        eff.alpha_d >= 0.0 && eff.alpha0 - eff.alpha_c > 0.0 &&
        eff.alpha0 - eff.alpha_d > 0.0))
    throw InputError("solve_value_function: invalid efficiency parameters");
}

}  // namespace

ValueFunction solve_value_function(const std::vector<double>& beliefs,
                                   const prosumer::EfficiencyParams& eff,
                                   double discount, int soc_points,
                                   const SolveConfig& config,
                                   const ValueFunction* warm_start) {
  validate_inputs(beliefs, eff, discount, soc_points, config);
  const int hours = static_cast<int>(beliefs.size());
  const int gp = soc_points;
  const int ap = config.action_points;
  const std::size_t table = static_cast<std::size_t>(gp) * hours;

  Workspace& ws = tls_ws;
  ws.geom.init(gp, hours, ap);
  ws.cont.resize(ap);
  ws.val.resize(ap);
  ws.next_v.resize(table);
  ws.rew.resize(table);
  ws.nxt.resize(table);
  ws.acc.resize(gp);
  ws.day_end.resize(gp);
  ws.color.resize(gp);
  ws.path.reserve(gp);

  ValueFunction out;
  out.soc_points = gp;
  out.hours = hours;
  out.action_points = ap;
  out.discount = discount;
  out.values.assign(table, 0.0);
  out.policy.assign(table, 0);

  const bool warm_usable = warm_start && !warm_start->empty() &&
                           warm_start->soc_points == gp &&
                           warm_start->hours == hours &&
                           warm_start->action_points == ap;

  if (config.accelerate) {
    if (warm_usable) {
      out.policy = warm_start->policy;
    } else {
      // Myopic greedy policy as the cold start.
      std::vector<double> zero(table, 0.0);
      improve(ws, beliefs, eff, discount, zero, out.policy, ws.next_v);
    }
    const int max_pi = 200;
    for (int it = 0; it < max_pi; ++it) {
      evaluate_policy(ws, beliefs, eff, discount, out.policy, out.values);
      const ImproveOutcome o = improve(ws, beliefs, eff, discount, out.values,
                                       out.policy, ws.next_v);
      out.policy_iterations = it + 1;
      out.bellman_residual = o.residual;
      // The evaluation step is exact, so the synchronous residual doubles
      // as the optimality certificate.
      if (!o.policy_changed || o.residual <= config.tolerance) break;
    }
    if (out.bellman_residual <= config.tolerance) return out;
    // Tie-induced policy flipping or an extreme tolerance; fall through to
    // value-iteration sweeps from the current table.
  }

  int sweeps = 0;
  double target = config.tolerance;
  while (true) {
    double res = 0.0;
    do {
      res = vi_sweep(ws, beliefs, eff, discount, out.values);
      out.sweep_residuals.push_back(res);
      if (++sweeps > config.max_sweeps)
        throw SolverError(
            "solve_value_function: no convergence within " +
            std::to_string(config.max_sweeps) + " sweeps");
    } while (res > target);
    // Certify with a synchronous Bellman application.
    const ImproveOutcome o = improve(ws, beliefs, eff, discount, out.values,
                                     out.policy, ws.next_v);
    out.bellman_residual = o.residual;
    if (o.residual <= config.tolerance) break;
    target *= 0.5 * config.tolerance / o.residual;
  }
  return out;
}

double optimal_action(const ValueFunction& vf, double e, int hour,
                      double price_now,
                      const prosumer::EfficiencyParams& eff) {
  if (vf.empty()) throw InputError("optimal_action: unsolved value function");
  if (hour < 0 || hour >= vf.hours)
    throw InputError("optimal_action: hour out of range");
  if (!(e >= 0.0 && e <= 1.0))
    throw InputError("optimal_action: SoC outside [0, 1]");

  const int ap = vf.action_points;
  const int gp = vf.soc_points;
  const double da = 1.0 / (ap - 1);
  const double gm1 = static_cast<double>(gp - 1);
  const double* v_next =
      vf.values.data() +
      static_cast<std::size_t>((hour + 1) % vf.hours) * gp;

  double best_val = kNegInf;
  double best_a = 0.0;
  for (int k = 0; k < ap; ++k) {
    const double landing = k * da;
    const double a = landing - e;  // spans [-e, 1-e] exactly
    const int j = static_cast<int>(std::lround(landing * gm1));
    const double val =
        prosumer::reward_kernel(a, price_now, eff) + vf.discount * v_next[j];
    bool take = val > best_val;
    if (val == best_val) {
      const double mag = std::abs(a);
      const double best_mag = std::abs(best_a);
      take = mag < best_mag || (mag == best_mag && a < best_a);
    }
    if (take) {
      best_val = val;
      best_a = a;
    }
  }
  return best_a;
}

}  // namespace mfgrid::vf
