#include "opflab/labeler.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace opflab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DispatchDecision unstack(const Eigen::VectorXd& x) { return DispatchDecision::from_stacked(x); }

}  // namespace

AugmentedLagrangian::AugmentedLagrangian(const NetworkCase& network, Loads loads, bool ignore_line_limits)
    : network_(network), loads_(std::move(loads)), ignore_lines_(ignore_line_limits) {
  const Eigen::Index n = network.bus_count();
  detail::require_size(loads_.p_d.size(), n, "p_d");
  detail::require_size(loads_.q_d.size(), n, "q_d");

  cost_scale_ = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (network.generator_at(i) < 0) continue;
    const double reach = std::max(std::abs(network.p_min()[i]), std::abs(network.p_max()[i]));
    cost_scale_ = std::max(cost_scale_, std::abs(network.cost_c1()[i]) + 2.0 * network.cost_c2()[i] * reach);
  }
  if (!(cost_scale_ > 0.0)) cost_scale_ = 1.0;

  lower_.resize(4 * n);
  upper_.resize(4 * n);
  lower_ << network.p_min(), network.q_min(), network.v_min(), Eigen::VectorXd::Constant(n, -kInf);
  upper_ << network.p_max(), network.q_max(), network.v_max(), Eigen::VectorXd::Constant(n, kInf);
  lower_[3 * n + network.slack_index()] = 0.0;
  upper_[3 * n + network.slack_index()] = 0.0;
}

Eigen::VectorXd AugmentedLagrangian::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower_).cwiseMin(upper_);
}

Eigen::VectorXd AugmentedLagrangian::equality_residual(const Eigen::VectorXd& x) const {
  const DispatchDecision d = unstack(x);
  const BranchFlows flows = branch_flows(network_, d.v, d.theta);
  const auto [rp, rq] = nodal_mismatch(network_, loads_, d, flows);
  Eigen::VectorXd h(2 * network_.bus_count());
  h << rp, rq;
  return h;
}

Eigen::VectorXd AugmentedLagrangian::inequality_residual(const Eigen::VectorXd& x) const {
  const DispatchDecision d = unstack(x);
  const BranchFlows flows = branch_flows(network_, d.v, d.theta);
  const Eigen::Index m = network_.branch_count();
  Eigen::VectorXd g(2 * m);
  for (Eigen::Index e = 0; e < m; ++e) {
    const double s_max = network_.branches()[static_cast<std::size_t>(e)].s_max;
    for (int o = 0; o < 2; ++o) {
      g[2 * e + o] = (ignore_lines_ || std::isinf(s_max)) ? -kInf
                                                           : std::hypot(flows.p_f(o, e), flows.q_f(o, e)) - s_max;
    }
  }
  return g;
}

double AugmentedLagrangian::value(const Eigen::VectorXd& x, const AugmentedState& state) const {
  Eigen::VectorXd unused;
  return value_and_gradient(x, state, unused);
}

double AugmentedLagrangian::value_and_gradient(const Eigen::VectorXd& x, const AugmentedState& state,
                                               Eigen::VectorXd& grad) const {
  const Eigen::Index n = network_.bus_count();
  const Eigen::Index m = network_.branch_count();
  const double c = state.penalty;
  const DispatchDecision d = unstack(x);
  const BranchFlows flows = branch_flows(network_, d.v, d.theta);
  const auto [rp, rq] = nodal_mismatch(network_, loads_, d, flows);

  grad = Eigen::VectorXd::Zero(4 * n);
  double value = generation_cost(network_, d.p_g) / cost_scale_;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (network_.generator_at(i) < 0) continue;
    grad[i] = (2.0 * network_.cost_c2()[i] * d.p_g[i] + network_.cost_c1()[i]) / cost_scale_;
  }

  // Equalities: y.h + c/2 |h|^2, weight on h is y + c h.
  const Eigen::VectorXd& y = state.eq_multipliers;
  const Eigen::VectorXd wp = y.head(n) + c * rp;
  const Eigen::VectorXd wq = y.tail(n) + c * rq;
  value += y.head(n).dot(rp) + y.tail(n).dot(rq) + 0.5 * c * (rp.squaredNorm() + rq.squaredNorm());
  grad.segment(0, n) += wp;
  grad.segment(n, n) += wq;

  Eigen::Matrix<double, 2, Eigen::Dynamic> d_pf(2, m), d_qf(2, m);
  for (Eigen::Index e = 0; e < m; ++e) {
    const Eigen::Index ends[2] = {network_.from_index(static_cast<std::size_t>(e)),
                                  network_.to_index(static_cast<std::size_t>(e))};
    for (int o = 0; o < 2; ++o) {
      d_pf(o, e) = -wp[ends[o]];
      d_qf(o, e) = -wq[ends[o]];
    }
  }

  // Flow limits, PHR form: (max(0, z + c g)^2 - z^2) / (2c).
  if (!ignore_lines_) {
    const Eigen::VectorXd& z = state.ineq_multipliers;
    for (Eigen::Index e = 0; e < m; ++e) {
      const double s_max = network_.branches()[static_cast<std::size_t>(e)].s_max;
      if (std::isinf(s_max)) continue;
      for (int o = 0; o < 2; ++o) {
        const double zk = z[2 * e + o];
        const double mag = std::hypot(flows.p_f(o, e), flows.q_f(o, e));
        const double shifted = std::max(0.0, zk + c * (mag - s_max));
        value += (shifted * shifted - zk * zk) / (2.0 * c);
        if (shifted > 0.0 && mag > 0.0) {
          d_pf(o, e) += shifted * flows.p_f(o, e) / mag;
          d_qf(o, e) += shifted * flows.q_f(o, e) / mag;
        }
      }
    }
  }

  Eigen::VectorXd d_v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd d_theta = Eigen::VectorXd::Zero(n);
  accumulate_flow_pullback(network_, d.v, d.theta, d_pf, d_qf, d_v, d_theta);
  grad.segment(2 * n, n) += d_v;
  grad.segment(3 * n, n) += d_theta;
  return value;
}

namespace {

// Partials of one oriented flow with respect to (V_i, V_j, theta_i, theta_j).
struct FlowPartials {
  std::array<double, 4> dp;
  std::array<double, 4> dq;
};

FlowPartials flow_partials(const Branch& br, double vi, double vj, double delta) {
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  const double a = br.g * c + br.b * s;
  const double k = br.g * s - br.b * c;
  FlowPartials out;
  out.dp = {2.0 * br.g * vi - vj * a, -vi * a, vi * vj * k, -vi * vj * k};
  out.dq = {-2.0 * br.b * vi - vj * k, -vi * k, -vi * vj * a, vi * vj * a};
  return out;
}

// Second partials of one oriented flow over (V_i, V_j, theta_i, theta_j).
struct FlowCurvature {
  double hp[4][4];
  double hq[4][4];
};

FlowCurvature flow_curvature(const Branch& br, double vi, double vj, double delta) {
  const double c = std::cos(delta);
  const double s = std::sin(delta);
  const double a = br.g * c + br.b * s;
  const double k = br.g * s - br.b * c;
  // In (V_i, V_j, delta): p_dd = vi vj a, q_dd = vi vj k; theta_j enters through -delta.
  const double p_vv[3][3] = {{2.0 * br.g, -a, vj * k}, {-a, 0.0, vi * k}, {vj * k, vi * k, vi * vj * a}};
  const double q_vv[3][3] = {{-2.0 * br.b, -k, -vj * a}, {-k, 0.0, -vi * a}, {-vj * a, -vi * a, vi * vj * k}};
  const int map[4] = {0, 1, 2, 2};
  const double sign[4] = {1.0, 1.0, 1.0, -1.0};
  FlowCurvature out;
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) {
      out.hp[r][col] = sign[r] * sign[col] * p_vv[map[r]][map[col]];
      out.hq[r][col] = sign[r] * sign[col] * q_vv[map[r]][map[col]];
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd AugmentedLagrangian::equality_jacobian(const Eigen::VectorXd& x) const {
  const Eigen::Index n = network_.bus_count();
  const DispatchDecision d = unstack(x);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * n, 4 * n);
  jac.block(0, 0, n, n).setIdentity();
  jac.block(n, n, n, n).setIdentity();
  for (Eigen::Index e = 0; e < network_.branch_count(); ++e) {
    const Branch& br = network_.branches()[static_cast<std::size_t>(e)];
    const Eigen::Index ends[2] = {network_.from_index(static_cast<std::size_t>(e)),
                                  network_.to_index(static_cast<std::size_t>(e))};
    for (int o = 0; o < 2; ++o) {
      const Eigen::Index i = ends[o];
      const Eigen::Index j = ends[1 - o];
      const FlowPartials fp = flow_partials(br, d.v[i], d.v[j], d.theta[i] - d.theta[j]);
      const Eigen::Index cols[4] = {2 * n + i, 2 * n + j, 3 * n + i, 3 * n + j};
      for (int k = 0; k < 4; ++k) {
        jac(i, cols[k]) -= fp.dp[static_cast<std::size_t>(k)];
        jac(n + i, cols[k]) -= fp.dq[static_cast<std::size_t>(k)];
      }
    }
  }
  return jac;
}

Eigen::MatrixXd AugmentedLagrangian::hessian(const Eigen::VectorXd& x, const AugmentedState& state) const {
  const Eigen::Index n = network_.bus_count();
  const double c = state.penalty;
  const Eigen::MatrixXd jac = equality_jacobian(x);
  Eigen::MatrixXd hess = c * (jac.transpose() * jac);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (network_.generator_at(i) >= 0) hess(i, i) += 2.0 * network_.cost_c2()[i] / cost_scale_;
  }

  const DispatchDecision d = unstack(x);
  const BranchFlows flows = branch_flows(network_, d.v, d.theta);
  const auto [rp, rq] = nodal_mismatch(network_, loads_, d, flows);
  const Eigen::VectorXd wp = state.eq_multipliers.head(n) + c * rp;
  const Eigen::VectorXd wq = state.eq_multipliers.tail(n) + c * rq;

  for (Eigen::Index e = 0; e < network_.branch_count(); ++e) {
    const Branch& br = network_.branches()[static_cast<std::size_t>(e)];
    const Eigen::Index ends[2] = {network_.from_index(static_cast<std::size_t>(e)),
                                  network_.to_index(static_cast<std::size_t>(e))};
    const bool limited = !ignore_lines_ && !std::isinf(br.s_max);
    for (int o = 0; o < 2; ++o) {
      const Eigen::Index i = ends[o];
      const Eigen::Index j = ends[1 - o];
      const double vi = d.v[i];
      const double vj = d.v[j];
      const FlowPartials fp = flow_partials(br, vi, vj, d.theta[i] - d.theta[j]);
      const FlowCurvature fc = flow_curvature(br, vi, vj, d.theta[i] - d.theta[j]);
      const Eigen::Index cols[4] = {2 * n + i, 2 * n + j, 3 * n + i, 3 * n + j};

      // Balance at bus i loses this flow: weight -w on its curvature.
      double wgt_p = -wp[i];
      double wgt_q = -wq[i];
      if (limited) {
        const double p = flows.p_f(o, e);
        const double q = flows.q_f(o, e);
        const double mag = std::hypot(p, q);
        const double shifted = state.ineq_multipliers[2 * e + o] + c * (mag - br.s_max);
        if (mag > 0.0 && shifted > 0.0) {
          std::array<double, 4> grad_mag;
          for (std::size_t k = 0; k < 4; ++k) grad_mag[k] = (p * fp.dp[k] + q * fp.dq[k]) / mag;
          // d2|S| = (dp dp' + dq dq' + p d2p + q d2q - d|S| d|S|') / |S|
          for (std::size_t a = 0; a < 4; ++a) {
            for (std::size_t b = 0; b < 4; ++b) {
              const double outer = (fp.dp[a] * fp.dp[b] + fp.dq[a] * fp.dq[b] - grad_mag[a] * grad_mag[b]) / mag;
              hess(cols[a], cols[b]) += c * grad_mag[a] * grad_mag[b] + shifted * outer;
            }
          }
          wgt_p += shifted * p / mag;
          wgt_q += shifted * q / mag;
        }
      }
      for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
          hess(cols[a], cols[b]) += wgt_p * fc.hp[a][b] + wgt_q * fc.hq[a][b];
        }
      }
    }
  }
  return hess;
}

namespace {

struct InnerResult {
  Eigen::VectorXd x;
  double stationarity = kInf;
  int iterations = 0;
};

double stationarity(const AugmentedLagrangian& al, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  return (al.project(x - g) - x).lpNorm<Eigen::Infinity>();
}

/// Nonmonotone spectral projected gradient (Birgin, Martinez, Raydan).
InnerResult minimize_inner(const AugmentedLagrangian& al, const AugmentedState& state, Eigen::VectorXd x,
                           int max_iter, double tol) {
  constexpr int kMemory = 10;
  constexpr double kArmijo = 1e-4;
  constexpr double kStepMin = 1e-12;
  constexpr double kStepMax = 1e12;

  InnerResult out;
  x = al.project(x);
  Eigen::VectorXd g;
  double f = al.value_and_gradient(x, state, g);
  std::deque<double> recent{f};
  double pg = stationarity(al, x, g);
  double step = std::clamp(1.0 / std::max(pg, 1e-300), kStepMin, kStepMax);

  Eigen::VectorXd g_new;
  for (; out.iterations < max_iter; ++out.iterations) {
    if (pg <= tol) break;
    const Eigen::VectorXd dir = al.project(x - step * g) - x;
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      // The spectral step lost descent; restart from a gradient-scaled step.
      step = std::clamp(1.0 / std::max(pg, 1e-300), kStepMin, kStepMax);
      continue;
    }
    const double f_ref = *std::max_element(recent.begin(), recent.end());
    double t = 1.0;
    Eigen::VectorXd x_new;
    double f_new = kInf;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      x_new = x + t * dir;
      f_new = al.value_and_gradient(x_new, state, g_new);
      if (f_new <= f_ref + kArmijo * t * slope) break;
      const double denom = f_new - f - t * slope;
      double t_next = denom > 0.0 ? -0.5 * t * t * slope / denom : 0.5 * t;
      t = std::clamp(t_next, 0.1 * t, 0.5 * t);
    }
    if (!std::isfinite(f_new)) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sty = s.dot(yv);
    step = sty > 0.0 ? std::clamp(s.squaredNorm() / sty, kStepMin, kStepMax) : kStepMax;
    x = std::move(x_new);
    g.swap(g_new);
    f = f_new;
    recent.push_back(f);
    if (recent.size() > kMemory) recent.pop_front();
    pg = stationarity(al, x, g);
  }
  out.stationarity = pg;
  out.x = std::move(x);
  return out;
}

/// Two-metric projected Newton (Bertsekas) on the exact Hessian, shifted
/// until positive definite on the free variables. Falls back to a burst of
/// spectral projected gradient steps whenever the Newton line search stalls.
InnerResult minimize_inner_newton(const AugmentedLagrangian& al, const AugmentedState& state, Eigen::VectorXd x,
                                  int max_iter, double tol) {
  constexpr double kArmijo = 1e-4;
  constexpr int kFallbackBurst = 25;
  const Eigen::Index dim = al.size();

  InnerResult out;
  x = al.project(x);
  Eigen::VectorXd g;
  double f = al.value_and_gradient(x, state, g);
  double shift = -1.0;

  while (out.iterations < max_iter) {
    const double pg = stationarity(al, x, g);
    if (pg <= tol) break;
    ++out.iterations;

    const double eps = std::min(1e-6, pg);
    std::vector<Eigen::Index> free_set;
    std::vector<bool> is_free(static_cast<std::size_t>(dim), false);
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double lo = al.lower()[k];
      const double hi = al.upper()[k];
      if (lo == hi) continue;
      if ((x[k] <= lo + eps && g[k] > 0.0) || (x[k] >= hi - eps && g[k] < 0.0)) continue;
      free_set.push_back(k);
      is_free[static_cast<std::size_t>(k)] = true;
    }

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(dim);
    if (!free_set.empty()) {
      const Eigen::MatrixXd hess = al.hessian(x, state);
      const auto m = static_cast<Eigen::Index>(free_set.size());
      Eigen::MatrixXd hf(m, m);
      Eigen::VectorXd gf(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        gf[a] = g[free_set[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < m; ++b) {
          hf(a, b) = hess(free_set[static_cast<std::size_t>(a)], free_set[static_cast<std::size_t>(b)]);
        }
      }
      const double scale = std::max(1.0, hf.diagonal().maxCoeff());
      if (shift < 0.0) shift = 1e-8 * scale;
      shift = std::clamp(shift, 1e-14 * scale, 1e4 * scale);
      Eigen::LLT<Eigen::MatrixXd> llt;
      for (int attempt = 0; attempt < 8; ++attempt) {
        llt.compute(hf + shift * Eigen::MatrixXd::Identity(m, m));
        if (llt.info() == Eigen::Success) break;
        shift *= 100.0;
      }
      const Eigen::VectorXd df = -llt.solve(gf);
      for (Eigen::Index a = 0; a < m; ++a) dir[free_set[static_cast<std::size_t>(a)]] = df[a];
    }
    // Bound-active coordinates move along the plain gradient.
    for (Eigen::Index k = 0; k < dim; ++k) {
      if (!is_free[static_cast<std::size_t>(k)]) dir[k] = -g[k];
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, g_new;
    double f_new = kInf;
    for (int backtrack = 0; backtrack < 30; ++backtrack) {
      x_new = al.project(x + t * dir);
      f_new = al.value_and_gradient(x_new, state, g_new);
      double decrease = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        decrease += is_free[static_cast<std::size_t>(k)] ? t * g[k] * dir[k] : g[k] * (x_new[k] - x[k]);
      }
      if (std::isfinite(f_new) && f_new <= f + kArmijo * decrease) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }

    if (accepted && (x_new - x).lpNorm<Eigen::Infinity>() > 0.0) {
      shift = t == 1.0 ? shift * 0.1 : shift * 4.0;
      x = std::move(x_new);
      g = std::move(g_new);
      f = f_new;
      continue;
    }
    shift = shift * 100.0;
    InnerResult burst = minimize_inner(al, state, x, std::min(kFallbackBurst, max_iter - out.iterations), tol);
    out.iterations += burst.iterations;
    if ((burst.x - x).lpNorm<Eigen::Infinity>() == 0.0) break;
    x = std::move(burst.x);
    f = al.value_and_gradient(x, state, g);
  }
  out.stationarity = stationarity(al, x, g);
  out.x = std::move(x);
  return out;
}

struct StartResult {
  Eigen::VectorXd x;
  bool converged = false;
  double residual = kInf;
  int iterations = 0;
  AugmentedState state;
};

StartResult solve_from(const AugmentedLagrangian& al, Eigen::VectorXd x, const SolverConfig& config, Eigen::Index n,
                       Eigen::Index m) {
  StartResult out;
  AugmentedState state{Eigen::VectorXd::Zero(2 * n), Eigen::VectorXd::Zero(2 * m), config.penalty_init,
                       al.cost_scale()};
  double previous = kInf;
  double inner_tol = std::max(config.opt_tol, 1e-3);
  int stalled = 0;
  for (int outer = 0; outer < config.max_outer; ++outer) {
    InnerResult inner = minimize_inner_newton(al, state, std::move(x), config.max_inner, inner_tol);
    x = std::move(inner.x);
    out.iterations += inner.iterations;

    const Eigen::VectorXd h = al.equality_residual(x);
    const Eigen::VectorXd g = al.inequality_residual(x);
    const double infeasibility = std::max(h.lpNorm<Eigen::Infinity>(), std::max(0.0, g.size() ? g.maxCoeff() : 0.0));
    out.residual = infeasibility;
    out.state = state;
    if (infeasibility <= config.feas_tol && inner.stationarity <= config.opt_tol) {
      out.converged = true;
      break;
    }
    // A start stuck at a locally infeasible point stops once the penalty is
    // maxed out and the residual no longer moves.
    stalled = (state.penalty >= config.penalty_max && infeasibility > 0.9 * previous) ? stalled + 1 : 0;
    if (stalled >= 3) break;

    state.eq_multipliers += state.penalty * h;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      state.ineq_multipliers[k] = std::max(0.0, state.ineq_multipliers[k] + state.penalty * g[k]);
    }
    if (infeasibility > 0.25 * previous) {
      state.penalty = std::min(state.penalty * config.penalty_growth, config.penalty_max);
    }
    previous = infeasibility;
    inner_tol = std::max(config.opt_tol, 0.1 * inner_tol);
  }
  // Angles only matter modulo 2 pi; report them in [-pi, pi].
  for (Eigen::Index i = 3 * n; i < 4 * n; ++i) x[i] = std::remainder(x[i], 2.0 * std::numbers::pi);
  out.x = std::move(x);
  return out;
}

Eigen::VectorXd starting_point(const NetworkCase& network, const AugmentedLagrangian& al, std::uint64_t seed,
                               int start) {
  const Eigen::Index n = network.bus_count();
  Eigen::VectorXd x(4 * n);
  if (start == 0) {
    x << 0.5 * (network.p_min() + network.p_max()), 0.5 * (network.q_min() + network.q_max()),
        Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n);
    return al.project(x);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(start)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index k = 0; k < 3 * n; ++k) {
    x[k] = al.lower()[k] + unit(rng) * (al.upper()[k] - al.lower()[k]);
  }
  for (Eigen::Index k = 3 * n; k < 4 * n; ++k) x[k] = -0.5 + unit(rng);
  return al.project(x);
}

}  // namespace

namespace {

void check_solvable(const NetworkCase& network, const Loads& loads, const SolverConfig& config) {
  const Eigen::Index n = network.bus_count();
  detail::require_size(loads.p_d.size(), n, "p_d");
  detail::require_size(loads.q_d.size(), n, "q_d");
  if (network.slack_index() < 0) throw PreconditionError("case has no slack bus");
  if (config.starts < 1) throw PreconditionError("solver needs at least one start");
  if (network.p_max().sum() < loads.p_d.sum()) {
    throw InfeasibleProblem("total generation capacity " + std::to_string(network.p_max().sum()) +
                            " p.u. is below total load " + std::to_string(loads.p_d.sum()) + " p.u.");
  }
}

}  // namespace

std::vector<SolveOutcome> solve_opf_starts(const NetworkCase& network, const Loads& loads, const SolverConfig& config,
                                           std::uint64_t seed) {
  check_solvable(network, loads, config);
  const AugmentedLagrangian al(network, loads, config.ignore_line_limits);
  std::vector<SolveOutcome> out;
  for (int start = 0; start < config.starts; ++start) {
    const auto t0 = std::chrono::steady_clock::now();
    StartResult r = solve_from(al, starting_point(network, al, seed, start), config, network.bus_count(),
                               network.branch_count());
    SolveOutcome o;
    o.decision = unstack(r.x);
    o.converged = r.converged;
    o.iterations = r.iterations;
    o.final_residual = r.residual;
    o.objective = generation_cost(network, o.decision.p_g);
    o.start_index = start;
    o.state = std::move(r.state);
    o.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(o));
  }
  return out;
}

SolveOutcome solve_opf_local(const NetworkCase& network, const Loads& loads, const SolverConfig& config,
                             std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<SolveOutcome> starts = solve_opf_starts(network, loads, config, seed);
  std::size_t best = 0;
  int total_iterations = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    total_iterations += starts[k].iterations;
    const SolveOutcome& a = starts[k];
    const SolveOutcome& b = starts[best];
    if (a.converged != b.converged) {
      if (a.converged) best = k;
    } else if (a.converged ? a.objective < b.objective : a.final_residual < b.final_residual) {
      best = k;
    }
  }
  SolveOutcome out = std::move(starts[best]);
  out.iterations = total_iterations;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

FeasibilityResult verify_feasibility(const NetworkCase& network, const Loads& loads, const DispatchDecision& decision,
                                     double tol, bool ignore_line_limits) {
  FeasibilityResult out;
  out.report = violation_report(network, loads, decision);
  if (ignore_line_limits) out.report.sigma_f.setZero();
  out.pass = out.report.max_entry() <= tol;
  return out;
}

double regret(const NetworkCase& network, const DispatchDecision& predicted, const SolveOutcome& baseline) {
  if (!baseline.converged) throw PreconditionError("regret needs a converged baseline");
  return generation_cost(network, predicted.p_g) - baseline.objective;
}

}  // namespace opflab
