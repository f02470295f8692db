// Branch flows, nodal balance residuals, bound excesses and generation cost.
//
// Everything here is a pure function templated on the scalar type, so the same
// kernel runs in double for training and in long double for reference checks.
// No tolerances are applied; callers decide what counts as feasible.
#ifndef OPFLAB_POWERFLOW_HPP
#define OPFLAB_POWERFLOW_HPP

#include "opflab/error.hpp"
#include "opflab/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace opflab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct DispatchDecisionT {
  VectorX<Scalar> p_g;
  VectorX<Scalar> q_g;
  VectorX<Scalar> v;
  VectorX<Scalar> theta;

  Eigen::Index size() const { return p_g.size(); }

  /// (p_g, q_g, v, theta) stacked into one 4N vector.
  VectorX<Scalar> stacked() const {
    VectorX<Scalar> out(4 * size());
    out << p_g, q_g, v, theta;
    return out;
  }

  static DispatchDecisionT from_stacked(const VectorX<Scalar>& y) {
    const Eigen::Index n = y.size() / 4;
    return {y.segment(0, n), y.segment(n, n), y.segment(2 * n, n), y.segment(3 * n, n)};
  }
};
using DispatchDecision = DispatchDecisionT<double>;

template <typename Scalar>
struct LoadsT {
  VectorX<Scalar> p_d;
  VectorX<Scalar> q_d;

  /// Feature vector x = (p_d, q_d).
  VectorX<Scalar> features() const {
    VectorX<Scalar> x(p_d.size() + q_d.size());
    x << p_d, q_d;
    return x;
  }

  static LoadsT from_features(const VectorX<Scalar>& x) {
    const Eigen::Index n = x.size() / 2;
    return {x.head(n), x.tail(n)};
  }
};
using Loads = LoadsT<double>;

inline Loads nominal_loads(const NetworkCase& network) {
  return {network.p_load(), network.q_load()};
}

/// Row 0 holds the from->to orientation, row 1 the to->from orientation.
template <typename Scalar>
struct BranchFlowsT {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> p_f;
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> q_f;
};
using BranchFlows = BranchFlowsT<double>;

template <typename Scalar>
struct BoundExcessT {
  VectorX<Scalar> v_excess;
  /// Active plus reactive excess at each bus.
  VectorX<Scalar> gen_excess;
};
using BoundExcess = BoundExcessT<double>;

template <typename Scalar>
struct ViolationReportT {
  VectorX<Scalar> sigma_f;
  VectorX<Scalar> sigma_p;
  VectorX<Scalar> sigma_q;
  VectorX<Scalar> v_excess;
  VectorX<Scalar> gen_excess;

  Scalar max_flow() const { return sigma_f.size() ? sigma_f.maxCoeff() : Scalar(0); }
  Scalar max_balance() const {
    return std::max(sigma_p.size() ? sigma_p.maxCoeff() : Scalar(0),
                    sigma_q.size() ? sigma_q.maxCoeff() : Scalar(0));
  }
  Scalar max_bounds() const {
    return std::max(v_excess.size() ? v_excess.maxCoeff() : Scalar(0),
                    gen_excess.size() ? gen_excess.maxCoeff() : Scalar(0));
  }
  Scalar max_entry() const { return std::max({max_flow(), max_balance(), max_bounds()}); }
};
using ViolationReport = ViolationReportT<double>;

namespace detail {

inline void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + " has length " + std::to_string(got) +
                         ", expected " + std::to_string(want));
  }
}

template <typename Scalar>
void require_decision(const NetworkCase& network, const DispatchDecisionT<Scalar>& d) {
  const Eigen::Index n = network.bus_count();
  require_size(d.p_g.size(), n, "p_g");
  require_size(d.q_g.size(), n, "q_g");
  require_size(d.v.size(), n, "v");
  require_size(d.theta.size(), n, "theta");
}

}  // namespace detail

/// Directed flows on every branch, both orientations:
///   p_ij = g V_i^2 - V_i V_j (g cos d + b sin d)
///   q_ij = -b V_i^2 - V_i V_j (g sin d - b cos d),   d = theta_i - theta_j
template <typename DerivedV, typename DerivedT>
BranchFlowsT<typename DerivedV::Scalar> branch_flows(const NetworkCase& network,
                                                     const Eigen::MatrixBase<DerivedV>& v,
                                                     const Eigen::MatrixBase<DerivedT>& theta) {
  using Scalar = typename DerivedV::Scalar;
  detail::require_size(v.size(), network.bus_count(), "v");
  detail::require_size(theta.size(), network.bus_count(), "theta");
  const Eigen::Index m = network.branch_count();
  BranchFlowsT<Scalar> flows{Eigen::Matrix<Scalar, 2, Eigen::Dynamic>(2, m),
                             Eigen::Matrix<Scalar, 2, Eigen::Dynamic>(2, m)};
  for (Eigen::Index e = 0; e < m; ++e) {
    const auto& br = network.branches()[static_cast<std::size_t>(e)];
    const Scalar g(br.g);
    const Scalar b(br.b);
    const Eigen::Index ends[2] = {network.from_index(static_cast<std::size_t>(e)),
                                  network.to_index(static_cast<std::size_t>(e))};
    for (int o = 0; o < 2; ++o) {
      const Eigen::Index i = ends[o];
      const Eigen::Index j = ends[1 - o];
      const Scalar d = theta[i] - theta[j];
      const Scalar c = std::cos(d);
      const Scalar s = std::sin(d);
      const Scalar vv = v[i] * v[j];
      flows.p_f(o, e) = g * v[i] * v[i] - vv * (g * c + b * s);
      flows.q_f(o, e) = -b * v[i] * v[i] - vv * (g * s - b * c);
    }
  }
  return flows;
}

/// Vector-Jacobian product of branch_flows: given d(loss)/d(p_f) and
/// d(loss)/d(q_f), adds d(loss)/dV and d(loss)/dtheta into d_v and d_theta.
template <typename Scalar>
void accumulate_flow_pullback(const NetworkCase& network, const VectorX<Scalar>& v, const VectorX<Scalar>& theta,
                              const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& d_pf,
                              const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& d_qf, VectorX<Scalar>& d_v,
                              VectorX<Scalar>& d_theta) {
  for (Eigen::Index e = 0; e < network.branch_count(); ++e) {
    const auto& br = network.branches()[static_cast<std::size_t>(e)];
    const Scalar g(br.g);
    const Scalar b(br.b);
    const Eigen::Index ends[2] = {network.from_index(static_cast<std::size_t>(e)),
                                  network.to_index(static_cast<std::size_t>(e))};
    for (int o = 0; o < 2; ++o) {
      const Scalar wp = d_pf(o, e);
      const Scalar wq = d_qf(o, e);
      if (wp == Scalar(0) && wq == Scalar(0)) continue;
      const Eigen::Index i = ends[o];
      const Eigen::Index j = ends[1 - o];
      const Scalar d = theta[i] - theta[j];
      const Scalar c = std::cos(d);
      const Scalar s = std::sin(d);
      const Scalar a = g * c + b * s;
      const Scalar k = g * s - b * c;
      // p = g vi^2 - vi vj a,  q = -b vi^2 - vi vj k,  da/dd = -k,  dk/dd = a
      d_v[i] += wp * (Scalar(2) * g * v[i] - v[j] * a) + wq * (Scalar(-2) * b * v[i] - v[j] * k);
      d_v[j] += wp * (-v[i] * a) + wq * (-v[i] * k);
      const Scalar dd = wp * (v[i] * v[j] * k) + wq * (-v[i] * v[j] * a);
      d_theta[i] += dd;
      d_theta[j] -= dd;
    }
  }
}

/// sigma_f = max(|S| - s_max, 0), using the worse of the two orientations.
template <typename Scalar>
VectorX<Scalar> line_flow_violation(const BranchFlowsT<Scalar>& flows, const NetworkCase& network) {
  detail::require_size(flows.p_f.cols(), network.branch_count(), "flows");
  VectorX<Scalar> sigma(network.branch_count());
  for (Eigen::Index e = 0; e < sigma.size(); ++e) {
    const Scalar s_max(network.branches()[static_cast<std::size_t>(e)].s_max);
    Scalar worst(0);
    for (int o = 0; o < 2; ++o) {
      const Scalar mag = std::sqrt(flows.p_f(o, e) * flows.p_f(o, e) + flows.q_f(o, e) * flows.q_f(o, e));
      worst = std::max(worst, mag - s_max);
    }
    sigma[e] = worst;
  }
  return sigma;
}

/// Signed nodal mismatch r_i = gen_i - load_i - sum of flows leaving bus i.
template <typename Scalar>
std::pair<VectorX<Scalar>, VectorX<Scalar>> nodal_mismatch(const NetworkCase& network,
                                                          const LoadsT<Scalar>& loads,
                                                          const DispatchDecisionT<Scalar>& decision,
                                                          const BranchFlowsT<Scalar>& flows) {
  detail::require_decision(network, decision);
  detail::require_size(loads.p_d.size(), network.bus_count(), "p_d");
  detail::require_size(loads.q_d.size(), network.bus_count(), "q_d");
  detail::require_size(flows.p_f.cols(), network.branch_count(), "flows");
  VectorX<Scalar> rp = decision.p_g - loads.p_d;
  VectorX<Scalar> rq = decision.q_g - loads.q_d;
  for (Eigen::Index e = 0; e < network.branch_count(); ++e) {
    const auto f = network.from_index(static_cast<std::size_t>(e));
    const auto t = network.to_index(static_cast<std::size_t>(e));
    rp[f] -= flows.p_f(0, e);
    rq[f] -= flows.q_f(0, e);
    rp[t] -= flows.p_f(1, e);
    rq[t] -= flows.q_f(1, e);
  }
  return {std::move(rp), std::move(rq)};
}

/// (sigma_p, sigma_q): absolute nodal active and reactive mismatch per bus.
template <typename Scalar>
std::pair<VectorX<Scalar>, VectorX<Scalar>> balance_residuals(const NetworkCase& network,
                                                             const LoadsT<Scalar>& loads,
                                                             const DispatchDecisionT<Scalar>& decision,
                                                             const BranchFlowsT<Scalar>& flows) {
  auto [rp, rq] = nodal_mismatch(network, loads, decision, flows);
  return {rp.cwiseAbs(), rq.cwiseAbs()};
}

/// Balance residuals against the case's nominal loads.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> balance_residuals(const NetworkCase& network,
                                                                     const DispatchDecision& decision,
                                                                     const BranchFlows& flows) {
  return balance_residuals(network, nominal_loads(network), decision, flows);
}

/// Sum over buses of c2 p^2 + c1 p + c0 ($/h). Non-generator buses carry zero cost.
template <typename Derived>
typename Derived::Scalar generation_cost(const NetworkCase& network, const Eigen::MatrixBase<Derived>& p_g) {
  using Scalar = typename Derived::Scalar;
  detail::require_size(p_g.size(), network.bus_count(), "p_g");
  Scalar total(0);
  for (Eigen::Index i = 0; i < p_g.size(); ++i) {
    if (network.generator_at(i) < 0) continue;
    total += Scalar(network.cost_c2()[i]) * p_g[i] * p_g[i] + Scalar(network.cost_c1()[i]) * p_g[i] +
             Scalar(network.cost_c0()[i]);
  }
  return total;
}

/// Elementwise max(x - x_max, 0) + max(x_min - x, 0) for V and for p_g + q_g.
template <typename Scalar>
BoundExcessT<Scalar> bound_excess(const NetworkCase& network, const DispatchDecisionT<Scalar>& d) {
  detail::require_decision(network, d);
  auto excess = [](const VectorX<Scalar>& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const VectorX<Scalar> l = lo.cast<Scalar>();
    const VectorX<Scalar> h = hi.cast<Scalar>();
    return VectorX<Scalar>((x - h).cwiseMax(Scalar(0)) + (l - x).cwiseMax(Scalar(0)));
  };
  return {excess(d.v, network.v_min(), network.v_max()),
          excess(d.p_g, network.p_min(), network.p_max()) +
              excess(d.q_g, network.q_min(), network.q_max())};
}

/// Full violation audit of a decision under the given loads.
template <typename Scalar>
ViolationReportT<Scalar> violation_report(const NetworkCase& network, const LoadsT<Scalar>& loads,
                                          const DispatchDecisionT<Scalar>& decision) {
  const auto flows = branch_flows(network, decision.v, decision.theta);
  auto [sp, sq] = balance_residuals(network, loads, decision, flows);
  auto bounds = bound_excess(network, decision);
  return {line_flow_violation(flows, network), std::move(sp), std::move(sq), std::move(bounds.v_excess),
          std::move(bounds.gen_excess)};
}

/// Total active losses: sum over branches of p_ij + p_ji.
template <typename Scalar>
Scalar total_losses(const BranchFlowsT<Scalar>& flows) {
  return flows.p_f.sum();
}

}  // namespace opflab

#endif  // OPFLAB_POWERFLOW_HPP
