// Test-only reference implementations. Nothing here calls into the opflab
// physics kernel, surrogate forward pass or solver: flows come from complex
// arithmetic, power flow from a plain Newton iteration, and the penalized loss
// is re-derived in long double.
#ifndef OPFLAB_TESTS_ORACLE_HPP
#define OPFLAB_TESTS_ORACLE_HPP

#include "opflab/network.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace oracle {

using Real = long double;
using Complex = std::complex<Real>;
using VecL = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using MatL = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

// S_ij = conj(y) (V_i^2 - V_i conj(V_j)) with y = g + jb and V complex phasors.
inline Complex branch_power(Real g, Real b, Real vi, Real vj, Real ti, Real tj) {
  const Complex y(g, b);
  const Complex Vi = std::polar(vi, ti);
  const Complex Vj = std::polar(vj, tj);
  return Vi * std::conj(y * (Vi - Vj));
}

// Net complex injection leaving each bus through the branches.
inline std::vector<Complex> injections(const opflab::NetworkCase& net, const VecL& v, const VecL& th) {
  std::vector<Complex> s(static_cast<std::size_t>(net.bus_count()), Complex(0, 0));
  for (std::size_t e = 0; e < net.branches().size(); ++e) {
    const auto& br = net.branches()[e];
    const auto i = *net.bus_index(br.from_bus);
    const auto j = *net.bus_index(br.to_bus);
    s[static_cast<std::size_t>(i)] += branch_power(br.g, br.b, v[i], v[j], th[i], th[j]);
    s[static_cast<std::size_t>(j)] += branch_power(br.g, br.b, v[j], v[i], th[j], th[i]);
  }
  return s;
}

struct PowerFlowSolution {
  VecL v;
  VecL theta;
  // Complex injection at every bus (generation minus load).
  std::vector<Complex> injection;
  int iterations = 0;
};

// Slack bus holds (v_slack, 0); every other bus is PQ with the given net
// injection. Newton steps with a central-difference Jacobian in long double.
inline PowerFlowSolution newton_power_flow(const opflab::NetworkCase& net, Eigen::Index slack, Real v_slack,
                                           const VecL& p_inj, const VecL& q_inj) {
  const Eigen::Index n = net.bus_count();
  std::vector<Eigen::Index> pq;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != slack) pq.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(pq.size());
  VecL v = VecL::Ones(n);
  VecL th = VecL::Zero(n);
  v[slack] = v_slack;

  auto mismatch = [&](const VecL& x) {
    VecL vv = v, tt = th;
    for (Eigen::Index k = 0; k < m; ++k) {
      tt[pq[k]] = x[k];
      vv[pq[k]] = x[m + k];
    }
    const auto s = injections(net, vv, tt);
    VecL r(2 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      r[k] = s[static_cast<std::size_t>(pq[k])].real() - p_inj[pq[k]];
      r[m + k] = s[static_cast<std::size_t>(pq[k])].imag() - q_inj[pq[k]];
    }
    return r;
  };

  VecL x(2 * m);
  for (Eigen::Index k = 0; k < m; ++k) {
    x[k] = 0;
    x[m + k] = 1;
  }
  PowerFlowSolution out;
  for (int it = 0; it < 50; ++it) {
    const VecL r = mismatch(x);
    if (r.cwiseAbs().maxCoeff() < 1e-15L) break;
    MatL J(2 * m, 2 * m);
    const Real h = 1e-7L;
    for (Eigen::Index c = 0; c < 2 * m; ++c) {
      VecL xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      J.col(c) = (mismatch(xp) - mismatch(xm)) / (2 * h);
    }
    x -= J.partialPivLu().solve(r);
    out.iterations = it + 1;
  }
  if (mismatch(x).cwiseAbs().maxCoeff() > 1e-12L) throw std::runtime_error("oracle power flow did not converge");
  for (Eigen::Index k = 0; k < m; ++k) {
    th[pq[k]] = x[k];
    v[pq[k]] = x[m + k];
  }
  out.v = v;
  out.theta = th;
  out.injection = injections(net, v, th);
  return out;
}

// Weights of a dense network in long double: layer l maps activations of
// width W[l].cols() to W[l].rows().
struct Net {
  std::vector<MatL> W;
  std::vector<VecL> b;
  bool tanh_hidden = false;
  // Per head (p, q, v, theta): lower and upper bound per bus.
  MatL lo;  // 4 x N
  MatL hi;
  Eigen::Index slack = 0;
};

inline VecL forward(const Net& net, const VecL& x) {
  VecL a = x;
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    VecL z = net.W[l] * a + net.b[l];
    if (l + 1 < net.W.size()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = net.tanh_hidden ? std::tanh(z[i]) : std::max<Real>(z[i], 0);
    } else {
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = 1 / (1 + std::exp(-z[i]));
    }
    a = z;
  }
  const Eigen::Index n = a.size() / 4;
  VecL y(4 * n);
  for (int h = 0; h < 4; ++h) {
    for (Eigen::Index i = 0; i < n; ++i) y[h * n + i] = net.lo(h, i) + a[h * n + i] * (net.hi(h, i) - net.lo(h, i));
  }
  y[3 * n + net.slack] = 0;
  return y;
}

struct Penalties {
  MatL lambda;  // samples x branches
  MatL mu_p;    // samples x buses
  MatL mu_q;
};

// base / |batch| + sum over samples of multiplier-weighted violations.
// mse_width = 0 selects the decision loss.
inline Real lagrangian(const opflab::NetworkCase& case_, const Net& net, const std::vector<VecL>& xs,
                       const std::vector<VecL>& labels, const Penalties& mult, Eigen::Index mse_width) {
  const Eigen::Index n = case_.bus_count();
  Real base = 0, penalty = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const VecL y = forward(net, xs[k]);
    const VecL pg = y.segment(0, n), qg = y.segment(n, n), v = y.segment(2 * n, n), th = y.segment(3 * n, n);
    if (mse_width > 0) {
      base += (labels[k].head(mse_width) - y.head(mse_width)).squaredNorm();
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (case_.generator_at(i) < 0) continue;
        base += case_.cost_c2()[i] * pg[i] * pg[i] + case_.cost_c1()[i] * pg[i] + case_.cost_c0()[i];
      }
    }
    const auto s = injections(case_, v, th);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Real rp = pg[i] - xs[k][i] - s[static_cast<std::size_t>(i)].real();
      const Real rq = qg[i] - xs[k][n + i] - s[static_cast<std::size_t>(i)].imag();
      penalty += mult.mu_p(static_cast<Eigen::Index>(k), i) * std::fabs(rp) +
                 mult.mu_q(static_cast<Eigen::Index>(k), i) * std::fabs(rq);
    }
    for (std::size_t e = 0; e < case_.branches().size(); ++e) {
      const auto& br = case_.branches()[e];
      const auto i = *case_.bus_index(br.from_bus);
      const auto j = *case_.bus_index(br.to_bus);
      const Real a = std::abs(branch_power(br.g, br.b, v[i], v[j], th[i], th[j]));
      const Real c = std::abs(branch_power(br.g, br.b, v[j], v[i], th[j], th[i]));
      const Real sigma = std::max<Real>(std::max(a, c) - static_cast<Real>(br.s_max), 0);
      penalty += mult.lambda(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e)) * sigma;
    }
  }
  return base / static_cast<Real>(xs.size()) + penalty;
}

}  // namespace oracle

#endif  // OPFLAB_TESTS_ORACLE_HPP
