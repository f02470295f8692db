// Label generation: a local AC OPF solver (augmented Lagrangian outer loop,
// projected Newton inner loop with a spectral projected gradient fallback,
// multi-start), feasibility audit and regret against a solver baseline.
#ifndef OPFLAB_LABELER_HPP
#define OPFLAB_LABELER_HPP

#include "opflab/error.hpp"
#include "opflab/network.hpp"
#include "opflab/powerflow.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace opflab {

/// Total generation capacity cannot cover the load.
class InfeasibleProblem : public Error {
 public:
  using Error::Error;
};

struct SolverConfig {
  /// Converged means max(sigma_p, sigma_q, sigma_f) <= feas_tol (p.u.).
  double feas_tol = 1e-6;
  /// Projected-gradient tolerance on the scaled augmented Lagrangian.
  double opt_tol = 1e-7;
  int max_outer = 50;
  int max_inner = 2000;
  int starts = 5;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e8;
  /// Drop branch limits from both solving and verification.
  bool ignore_line_limits = false;
};

/// Multipliers and penalty of the augmented Lagrangian a solution was minimized under.
struct AugmentedState {
  Eigen::VectorXd eq_multipliers;    // 2N: active then reactive balance
  Eigen::VectorXd ineq_multipliers;  // 2E: (branch, orientation) flow limits
  double penalty = 0.0;
  double cost_scale = 1.0;
};

/// Scaled objective plus PHR augmented terms over x = (p_g, q_g, V, theta).
/// Boxes: generation and voltage limits, slack angle fixed to zero, other angles free.
class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const NetworkCase& network, Loads loads, bool ignore_line_limits);

  double value(const Eigen::VectorXd& x, const AugmentedState& state) const;
  double value_and_gradient(const Eigen::VectorXd& x, const AugmentedState& state, Eigen::VectorXd& grad) const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  /// d(equality_residual)/dx, 2N x 4N.
  Eigen::MatrixXd equality_jacobian(const Eigen::VectorXd& x) const;
  /// Exact Hessian of value() (the max in the limit terms is taken as smooth
  /// away from its kink).
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x, const AugmentedState& state) const;

  /// Signed balance mismatch (2N).
  Eigen::VectorXd equality_residual(const Eigen::VectorXd& x) const;
  /// |S| - s_max per (branch, orientation) (2E); -inf for unlimited branches.
  Eigen::VectorXd inequality_residual(const Eigen::VectorXd& x) const;

  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  double cost_scale() const { return cost_scale_; }
  Eigen::Index size() const { return lower_.size(); }

 private:
  const NetworkCase& network_;
  Loads loads_;
  bool ignore_lines_;
  double cost_scale_;
  Eigen::VectorXd lower_, upper_;
};

struct SolveOutcome {
  DispatchDecision decision;
  bool converged = false;
  /// Inner iterations summed over all starts.
  int iterations = 0;
  /// max(sigma_p, sigma_q, sigma_f) of the returned decision.
  double final_residual = 0.0;
  double objective = 0.0;
  /// Seconds spent in the whole multi-start solve.
  double wall_time = 0.0;
  int start_index = -1;
  AugmentedState state;
};

/// Throws InfeasibleProblem when sum(p_max) < sum(p_d); otherwise returns the
/// best converged start (lowest start index on ties), or the least infeasible
/// start with converged = false.
SolveOutcome solve_opf_local(const NetworkCase& network, const Loads& loads, const SolverConfig& config,
                             std::uint64_t seed);
/// One outcome per start, in start order (start 0 is the flat start). Same
/// errors as solve_opf_local.
std::vector<SolveOutcome> solve_opf_starts(const NetworkCase& network, const Loads& loads, const SolverConfig& config,
                                           std::uint64_t seed);

struct FeasibilityResult {
  ViolationReport report;
  bool pass = false;
};

FeasibilityResult verify_feasibility(const NetworkCase& network, const Loads& loads, const DispatchDecision& decision,
                                     double tol, bool ignore_line_limits = false);

/// Cost(predicted p_g) - baseline objective; negative values flag an
/// infeasible prediction. Throws PreconditionError for an unconverged baseline.
double regret(const NetworkCase& network, const DispatchDecision& predicted, const SolveOutcome& baseline);

}  // namespace opflab

#endif  // OPFLAB_LABELER_HPP
