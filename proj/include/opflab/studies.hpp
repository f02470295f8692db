// Reproducible experiments built on the library: the MSE-versus-cost
// counterexample, a single-load sweep across a label discontinuity, and a
// side-by-side comparison of the two training losses.
#ifndef OPFLAB_STUDIES_HPP
#define OPFLAB_STUDIES_HPP

#include "opflab/labeler.hpp"
#include "opflab/network.hpp"
#include "opflab/pipeline.hpp"
#include "opflab/surrogate.hpp"
#include "opflab/training.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace opflab {

struct CounterexampleRow {
  std::string name;
  Eigen::VectorXd p_g;
  /// Squared distance to the label's p_g.
  double mse = 0.0;
  double cost = 0.0;
};

/// Label first, then each candidate. Throws DimensionError on length mismatch.
std::vector<CounterexampleRow> counterexample_table(const NetworkCase& network, const Eigen::VectorXd& label,
                                                    const std::vector<Eigen::VectorXd>& candidates);
/// The three-bus table: label (3,0,0) against (1,2,0) and (1,1,1).
std::vector<CounterexampleRow> counterexample_table(const NetworkCase& network);
void write_counterexample_table(std::ostream& out, const std::vector<CounterexampleRow>& rows);

/// Shared by the sweep and compare studies: Adam at 1e-3 for 2000 full-batch
/// epochs, rho = 1, multipliers starting at 300. The starting multiplier sits
/// above the largest per-sample marginal cost of the 3-bus fixtures
/// (c1 / |D| with c1 up to ~5e4 $/h and |D| = 200), so the absolute-value
/// penalties bind from the first epoch instead of after a long warm-up.
TrainConfig study_train_config();

struct SweepSpec {
  /// Bus index whose active load is swept; every other load stays nominal.
  Eigen::Index bus = 0;
  double lo = 0.0;
  double hi = 1.6;
  int points = 200;
  SolverConfig solver = [] {
    SolverConfig c;
    c.ignore_line_limits = true;
    return c;
  }();
  std::uint64_t solver_seed = 20240917;
  unsigned jobs = 1;
  /// Both surrogates are trained on the labeled sweep with this config; only
  /// loss_kind differs between them.
  TrainConfig train = study_train_config();
  bool train_models = true;
};

struct SweepCurve {
  BaseLoss loss = BaseLoss::decision;
  SurrogateModel model;
  /// One entry per labeled point.
  std::vector<Eigen::VectorXd> predictions;
  std::vector<double> max_balance;
  std::vector<double> max_flow;
  std::vector<double> cost;
  double worst_balance = 0.0;
};

struct SweepResult {
  double step = 0.0;
  std::vector<double> load;
  Dataset labels;
  /// Largest distance between labels at adjacent grid points (both labeled).
  double max_jump = 0.0;
  double max_jump_at = 0.0;
  std::vector<SweepCurve> curves;
};

SweepResult run_sweep(const NetworkCase& network, const SweepSpec& spec);

/// Columns: load, objective, every label entry, then per curve the predicted
/// entries, cost and max balance violation.
void write_sweep_csv(std::ostream& out, const SweepResult& result, Eigen::Index bus_count);

struct CompareSpec {
  double train_frac = 0.8;
  std::vector<std::uint64_t> seeds = {20240917};
  TrainConfig train = study_train_config();
  EvaluateOptions evaluate;
};

struct CompareRun {
  std::uint64_t seed = 0;
  BaseLoss loss = BaseLoss::decision;
  EvaluationReport report;
  std::vector<EpochRecord> history;
};

struct CompareResult {
  std::vector<CompareRun> runs;
  double mean_regret_decision = 0.0;
  double mean_regret_mse = 0.0;
};

/// For every seed: split with it, then train and evaluate both losses with it
/// as the training seed.
CompareResult run_compare(const NetworkCase& network, const Dataset& dataset, const CompareSpec& spec);
void write_compare_csv(std::ostream& out, const CompareResult& result);

}  // namespace opflab

#endif  // OPFLAB_STUDIES_HPP
