// Alternating weight descent on the violation-based Lagrangian and
// subgradient ascent on the per-sample multipliers.
#ifndef OPFLAB_TRAINING_HPP
#define OPFLAB_TRAINING_HPP

#include "opflab/labeler.hpp"
#include "opflab/network.hpp"
#include "opflab/surrogate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opflab {

enum class Optimizer { gradient_descent, adam };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view s);

struct TrainConfig {
  BaseLoss loss_kind = BaseLoss::decision;
  MseLabels mse_labels = MseLabels::full;
  double alpha = 1e-3;
  double rho = 1e-2;
  int epochs = 100;
  /// 0 = full batch.
  std::size_t batch_size = 0;
  std::uint64_t seed = 20240917;
  double multiplier_init = 0.0;
  double angle_box = std::numbers::pi / 2;
  std::vector<Eigen::Index> hidden = {60, 60, 60};
  Activation activation = Activation::relu;
  /// Plain descent unless asked otherwise.
  Optimizer optimizer = Optimizer::gradient_descent;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

/// Throws PreconditionError naming the offending field.
void validate(const TrainConfig& config);

/// Per-sample violations, |D| x |E| and |D| x |N|.
struct ViolationTable {
  Eigen::MatrixXd sigma_f;
  Eigen::MatrixXd sigma_p;
  Eigen::MatrixXd sigma_q;
};

ViolationTable violation_table(const SurrogateModel& model, const NetworkCase& network, std::span<const Sample> data);

struct EpochRecord {
  int epoch = 0;
  /// Lagrangian at the weights and multipliers the epoch started from.
  LossBreakdown loss;
  double max_sigma_f = 0.0;
  double max_sigma_p = 0.0;
  double max_sigma_q = 0.0;
  double mean_sigma_f = 0.0;
  double mean_sigma_p = 0.0;
  double mean_sigma_q = 0.0;
};

struct TrainState {
  Multipliers multipliers;
  int epoch = 0;
  std::vector<EpochRecord> history;
};

/// lambda += rho sigma_f, mu_p += rho sigma_p, mu_q += rho sigma_q.
/// Throws DimensionError on shape mismatch and PreconditionError for rho < 0.
void update_multipliers(TrainState& state, const ViolationTable& violations, double rho);

struct TrainResult {
  SurrogateModel model;
  TrainState state;
};

/// Called at the start of each epoch with the weights the epoch is evaluated at.
using EpochObserver = std::function<void(int epoch, const SurrogateModel& model, const TrainState& state)>;

/// Each epoch: score every sample at the current weights (recorded in history),
/// take weight steps over seed-shuffled minibatches, then advance the
/// multipliers with the violations scored at the start of the epoch.
/// Throws DivergenceError naming the epoch if the loss leaves [0, 1e12] or
/// turns non-finite.
TrainResult train(const NetworkCase& network, std::span<const Sample> data, const TrainConfig& config,
                  const EpochObserver& observer = {});
/// Same, starting from the given model instead of a fresh initialization.
TrainResult train(const NetworkCase& network, std::span<const Sample> data, const TrainConfig& config,
                  SurrogateModel initial, const EpochObserver& observer = {});

struct EvaluationSummary {
  std::size_t samples = 0;
  double mean_regret = 0.0;
  double max_regret = 0.0;
  double mean_sigma_f = 0.0;
  double max_sigma_f = 0.0;
  double mean_sigma_p = 0.0;
  double max_sigma_p = 0.0;
  double mean_sigma_q = 0.0;
  double max_sigma_q = 0.0;
  double max_v_excess = 0.0;
  double max_gen_excess = 0.0;
};

/// Means of per-sample maxima over the split. Throws PreconditionError for an
/// empty split, a misaligned baseline list or an unconverged baseline.
EvaluationSummary evaluate_epoch(const NetworkCase& network, const SurrogateModel& model,
                                 std::span<const Sample> split, std::span<const SolveOutcome> baselines);

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace opflab

#endif  // OPFLAB_TRAINING_HPP
