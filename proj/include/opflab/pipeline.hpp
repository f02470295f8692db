// Load sampling, label generation, dataset files, splitting and end-to-end
// model evaluation with timing.
#ifndef OPFLAB_PIPELINE_HPP
#define OPFLAB_PIPELINE_HPP

#include "opflab/labeler.hpp"
#include "opflab/network.hpp"
#include "opflab/surrogate.hpp"
#include "opflab/training.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace opflab {

struct SamplingSpec {
  std::string distribution = "uniform";
  double range_frac = 0.2;
  std::uint64_t seed = 20240917;
  std::size_t count = 0;
};

/// Every bus load drawn independently from [(1 - r) nominal, (1 + r) nominal],
/// p_d first then q_d, bus by bus. Throws PreconditionError for count = 0 or
/// r outside [0, 1).
std::vector<Loads> sample_loads(const NetworkCase& network, std::size_t count, double range_frac,
                                std::uint64_t seed);

struct DatasetSample {
  /// Position in the sampled load list.
  std::size_t index = 0;
  Eigen::VectorXd x;
  /// Stacked (p_g, q_g, V, theta), empty when unlabeled.
  Eigen::VectorXd label;
  double objective = 0.0;
  int iterations = 0;
  /// Seconds; NaN when the timing sidecar was not loaded.
  double wall_time = 0.0;
};

struct Dataset {
  std::string case_digest;
  SamplingSpec sampling;
  SolverConfig solver;
  std::uint64_t solver_seed = 0;
  std::vector<DatasetSample> samples;
  std::size_t dropped_unconverged = 0;
  std::size_t dropped_infeasible = 0;
};

struct GenerateOptions {
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned jobs = 1;
  std::uint64_t solver_seed = 20240917;
  /// Drop and count messages go here when non-null.
  std::ostream* log = nullptr;
};

/// Solves every load (concurrently, results ordered by index), keeps converged
/// labels that pass verify_feasibility at the solver tolerance, and counts the
/// rest. Capacity-infeasible loads count as unconverged. Throws Error when no
/// sample survives.
Dataset generate_dataset(const NetworkCase& network, const std::vector<Loads>& loads, const SolverConfig& config,
                         const GenerateOptions& options = {});

/// Deterministic shuffle, then the first floor(train_frac n) samples train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_frac, std::uint64_t seed);

std::vector<Sample> training_samples(const Dataset& dataset);
/// Converged SolveOutcome views of the stored labels (decision, objective, wall time).
std::vector<SolveOutcome> baselines(const Dataset& dataset);

/// CSV with a `# `-prefixed JSON manifest line, then a header row and one row
/// per sample. Timing lives in a separate sidecar so the main file is
/// reproducible byte for byte.
void write_dataset_csv(std::ostream& out, const Dataset& dataset, std::size_t bus_count);
void write_timing_csv(std::ostream& out, const Dataset& dataset);
/// Throws DigestMismatch when the file was generated for another case and
/// FormatError for malformed rows or labels that no longer pass verification.
Dataset read_dataset_csv(std::string_view text, const NetworkCase& network);
/// Fills iterations and wall_time by sample index.
void read_timing_csv(std::string_view text, Dataset& dataset);

struct EvaluationRow {
  std::size_t sample_id = 0;
  double regret = 0.0;
  double max_sigma_f = 0.0;
  double max_sigma_p = 0.0;
  double max_sigma_q = 0.0;
  double max_v_excess = 0.0;
  bool feasible = false;
};

struct EvaluationReport {
  std::vector<EvaluationRow> rows;
  EvaluationSummary summary;
  double inference_median = 0.0;
  double inference_mean = 0.0;
  /// NaN when the dataset carries no solver timings.
  double solver_median = 0.0;
  double solver_mean = 0.0;
  double speedup_median = 0.0;
  double speedup_mean = 0.0;
  int timing_repetitions = 0;
};

struct EvaluateOptions {
  double tol = 1e-6;
  /// At least 100 timed single-sample inferences.
  int timing_repetitions = 1000;
};

/// Side-effect free. Throws PreconditionError for an empty or unlabeled split.
EvaluationReport evaluate_model(const NetworkCase& network, const SurrogateModel& model, const Dataset& test,
                                const EvaluateOptions& options = {});

void write_evaluation_csv(std::ostream& out, const EvaluationReport& report);
/// Two columns: bin center, count.
void write_regret_histogram(std::ostream& out, const EvaluationReport& report, int bins = 20);
/// Two columns: metric name, value.
void write_violation_bars(std::ostream& out, const EvaluationReport& report);

double median(std::vector<double> values);

}  // namespace opflab

#endif  // OPFLAB_PIPELINE_HPP
