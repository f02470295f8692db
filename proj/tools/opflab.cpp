// opflab: dataset generation, training, evaluation, single solves and the
// reproduction studies, each writing into its own run directory.
#include "opflab/config_json.hpp"
#include "opflab/labeler.hpp"
#include "opflab/network.hpp"
#include "opflab/pipeline.hpp"
#include "opflab/studies.hpp"
#include "opflab/surrogate.hpp"
#include "opflab/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#ifndef OPFLAB_VERSION
#define OPFLAB_VERSION "0.0.0"
#endif
#ifndef OPFLAB_DATA_DIR
#define OPFLAB_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opflab;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240917;
// Training on anything larger than this needs --long-running.
constexpr Eigen::Index kDeskScaleBuses = 10;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream ss;
  writer(ss);
  write_file(path, ss.str());
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream one(item);
    T value{};
    one >> value;
    if (!one || !(one >> std::ws).eof()) throw PreconditionError(std::string("bad entry '") + item + "' in " + what);
    out.push_back(value);
  }
  if (out.empty()) throw PreconditionError(std::string(what) + " is empty");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < values.size(); ++i) ss << (i ? "," : "") << values[i];
  return ss.str();
}

// Flags are parsed into staged copies and applied after the config file, so
// precedence is defaults < --config < flags.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    auto staged = std::make_shared<T>(target);
    CLI::Option* opt = app->add_option(name, *staged, help)->capture_default_str();
    setters_.push_back([opt, staged, &target] {
      if (opt->count() > 0) target = *staged;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
    auto staged = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(name, *staged, help);
    setters_.push_back([opt, staged, &target] {
      if (opt->count() > 0) target = *staged;
    });
    return opt;
  }

  CLI::Option* text(CLI::App* app, const std::string& name, const std::string& shown,
                    std::function<void(const std::string&)> set, const std::string& help) {
    auto staged = std::make_shared<std::string>(shown);
    CLI::Option* opt = app->add_option(name, *staged, help)->default_str(shown);
    setters_.push_back([opt, staged, set = std::move(set)] {
      if (opt->count() > 0) set(*staged);
    });
    return opt;
  }

  void apply() const {
    for (const auto& s : setters_) s();
  }

 private:
  std::vector<std::function<void()>> setters_;
};

struct Configs {
  SolverConfig solver;
  TrainConfig training;
  SamplingSpec sampling;
};

void add_solver_flags(CLI::App* app, Overrides& ov, SolverConfig& c) {
  ov.add(app, "--feas-tol", c.feas_tol, "Balance/flow residual accepted as converged (p.u.)");
  ov.add(app, "--opt-tol", c.opt_tol, "Projected-gradient tolerance of the inner loop");
  ov.add(app, "--max-outer", c.max_outer, "Augmented Lagrangian outer iterations");
  ov.add(app, "--max-inner", c.max_inner, "Inner iterations per outer iteration");
  ov.add(app, "--starts", c.starts, "Solver starts per sample (start 0 is flat)");
  ov.add(app, "--penalty-init", c.penalty_init, "Initial penalty");
  ov.add(app, "--penalty-growth", c.penalty_growth, "Penalty growth factor");
  ov.add(app, "--penalty-max", c.penalty_max, "Penalty cap");
  ov.flag(app, "--ignore-line-limits", c.ignore_line_limits, "Drop branch limits from solving and verification");
}

void add_train_flags(CLI::App* app, Overrides& ov, TrainConfig& c) {
  ov.text(app, "--loss", to_string(c.loss_kind), [&c](const std::string& s) { c.loss_kind = base_loss_from_string(s); },
          "decision or mse");
  ov.text(app, "--mse-labels", to_string(c.mse_labels),
          [&c](const std::string& s) { c.mse_labels = mse_labels_from_string(s); }, "full or generation");
  ov.add(app, "--alpha", c.alpha, "Learning rate");
  ov.add(app, "--rho", c.rho, "Multiplier step size");
  ov.add(app, "--epochs", c.epochs, "Training epochs");
  ov.add(app, "--batch-size", c.batch_size, "Minibatch size, 0 for full batch");
  ov.add(app, "--seed", c.seed, "Initialization and shuffle seed");
  ov.add(app, "--multiplier-init", c.multiplier_init, "Initial value of every multiplier");
  ov.add(app, "--angle-box", c.angle_box, "Angle head half-width (rad)");
  ov.text(app, "--hidden", join(c.hidden),
          [&c](const std::string& s) { c.hidden = parse_list<Eigen::Index>(s, "--hidden"); },
          "Hidden layer widths, comma separated");
  ov.text(app, "--activation", to_string(c.activation),
          [&c](const std::string& s) { c.activation = activation_from_string(s); }, "relu or tanh");
  ov.text(app, "--optimizer", to_string(c.optimizer),
          [&c](const std::string& s) { c.optimizer = optimizer_from_string(s); }, "gd or adam");
  ov.add(app, "--adam-beta1", c.adam_beta1, "Adam first-moment decay");
  ov.add(app, "--adam-beta2", c.adam_beta2, "Adam second-moment decay");
  ov.add(app, "--adam-epsilon", c.adam_epsilon, "Adam denominator guard");
}

void add_sampling_flags(CLI::App* app, Overrides& ov, SamplingSpec& s) {
  ov.add(app, "--count", s.count, "Number of load samples");
  ov.add(app, "--range-frac", s.range_frac, "Half-width of the uniform load band, fraction of nominal");
  ov.add(app, "--sample-seed", s.seed, "Load sampling seed");
}

// Applies a config file (sections solver, training, sampling) then the flags.
void resolve(const std::string& config_path, const Overrides& ov, Configs& c) {
  if (!config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
      throw PreconditionError("config '" + config_path + "': " + e.what());
    }
    if (!j.is_object()) throw PreconditionError("config '" + config_path + "' must be a JSON object");
    for (const auto& item : j.items()) {
      if (item.key() == "solver") {
        from_json(item.value(), c.solver);
      } else if (item.key() == "training") {
        from_json(item.value(), c.training);
      } else if (item.key() == "sampling") {
        from_json(item.value(), c.sampling);
      } else {
        throw PreconditionError("config '" + config_path + "': unknown section '" + item.key() + "'");
      }
    }
  }
  ov.apply();
}

struct Run {
  std::string subcommand;
  std::vector<std::string> argv;
  std::string out_root;
  std::string run_name;
  json config = json::object();
  json inputs = json::object();
  std::uint64_t seed = kDefaultSeed;
  fs::path dir;
  std::vector<std::string> outputs;

  void add_input(const std::string& key, const fs::path& path, const std::string& digest) {
    inputs[key] = {{"path", path.string()}, {"digest", digest}};
  }

  // The directory name hashes the resolved config and input digests, so the
  // same inputs and settings always land in the same place.
  void open() {
    std::string name = run_name;
    if (name.empty()) {
      std::string tag = subcommand;
      for (char& ch : tag) {
        if (ch == ' ') ch = '-';
      }
      name = tag + "-" + digest_bytes(config.dump() + inputs.dump()).substr(0, 12);
    }
    dir = fs::path(out_root) / name;
    fs::create_directories(dir);
  }

  void write(const std::string& file, const std::string& text) {
    write_file(dir / file, text);
    outputs.push_back(file);
  }

  template <typename Writer>
  void write_with(const std::string& file, Writer&& writer) {
    ::write_with(dir / file, std::forward<Writer>(writer));
    outputs.push_back(file);
  }

  void finish() {
    json manifest{{"subcommand", subcommand}, {"version", OPFLAB_VERSION}, {"seed", seed},
                  {"argv", argv},             {"config", config},         {"inputs", inputs},
                  {"outputs", outputs}};
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    std::cerr << "wrote " << dir.string() << '\n';
  }
};

std::string default_out_root() {
  const char* env = std::getenv("OPFLAB_OUT_DIR");
  return env && *env ? env : "runs";
}

void add_run_flags(CLI::App* app, Run& run, std::string& config_path) {
  app->add_option("--config", config_path, "JSON file with solver / training / sampling sections");
  app->add_option("--out", run.out_root, "Output root (default: $OPFLAB_OUT_DIR or ./runs)");
  app->add_option("--run-name", run.run_name, "Run directory name (default: derived from config and inputs)");
}

void require_desk_scale(const NetworkCase& network, bool long_running, const std::string& what) {
  if (network.bus_count() > kDeskScaleBuses && !long_running) {
    throw PreconditionError("case has " + std::to_string(network.bus_count()) + " buses; pass --long-running to " +
                            what + " on it");
  }
}

std::pair<Dataset, Dataset> split_or_all(const Dataset& dataset, double train_frac, std::uint64_t seed) {
  if (train_frac == 1.0) return {dataset, Dataset{}};
  return split_dataset(dataset, train_frac, seed);
}

json summary_json(const EvaluationSummary& s) {
  return {{"samples", s.samples},         {"mean_regret", s.mean_regret},   {"max_regret", s.max_regret},
          {"mean_sigma_f", s.mean_sigma_f}, {"max_sigma_f", s.max_sigma_f}, {"mean_sigma_p", s.mean_sigma_p},
          {"max_sigma_p", s.max_sigma_p},   {"mean_sigma_q", s.mean_sigma_q}, {"max_sigma_q", s.max_sigma_q},
          {"max_v_excess", s.max_v_excess}, {"max_gen_excess", s.max_gen_excess}};
}

json timing_json(const EvaluationReport& r) {
  return {{"inference_median_s", r.inference_median}, {"inference_mean_s", r.inference_mean},
          {"solver_median_s", r.solver_median},       {"solver_mean_s", r.solver_mean},
          {"speedup_median", r.speedup_median},       {"speedup_mean", r.speedup_mean},
          {"repetitions", r.timing_repetitions}};
}

Dataset load_dataset(const fs::path& path, const NetworkCase& network, const std::string& timing_path) {
  Dataset ds = read_dataset_csv(read_file(path), network);
  fs::path timing = timing_path.empty() ? path.parent_path() / "timing.csv" : fs::path(timing_path);
  if (fs::exists(timing)) {
    read_timing_csv(read_file(timing), ds);
  } else if (!timing_path.empty()) {
    throw PreconditionError("timing file '" + timing_path + "' not found");
  }
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AC OPF labeling, surrogate training and evaluation"};
  app.set_version_flag("--version", OPFLAB_VERSION);
  app.require_subcommand(1);

  Run run;
  run.out_root = default_out_root();
  for (int i = 0; i < argc; ++i) run.argv.emplace_back(argv[i]);
  std::string config_path;
  Configs cfg;
  Overrides ov;
  std::string case_path, dataset_path, model_path, timing_path;
  unsigned jobs = 1;
  std::uint64_t solver_seed = kDefaultSeed;
  double train_frac = 0.8;
  std::uint64_t split_seed = kDefaultSeed;
  bool long_running = false;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Sample loads around a case and label them with the solver");
  gen->add_option("--case", case_path, "Case file (MATPOWER or native)")->required()->check(CLI::ExistingFile);
  cfg.sampling.count = 1000;
  add_sampling_flags(gen, ov, cfg.sampling);
  add_solver_flags(gen, ov, cfg.solver);
  gen->add_option("--solver-seed", solver_seed, "Base seed of the per-sample solver starts")->capture_default_str();
  gen->add_option("--jobs", jobs, "Worker threads, 0 for all cores")->capture_default_str();
  add_run_flags(gen, run, config_path);

  // train
  auto* trn = app.add_subcommand("train", "Train a surrogate on the training split of a dataset");
  trn->add_option("--case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  trn->add_option("--dataset", dataset_path, "Dataset CSV from gen-data")->required()->check(CLI::ExistingFile);
  add_train_flags(trn, ov, cfg.training);
  trn->add_option("--train-frac", train_frac, "Training fraction of the split (1 uses every sample)")
      ->capture_default_str();
  trn->add_option("--split-seed", split_seed, "Split shuffle seed")->capture_default_str();
  trn->add_flag("--long-running", long_running, "Allow training on cases beyond desk scale");
  add_run_flags(trn, run, config_path);

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a trained surrogate on the test split of a dataset");
  EvaluateOptions eval_opts;
  evl->add_option("--case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  evl->add_option("--model", model_path, "Model file from train")->required()->check(CLI::ExistingFile);
  evl->add_option("--dataset", dataset_path, "Dataset CSV from gen-data")->required()->check(CLI::ExistingFile);
  evl->add_option("--timing", timing_path, "Solver timing sidecar (default: timing.csv next to the dataset)");
  evl->add_option("--train-frac", train_frac, "Training fraction used by train (1 evaluates every sample)")
      ->capture_default_str();
  evl->add_option("--split-seed", split_seed, "Split shuffle seed used by train")->capture_default_str();
  evl->add_option("--tol", eval_opts.tol, "Feasibility tolerance (p.u.)")->capture_default_str();
  evl->add_option("--timing-repetitions", eval_opts.timing_repetitions, "Timed inferences (at least 100)")
      ->capture_default_str();
  add_run_flags(evl, run, config_path);

  // solve
  auto* slv = app.add_subcommand("solve", "Solve one AC OPF instance");
  std::string pd_text, qd_text;
  slv->add_option("--case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  slv->add_option("--pd", pd_text, "Active loads per bus in p.u., comma separated (default: nominal)");
  slv->add_option("--qd", qd_text, "Reactive loads per bus in p.u., comma separated (default: nominal)");
  slv->add_option("--solver-seed", solver_seed, "Seed of the random starts")->capture_default_str();
  add_solver_flags(slv, ov, cfg.solver);
  add_run_flags(slv, run, config_path);

  // study
  auto* study = app.add_subcommand("study", "Reproduction studies");
  study->require_subcommand(1);

  auto* fig1 = study->add_subcommand("fig1", "MSE versus cost on the lossless 3-bus example");
  std::string fig1_case = std::string(OPFLAB_DATA_DIR) + "/fig1_three_bus.case";
  fig1->add_option("--case", fig1_case, "3-bus case")->capture_default_str()->check(CLI::ExistingFile);
  add_run_flags(fig1, run, config_path);

  auto* sweep = study->add_subcommand("sweep", "Sweep one bus load, label it and train both surrogates on it");
  SweepSpec sweep_spec;
  std::string sweep_case = std::string(OPFLAB_DATA_DIR) + "/discontinuity_three_bus.case";
  BusId sweep_bus = 1;
  bool sweep_no_train = false;
  sweep->add_option("--case", sweep_case, "Case file")->capture_default_str()->check(CLI::ExistingFile);
  sweep->add_option("--bus", sweep_bus, "Id of the bus whose active load is swept")->capture_default_str();
  sweep->add_option("--lo", sweep_spec.lo, "Lowest load (p.u.)")->capture_default_str();
  sweep->add_option("--hi", sweep_spec.hi, "Highest load (p.u.)")->capture_default_str();
  sweep->add_option("--points", sweep_spec.points, "Grid points")->capture_default_str();
  sweep->add_option("--solver-seed", solver_seed, "Base seed of the per-point solver starts")->capture_default_str();
  sweep->add_option("--jobs", jobs, "Worker threads, 0 for all cores")->capture_default_str();
  sweep->add_flag("--labels-only", sweep_no_train, "Skip surrogate training");
  sweep->add_flag("--long-running", long_running, "Allow training on cases beyond desk scale");
  // The sweep and compare studies share the study defaults instead of the
  // plain TrainConfig defaults; flags still override them.
  Configs sweep_cfg{sweep_spec.solver, study_train_config(), {}};
  Overrides sweep_ov;
  add_solver_flags(sweep, sweep_ov, sweep_cfg.solver);
  add_train_flags(sweep, sweep_ov, sweep_cfg.training);
  add_run_flags(sweep, run, config_path);

  auto* cmp = study->add_subcommand("compare", "Train decision and MSE surrogates on one dataset and compare them");
  CompareSpec cmp_spec;
  std::string cmp_seeds = join(cmp_spec.seeds);
  Overrides cmp_ov;
  Configs cmp_cfg{{}, study_train_config(), {}};
  cmp->add_option("--case", case_path, "Case file")->required()->check(CLI::ExistingFile);
  cmp->add_option("--dataset", dataset_path, "Dataset CSV from gen-data")->required()->check(CLI::ExistingFile);
  cmp->add_option("--timing", timing_path, "Solver timing sidecar (default: timing.csv next to the dataset)");
  cmp->add_option("--train-frac", cmp_spec.train_frac, "Training fraction of every split")->capture_default_str();
  cmp->add_option("--seeds", cmp_seeds, "Split and training seeds, comma separated")->capture_default_str();
  cmp->add_option("--tol", cmp_spec.evaluate.tol, "Feasibility tolerance (p.u.)")->capture_default_str();
  cmp->add_option("--timing-repetitions", cmp_spec.evaluate.timing_repetitions, "Timed inferences (at least 100)")
      ->capture_default_str();
  cmp->add_flag("--long-running", long_running, "Allow training on cases beyond desk scale");
  add_train_flags(cmp, cmp_ov, cmp_cfg.training);
  add_run_flags(cmp, run, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      run.subcommand = "gen-data";
      resolve(config_path, ov, cfg);
      const NetworkCase network = load_case(case_path);
      if (cfg.sampling.count == 0) throw PreconditionError("--count must be at least 1");
      if (cfg.sampling.distribution != "uniform") {
        throw PreconditionError("unsupported sampling distribution '" + cfg.sampling.distribution + "'");
      }
      run.seed = cfg.sampling.seed;
      run.config = {{"sampling", cfg.sampling}, {"solver", cfg.solver}, {"solver_seed", solver_seed}};
      run.add_input("case", case_path, case_digest(network));
      run.open();

      const auto loads = sample_loads(network, cfg.sampling.count, cfg.sampling.range_frac, cfg.sampling.seed);
      GenerateOptions opts;
      opts.jobs = jobs;
      opts.solver_seed = solver_seed;
      opts.log = &std::cerr;
      Dataset ds = generate_dataset(network, loads, cfg.solver, opts);
      ds.sampling = cfg.sampling;
      run.write_with("dataset.csv", [&](std::ostream& o) {
        write_dataset_csv(o, ds, static_cast<std::size_t>(network.bus_count()));
      });
      run.write_with("timing.csv", [&](std::ostream& o) { write_timing_csv(o, ds); });
      run.finish();
      return 0;
    }

    if (trn->parsed()) {
      run.subcommand = "train";
      resolve(config_path, ov, cfg);
      validate(cfg.training);
      const NetworkCase network = load_case(case_path);
      require_desk_scale(network, long_running, "train");
      const std::string dataset_text = read_file(dataset_path);
      const Dataset ds = read_dataset_csv(dataset_text, network);
      run.seed = cfg.training.seed;
      run.config = {{"training", cfg.training}, {"train_frac", train_frac}, {"split_seed", split_seed}};
      run.add_input("case", case_path, case_digest(network));
      run.add_input("dataset", dataset_path, digest_bytes(dataset_text));
      run.open();

      const auto [train_split, test_split] = split_or_all(ds, train_frac, split_seed);
      if (train_split.samples.empty()) throw PreconditionError("training split of '" + dataset_path + "' is empty");
      const std::vector<Sample> data = training_samples(train_split);
      std::cerr << "training " << to_string(cfg.training.loss_kind) << " surrogate on " << data.size()
                << " samples for " << cfg.training.epochs << " epochs\n";
      const TrainResult result = train(network, data, cfg.training);
      run.write("model.txt", serialize(result.model));
      run.write_with("history.csv", [&](std::ostream& o) { write_history_csv(o, result.state.history); });
      run.finish();
      return 0;
    }

    if (evl->parsed()) {
      run.subcommand = "eval";
      resolve(config_path, ov, cfg);
      const NetworkCase network = load_case(case_path);
      const std::string model_text = read_file(model_path);
      const SurrogateModel model = deserialize(model_text, network);
      const std::string dataset_text = read_file(dataset_path);
      Dataset ds = load_dataset(dataset_path, network, timing_path);
      run.config = {{"train_frac", train_frac},
                    {"split_seed", split_seed},
                    {"tol", eval_opts.tol},
                    {"timing_repetitions", eval_opts.timing_repetitions}};
      run.seed = split_seed;
      run.add_input("case", case_path, case_digest(network));
      run.add_input("model", model_path, digest_bytes(model_text));
      run.add_input("dataset", dataset_path, digest_bytes(dataset_text));
      run.open();

      const Dataset test = train_frac == 1.0 ? ds : split_dataset(ds, train_frac, split_seed).second;
      const EvaluationReport report = evaluate_model(network, model, test, eval_opts);
      run.write_with("evaluation.csv", [&](std::ostream& o) { write_evaluation_csv(o, report); });
      run.write_with("regret_histogram.dat", [&](std::ostream& o) { write_regret_histogram(o, report); });
      run.write_with("violation_bars.dat", [&](std::ostream& o) { write_violation_bars(o, report); });
      run.write("summary.json", summary_json(report.summary).dump(2) + "\n");
      // Wall-clock numbers change from run to run; kept out of the files above.
      run.write("timing.json", timing_json(report).dump(2) + "\n");
      std::cout << summary_json(report.summary).dump(2) << '\n' << timing_json(report).dump(2) << '\n';
      run.finish();
      return 0;
    }

    if (slv->parsed()) {
      run.subcommand = "solve";
      resolve(config_path, ov, cfg);
      const NetworkCase network = load_case(case_path);
      Loads loads = nominal_loads(network);
      auto override_loads = [&](const std::string& text, Eigen::VectorXd& target, const char* what) {
        if (text.empty()) return;
        const auto values = parse_list<double>(text, what);
        if (static_cast<Eigen::Index>(values.size()) != network.bus_count()) {
          throw PreconditionError(std::string(what) + " needs " + std::to_string(network.bus_count()) + " values");
        }
        for (std::size_t i = 0; i < values.size(); ++i) target[static_cast<Eigen::Index>(i)] = values[i];
      };
      override_loads(pd_text, loads.p_d, "--pd");
      override_loads(qd_text, loads.q_d, "--qd");
      run.seed = solver_seed;
      run.config = {{"solver", cfg.solver},
                    {"solver_seed", solver_seed},
                    {"p_d", std::vector<double>(loads.p_d.begin(), loads.p_d.end())},
                    {"q_d", std::vector<double>(loads.q_d.begin(), loads.q_d.end())}};
      run.add_input("case", case_path, case_digest(network));
      run.open();

      const SolveOutcome out = solve_opf_local(network, loads, cfg.solver, solver_seed);
      auto as_list = [](const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); };
      json solution{{"converged", out.converged},
                    {"objective", out.objective},
                    {"final_residual", out.final_residual},
                    {"iterations", out.iterations},
                    {"start_index", out.start_index},
                    {"p_g", as_list(out.decision.p_g)},
                    {"q_g", as_list(out.decision.q_g)},
                    {"v", as_list(out.decision.v)},
                    {"theta", as_list(out.decision.theta)}};
      run.write("solution.json", solution.dump(2) + "\n");
      std::cout << solution.dump(2) << "\nwall_time_s " << out.wall_time << '\n';
      run.finish();
      return out.converged ? 0 : 2;
    }

    if (fig1->parsed()) {
      run.subcommand = "study fig1";
      const NetworkCase network = load_case(fig1_case);
      run.add_input("case", fig1_case, case_digest(network));
      run.open();
      const auto rows = counterexample_table(network);
      std::cout << std::left << std::setw(13) << "decision" << std::setw(12) << "p_g" << std::setw(6) << "MSE"
                << "cost\n";
      for (const auto& r : rows) {
        std::ostringstream pg;
        pg << '(' << r.p_g[0] << ',' << r.p_g[1] << ',' << r.p_g[2] << ')';
        std::cout << std::setw(13) << r.name << std::setw(12) << pg.str() << std::setw(6) << r.mse << r.cost << '\n';
      }
      run.write_with("fig1.csv", [&](std::ostream& o) { write_counterexample_table(o, rows); });
      run.finish();
      return 0;
    }

    if (sweep->parsed()) {
      run.subcommand = "study sweep";
      Configs& cfg = sweep_cfg;
      resolve(config_path, sweep_ov, cfg);
      validate(cfg.training);
      const NetworkCase network = load_case(sweep_case);
      const auto bus = network.bus_index(sweep_bus);
      if (!bus) throw PreconditionError("--bus " + std::to_string(sweep_bus) + " is not a bus of '" + sweep_case + "'");
      if (!sweep_no_train) require_desk_scale(network, long_running, "train");
      sweep_spec.bus = *bus;
      sweep_spec.solver = cfg.solver;
      sweep_spec.train = cfg.training;
      sweep_spec.solver_seed = solver_seed;
      sweep_spec.jobs = jobs;
      sweep_spec.train_models = !sweep_no_train;
      run.seed = cfg.training.seed;
      run.config = {{"solver", cfg.solver},   {"training", cfg.training}, {"solver_seed", solver_seed},
                    {"bus", sweep_bus},       {"lo", sweep_spec.lo},      {"hi", sweep_spec.hi},
                    {"points", sweep_spec.points}, {"train_models", sweep_spec.train_models}};
      run.add_input("case", sweep_case, case_digest(network));
      run.open();

      const SweepResult result = run_sweep(network, sweep_spec);
      json summary{{"points", sweep_spec.points},
                   {"labeled", result.labels.samples.size()},
                   {"step", result.step},
                   {"max_label_jump", result.max_jump},
                   {"max_label_jump_at", result.max_jump_at},
                   {"max_jump_over_step", result.max_jump / result.step}};
      for (const auto& c : result.curves) summary["worst_balance_" + to_string(c.loss)] = c.worst_balance;
      run.write_with("sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, result, network.bus_count()); });
      run.write("summary.json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
      run.finish();
      return 0;
    }

    if (cmp->parsed()) {
      run.subcommand = "study compare";
      Configs& cfg = cmp_cfg;
      resolve(config_path, cmp_ov, cfg);
      validate(cfg.training);
      cmp_spec.train = cfg.training;
      cmp_spec.seeds = parse_list<std::uint64_t>(cmp_seeds, "--seeds");
      const NetworkCase network = load_case(case_path);
      require_desk_scale(network, long_running, "train");
      const std::string dataset_text = read_file(dataset_path);
      const Dataset ds = load_dataset(dataset_path, network, timing_path);
      run.seed = cmp_spec.seeds.front();
      run.config = {{"training", cfg.training},
                    {"train_frac", cmp_spec.train_frac},
                    {"seeds", cmp_spec.seeds},
                    {"tol", cmp_spec.evaluate.tol},
                    {"timing_repetitions", cmp_spec.evaluate.timing_repetitions}};
      run.add_input("case", case_path, case_digest(network));
      run.add_input("dataset", dataset_path, digest_bytes(dataset_text));
      run.open();

      const CompareResult result = run_compare(network, ds, cmp_spec);
      json summary{{"mean_regret_decision", result.mean_regret_decision},
                   {"mean_regret_mse", result.mean_regret_mse}};
      json timing = json::array();
      for (const auto& r : result.runs) {
        json t = timing_json(r.report);
        t["seed"] = r.seed;
        t["loss"] = to_string(r.loss);
        timing.push_back(std::move(t));
      }
      run.write_with("compare.csv", [&](std::ostream& o) { write_compare_csv(o, result); });
      for (const auto& r : result.runs) {
        const std::string stem = to_string(r.loss) + "_" + std::to_string(r.seed);
        run.write_with("history_" + stem + ".csv", [&](std::ostream& o) { write_history_csv(o, r.history); });
        run.write_with("regret_histogram_" + stem + ".dat", [&](std::ostream& o) { write_regret_histogram(o, r.report); });
        run.write_with("violation_bars_" + stem + ".dat", [&](std::ostream& o) { write_violation_bars(o, r.report); });
      }
      run.write("summary.json", summary.dump(2) + "\n");
      run.write("timing.json", timing.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
      run.finish();
      return 0;
    }
  } catch (const DigestMismatch& e) {
    std::cerr << "error: digest mismatch: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 1;
}
