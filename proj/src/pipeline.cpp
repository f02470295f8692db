#include "opflab/pipeline.hpp"

#include "opflab/config_json.hpp"
#include "opflab/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

namespace opflab {

namespace {

constexpr std::string_view kDatasetMagic = "opflab-dataset";
constexpr int kDatasetVersion = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd features(const Loads& loads) { return loads.features(); }

std::vector<std::string> column_names(std::size_t n) {
  std::vector<std::string> names;
  for (const char* prefix : {"pd_", "qd_", "pg_", "qg_", "v_", "th_"}) {
    for (std::size_t i = 1; i <= n; ++i) names.push_back(prefix + std::to_string(i));
  }
  names.emplace_back("objective");
  return names;
}

}  // namespace

std::vector<Loads> sample_loads(const NetworkCase& network, std::size_t count, double range_frac,
                                std::uint64_t seed) {
  if (count == 0) throw PreconditionError("sample count must be >= 1");
  if (!(range_frac >= 0.0 && range_frac < 1.0)) {
    throw PreconditionError("range_frac must lie in [0, 1), got " + detail::format_real(range_frac));
  }
  const Loads nominal = nominal_loads(network);
  const Eigen::Index n = network.bus_count();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Loads> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Loads l = nominal;
    for (Eigen::Index i = 0; i < n; ++i) l.p_d[i] = nominal.p_d[i] * (1.0 + range_frac * (2.0 * unit(rng) - 1.0));
    for (Eigen::Index i = 0; i < n; ++i) l.q_d[i] = nominal.q_d[i] * (1.0 + range_frac * (2.0 * unit(rng) - 1.0));
    out.push_back(std::move(l));
  }
  return out;
}

Dataset generate_dataset(const NetworkCase& network, const std::vector<Loads>& loads, const SolverConfig& config,
                         const GenerateOptions& options) {
  if (loads.empty()) throw PreconditionError("no loads to label");
  enum class Fate { labeled, unconverged, infeasible };
  struct Result {
    Fate fate = Fate::unconverged;
    SolveOutcome outcome;
    std::string note;
  };
  std::vector<Result> results(loads.size());

  auto work = [&](std::size_t k) {
    Result& r = results[k];
    try {
      r.outcome = solve_opf_local(network, loads[k], config, splitmix64(options.solver_seed + k));
    } catch (const InfeasibleProblem& e) {
      r.fate = Fate::unconverged;
      r.note = e.what();
      return;
    }
    if (!r.outcome.converged) {
      r.note = "solver did not converge, residual " + detail::format_real(r.outcome.final_residual);
      return;
    }
    const auto check =
        verify_feasibility(network, loads[k], r.outcome.decision, config.feas_tol, config.ignore_line_limits);
    if (!check.pass) {
      r.fate = Fate::infeasible;
      r.note = "label fails verification, max violation " + detail::format_real(check.report.max_entry());
      return;
    }
    r.fate = Fate::labeled;
  };

  unsigned jobs = options.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.jobs;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, loads.size()));
  if (jobs <= 1) {
    for (std::size_t k = 0; k < loads.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < loads.size(); k = next++) work(k);
      });
    }
    for (auto& th : pool) th.join();
  }

  Dataset ds;
  ds.case_digest = case_digest(network);
  ds.solver = config;
  ds.solver_seed = options.solver_seed;
  ds.sampling.count = loads.size();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const Result& r = results[k];
    if (r.fate != Fate::labeled) {
      (r.fate == Fate::infeasible ? ds.dropped_infeasible : ds.dropped_unconverged) += 1;
      if (options.log) *options.log << "sample " << k << " dropped: " << r.note << '\n';
      continue;
    }
    DatasetSample s;
    s.index = k;
    s.x = features(loads[k]);
    s.label = r.outcome.decision.stacked();
    s.objective = r.outcome.objective;
    s.iterations = r.outcome.iterations;
    s.wall_time = r.outcome.wall_time;
    ds.samples.push_back(std::move(s));
  }
  if (options.log) {
    *options.log << ds.samples.size() << " of " << loads.size() << " samples labeled (" << ds.dropped_unconverged
                 << " unconverged, " << ds.dropped_infeasible << " infeasible)\n";
  }
  if (ds.samples.empty()) {
    throw Error("dataset generation failed: none of " + std::to_string(loads.size()) + " samples produced a label");
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double train_frac, std::uint64_t seed) {
  if (dataset.samples.empty()) throw PreconditionError("cannot split an empty dataset");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw PreconditionError("train_frac must lie in (0, 1)");
  std::vector<std::size_t> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(order.size())));

  Dataset train = dataset;
  Dataset test = dataset;
  train.samples.clear();
  test.samples.clear();
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? train : test).samples.push_back(dataset.samples[order[k]]);
  }
  return {std::move(train), std::move(test)};
}

std::vector<Sample> training_samples(const Dataset& dataset) {
  std::vector<Sample> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) out.push_back({s.x, s.label});
  return out;
}

std::vector<SolveOutcome> baselines(const Dataset& dataset) {
  std::vector<SolveOutcome> out;
  out.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) {
    SolveOutcome o;
    if (s.label.size() > 0) {
      o.decision = DispatchDecision::from_stacked(s.label);
      o.converged = true;
    }
    o.objective = s.objective;
    o.iterations = s.iterations;
    o.wall_time = s.wall_time;
    out.push_back(std::move(o));
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset, std::size_t bus_count) {
  nlohmann::json manifest{{"format", kDatasetMagic},
                          {"version", kDatasetVersion},
                          {"case_digest", dataset.case_digest},
                          {"sampling", dataset.sampling},
                          {"solver", dataset.solver},
                          {"solver_seed", dataset.solver_seed},
                          {"labeled", dataset.samples.size()},
                          {"dropped_unconverged", dataset.dropped_unconverged},
                          {"dropped_infeasible", dataset.dropped_infeasible}};
  out << "# " << manifest.dump() << '\n';
  out << "sample_id";
  for (const auto& name : column_names(bus_count)) out << ',' << name;
  out << '\n';
  const auto n = static_cast<Eigen::Index>(bus_count);
  for (const auto& s : dataset.samples) {
    out << s.index;
    for (Eigen::Index k = 0; k < 2 * n; ++k) out << ',' << detail::format_real(s.x[k]);
    for (Eigen::Index k = 0; k < 4 * n; ++k) {
      out << ',';
      if (s.label.size() == 4 * n) out << detail::format_real(s.label[k]);
    }
    out << ',' << detail::format_real(s.objective) << '\n';
  }
}

void write_timing_csv(std::ostream& out, const Dataset& dataset) {
  out << "sample_id,iterations,wall_time\n";
  for (const auto& s : dataset.samples) {
    out << s.index << ',' << s.iterations << ',' << detail::format_real(s.wall_time) << '\n';
  }
}

Dataset read_dataset_csv(std::string_view text, const NetworkCase& network) {
  const auto lines = detail::split_lines(text);
  std::size_t cursor = 0;
  auto next_line = [&]() -> std::string_view {
    while (cursor < lines.size()) {
      const auto line = detail::trim(lines[cursor++]);
      if (!line.empty()) return line;
    }
    return {};
  };

  const auto head = next_line();
  if (head.size() < 2 || head[0] != '#') throw FormatError("dataset file lacks the manifest line");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(head.substr(1));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset manifest is not valid JSON: ") + e.what());
  }
  if (manifest.value("format", std::string()) != kDatasetMagic) throw FormatError("not an opflab dataset file");
  if (manifest.value("version", -1) != kDatasetVersion) {
    throw FormatError("unsupported dataset version " + manifest.value("version", nlohmann::json()).dump());
  }

  Dataset ds;
  ds.case_digest = manifest.at("case_digest").get<std::string>();
  const std::string expected = case_digest(network);
  if (ds.case_digest != expected) {
    throw DigestMismatch("dataset was generated for case " + ds.case_digest + " but the loaded case is " + expected);
  }
  ds.sampling = manifest.at("sampling").get<SamplingSpec>();
  ds.solver = manifest.at("solver").get<SolverConfig>();
  ds.solver_seed = manifest.at("solver_seed").get<std::uint64_t>();
  ds.dropped_unconverged = manifest.at("dropped_unconverged").get<std::size_t>();
  ds.dropped_infeasible = manifest.at("dropped_infeasible").get<std::size_t>();

  const auto n = network.bus_count();
  const auto names = column_names(static_cast<std::size_t>(n));
  const auto header = detail::split(next_line(), ",");
  if (header.size() != names.size() + 1 || header[0] != "sample_id") {
    throw FormatError("dataset header does not match a " + std::to_string(n) + "-bus case");
  }

  while (cursor < lines.size()) {
    const std::size_t line_no = cursor + 1;
    const auto line = next_line();
    if (line.empty()) break;
    // Keep empty fields: unlabeled rows leave the label columns blank.
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != names.size() + 1) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(names.size() + 1) +
                        " fields, found " + std::to_string(fields.size()));
    }
    auto real = [&](std::string_view token) {
      const auto v = detail::parse_real(detail::trim(token));
      if (!v) throw FormatError("line " + std::to_string(line_no) + ": bad number '" + std::string(token) + "'");
      return *v;
    };
    DatasetSample s;
    s.index = static_cast<std::size_t>(real(fields[0]));
    s.x.resize(2 * n);
    for (Eigen::Index k = 0; k < 2 * n; ++k) s.x[k] = real(fields[static_cast<std::size_t>(1 + k)]);
    const bool labeled = !detail::trim(fields[static_cast<std::size_t>(1 + 2 * n)]).empty();
    if (labeled) {
      s.label.resize(4 * n);
      for (Eigen::Index k = 0; k < 4 * n; ++k) s.label[k] = real(fields[static_cast<std::size_t>(1 + 2 * n + k)]);
    }
    s.objective = real(fields.back());
    s.wall_time = std::numeric_limits<double>::quiet_NaN();
    s.iterations = 0;
    if (labeled) {
      const auto check = verify_feasibility(network, Loads::from_features(s.x), DispatchDecision::from_stacked(s.label),
                                            ds.solver.feas_tol, ds.solver.ignore_line_limits);
      if (!check.pass) {
        throw FormatError("line " + std::to_string(line_no) + ": stored label fails verification (max violation " +
                          detail::format_real(check.report.max_entry()) + ")");
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void read_timing_csv(std::string_view text, Dataset& dataset) {
  std::map<std::size_t, std::pair<int, double>> by_index;
  bool header = true;
  for (const auto raw : detail::split_lines(text)) {
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = detail::split(line, ",");
    const auto id = detail::parse_real(f.size() == 3 ? f[0] : std::string_view{});
    const auto it = detail::parse_real(f.size() == 3 ? f[1] : std::string_view{});
    const auto wt = detail::parse_real(f.size() == 3 ? f[2] : std::string_view{});
    if (!id || !it || !wt) throw FormatError("malformed timing row '" + std::string(line) + "'");
    by_index[static_cast<std::size_t>(*id)] = {static_cast<int>(*it), *wt};
  }
  for (auto& s : dataset.samples) {
    const auto found = by_index.find(s.index);
    if (found == by_index.end()) continue;
    s.iterations = found->second.first;
    s.wall_time = found->second.second;
  }
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid)));
}

EvaluationReport evaluate_model(const NetworkCase& network, const SurrogateModel& model, const Dataset& test,
                                const EvaluateOptions& options) {
  if (test.samples.empty()) throw PreconditionError("test split is empty");
  for (const auto& s : test.samples) {
    if (s.label.size() == 0) throw PreconditionError("test sample " + std::to_string(s.index) + " is unlabeled");
  }
  const std::vector<Sample> split = training_samples(test);
  const std::vector<SolveOutcome> base = baselines(test);

  EvaluationReport report;
  report.summary = evaluate_epoch(network, model, split, base);
  for (std::size_t k = 0; k < split.size(); ++k) {
    const DispatchDecision y = predict(model, split[k].x);
    const FeasibilityResult check = verify_feasibility(network, Loads::from_features(split[k].x), y, options.tol);
    EvaluationRow row;
    row.sample_id = test.samples[k].index;
    row.regret = regret(network, y, base[k]);
    row.max_sigma_f = check.report.max_flow();
    row.max_sigma_p = check.report.sigma_p.size() ? check.report.sigma_p.maxCoeff() : 0.0;
    row.max_sigma_q = check.report.sigma_q.size() ? check.report.sigma_q.maxCoeff() : 0.0;
    row.max_v_excess = check.report.v_excess.size() ? check.report.v_excess.maxCoeff() : 0.0;
    row.feasible = check.pass;
    report.rows.push_back(row);
  }

  const int reps = std::max(100, options.timing_repetitions);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  double sink = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto& x = split[static_cast<std::size_t>(r) % split.size()].x;
    const auto t0 = std::chrono::steady_clock::now();
    const DispatchDecision y = predict(model, x);
    const auto t1 = std::chrono::steady_clock::now();
    sink += y.p_g.sum();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  if (!std::isfinite(sink)) times.push_back(0.0);  // keeps the loop observable
  report.timing_repetitions = reps;
  report.inference_median = median(times);
  report.inference_mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());

  std::vector<double> solver_times;
  for (const auto& s : test.samples) {
    if (std::isfinite(s.wall_time)) solver_times.push_back(s.wall_time);
  }
  report.solver_median = median(solver_times);
  report.solver_mean = solver_times.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : std::accumulate(solver_times.begin(), solver_times.end(), 0.0) /
                                 static_cast<double>(solver_times.size());
  report.speedup_median = report.solver_median / report.inference_median;
  report.speedup_mean = report.solver_mean / report.inference_mean;
  return report;
}

void write_evaluation_csv(std::ostream& out, const EvaluationReport& report) {
  out << "sample_id,regret,max_sigma_f,max_sigma_p,max_sigma_q,max_v_excess\n";
  for (const auto& r : report.rows) {
    out << r.sample_id << ',' << detail::format_real(r.regret) << ',' << detail::format_real(r.max_sigma_f) << ','
        << detail::format_real(r.max_sigma_p) << ',' << detail::format_real(r.max_sigma_q) << ','
        << detail::format_real(r.max_v_excess) << '\n';
  }
}

void write_regret_histogram(std::ostream& out, const EvaluationReport& report, int bins) {
  if (bins < 1) throw PreconditionError("histogram needs at least one bin");
  out << "# regret_bin_center count\n";
  if (report.rows.empty()) return;
  double lo = report.rows.front().regret;
  double hi = lo;
  for (const auto& r : report.rows) {
    lo = std::min(lo, r.regret);
    hi = std::max(hi, r.regret);
  }
  if (hi == lo) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (const auto& r : report.rows) {
    const int b = std::min(bins - 1, static_cast<int>((r.regret - lo) / width));
    ++counts[static_cast<std::size_t>(b)];
  }
  for (int b = 0; b < bins; ++b) {
    out << detail::format_real(lo + (b + 0.5) * width) << ' ' << counts[static_cast<std::size_t>(b)] << '\n';
  }
}

void write_violation_bars(std::ostream& out, const EvaluationReport& report) {
  const EvaluationSummary& s = report.summary;
  out << "# metric value\n";
  const std::pair<const char*, double> bars[] = {
      {"mean_sigma_f", s.mean_sigma_f}, {"max_sigma_f", s.max_sigma_f},   {"mean_sigma_p", s.mean_sigma_p},
      {"max_sigma_p", s.max_sigma_p},   {"mean_sigma_q", s.mean_sigma_q}, {"max_sigma_q", s.max_sigma_q},
      {"max_v_excess", s.max_v_excess}, {"max_gen_excess", s.max_gen_excess}};
  for (const auto& [name, value] : bars) out << name << ' ' << detail::format_real(value) << '\n';
}

}  // namespace opflab
