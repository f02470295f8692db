#include "opflab/studies.hpp"

#include "opflab/error.hpp"
#include "opflab/powerflow.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <ostream>
#include <span>

namespace opflab {

std::vector<CounterexampleRow> counterexample_table(const NetworkCase& network, const Eigen::VectorXd& label,
                                                    const std::vector<Eigen::VectorXd>& candidates) {
  detail::require_size(label.size(), network.bus_count(), "label");
  std::vector<CounterexampleRow> rows;
  auto add = [&](std::string name, const Eigen::VectorXd& p) {
    detail::require_size(p.size(), network.bus_count(), "candidate");
    const Eigen::VectorXd a[1] = {label};
    const Eigen::VectorXd b[1] = {p};
    rows.push_back({std::move(name), p, mse_between(a, b), generation_cost(network, p)});
  };
  add("label", label);
  for (std::size_t k = 0; k < candidates.size(); ++k) add("candidate_" + std::to_string(k + 1), candidates[k]);
  return rows;
}

std::vector<CounterexampleRow> counterexample_table(const NetworkCase& network) {
  if (network.bus_count() != 3) throw PreconditionError("the counterexample needs a 3-bus case");
  return counterexample_table(network, Eigen::Vector3d(3, 0, 0), {Eigen::Vector3d(1, 2, 0), Eigen::Vector3d(1, 1, 1)});
}

void write_counterexample_table(std::ostream& out, const std::vector<CounterexampleRow>& rows) {
  out << "name,p_g,mse,cost\n";
  for (const auto& r : rows) {
    out << r.name << ",(";
    for (Eigen::Index i = 0; i < r.p_g.size(); ++i) out << (i ? " " : "") << detail::format_real(r.p_g[i]);
    out << ")," << detail::format_real(r.mse) << ',' << detail::format_real(r.cost) << '\n';
  }
}

TrainConfig study_train_config() {
  TrainConfig c;
  c.optimizer = Optimizer::adam;
  c.alpha = 1e-3;
  c.epochs = 2000;
  c.rho = 1.0;
  c.multiplier_init = 300.0;
  return c;
}

SweepResult run_sweep(const NetworkCase& network, const SweepSpec& spec) {
  if (spec.points < 2) throw PreconditionError("a sweep needs at least 2 points");
  if (!(spec.hi > spec.lo)) throw PreconditionError("sweep range must satisfy lo < hi");
  if (spec.bus < 0 || spec.bus >= network.bus_count()) throw PreconditionError("sweep bus out of range");

  SweepResult result;
  result.step = (spec.hi - spec.lo) / (spec.points - 1);
  std::vector<Loads> loads;
  for (int k = 0; k < spec.points; ++k) {
    Loads l = nominal_loads(network);
    l.p_d[spec.bus] = spec.lo + k * result.step;
    result.load.push_back(l.p_d[spec.bus]);
    loads.push_back(std::move(l));
  }
  GenerateOptions gen;
  gen.jobs = spec.jobs;
  gen.solver_seed = spec.solver_seed;
  result.labels = generate_dataset(network, loads, spec.solver, gen);
  result.labels.sampling.distribution = "grid";
  result.labels.sampling.range_frac = 0.0;
  result.labels.sampling.seed = 0;

  const auto& s = result.labels.samples;
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k].index != s[k - 1].index + 1) continue;
    const double jump = (s[k].label - s[k - 1].label).norm();
    if (jump > result.max_jump) {
      result.max_jump = jump;
      result.max_jump_at = result.load[s[k].index];
    }
  }

  if (!spec.train_models) return result;
  const std::vector<Sample> data = training_samples(result.labels);
  for (BaseLoss loss : {BaseLoss::decision, BaseLoss::mse}) {
    TrainConfig cfg = spec.train;
    cfg.loss_kind = loss;
    SweepCurve curve;
    curve.loss = loss;
    curve.model = train(network, data, cfg).model;
    for (const auto& sample : data) {
      const DispatchDecision y = predict(curve.model, sample.x);
      const auto report = violation_report(network, Loads::from_features(sample.x), y);
      curve.predictions.push_back(y.stacked());
      curve.max_balance.push_back(report.max_balance());
      curve.max_flow.push_back(report.max_flow());
      curve.cost.push_back(generation_cost(network, y.p_g));
      curve.worst_balance = std::max(curve.worst_balance, report.max_balance());
    }
    result.curves.push_back(std::move(curve));
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result, Eigen::Index bus_count) {
  static const char* heads[] = {"pg", "qg", "v", "th"};
  auto entry_names = [&](const std::string& prefix) {
    std::string cols;
    for (const char* h : heads) {
      for (Eigen::Index i = 1; i <= bus_count; ++i) cols += "," + prefix + h + "_" + std::to_string(i);
    }
    return cols;
  };
  out << "load,objective" << entry_names("");
  for (const auto& c : result.curves) {
    const std::string p = to_string(c.loss) + "_";
    out << entry_names(p) << ',' << p << "cost," << p << "max_balance";
  }
  out << '\n';
  const auto& s = result.labels.samples;
  for (std::size_t k = 0; k < s.size(); ++k) {
    out << detail::format_real(result.load[s[k].index]) << ',' << detail::format_real(s[k].objective);
    for (Eigen::Index i = 0; i < s[k].label.size(); ++i) out << ',' << detail::format_real(s[k].label[i]);
    for (const auto& c : result.curves) {
      for (Eigen::Index i = 0; i < c.predictions[k].size(); ++i) out << ',' << detail::format_real(c.predictions[k][i]);
      out << ',' << detail::format_real(c.cost[k]) << ',' << detail::format_real(c.max_balance[k]);
    }
    out << '\n';
  }
}

CompareResult run_compare(const NetworkCase& network, const Dataset& dataset, const CompareSpec& spec) {
  if (spec.seeds.empty()) throw PreconditionError("compare needs at least one seed");
  CompareResult result;
  double sum[2] = {0.0, 0.0};
  for (std::uint64_t seed : spec.seeds) {
    const auto [train_split, test_split] = split_dataset(dataset, spec.train_frac, seed);
    if (train_split.samples.empty() || test_split.samples.empty()) {
      throw PreconditionError("dataset too small to split into nonempty train and test sets");
    }
    const std::vector<Sample> data = training_samples(train_split);
    for (BaseLoss loss : {BaseLoss::decision, BaseLoss::mse}) {
      TrainConfig cfg = spec.train;
      cfg.loss_kind = loss;
      cfg.seed = seed;
      TrainResult trained = train(network, data, cfg);
      CompareRun run;
      run.seed = seed;
      run.loss = loss;
      run.report = evaluate_model(network, trained.model, test_split, spec.evaluate);
      run.history = std::move(trained.state.history);
      sum[loss == BaseLoss::mse] += run.report.summary.mean_regret;
      result.runs.push_back(std::move(run));
    }
  }
  const double n = static_cast<double>(spec.seeds.size());
  result.mean_regret_decision = sum[0] / n;
  result.mean_regret_mse = sum[1] / n;
  return result;
}

void write_compare_csv(std::ostream& out, const CompareResult& result) {
  out << "seed,loss,samples,mean_regret,max_regret,mean_sigma_f,max_sigma_f,mean_sigma_p,max_sigma_p,mean_sigma_q,"
         "max_sigma_q,max_v_excess\n";
  for (const auto& r : result.runs) {
    const auto& s = r.report.summary;
    out << r.seed << ',' << to_string(r.loss) << ',' << s.samples;
    for (double v : {s.mean_regret, s.max_regret, s.mean_sigma_f, s.max_sigma_f, s.mean_sigma_p, s.max_sigma_p,
                     s.mean_sigma_q, s.max_sigma_q, s.max_v_excess}) {
      out << ',' << detail::format_real(v);
    }
    out << '\n';
  }
}

}  // namespace opflab
