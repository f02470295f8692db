#include "opflab/training.hpp"

#include "opflab/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace opflab {

std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "gd"; }

Optimizer optimizer_from_string(std::string_view s) {
  if (s == "gd") return Optimizer::gradient_descent;
  if (s == "adam") return Optimizer::adam;
  throw PreconditionError("unknown optimizer '" + std::string(s) + "' (expected gd or adam)");
}

void validate(const TrainConfig& config) {
  if (!(config.alpha >= 0.0) || !std::isfinite(config.alpha)) throw PreconditionError("alpha must be >= 0");
  if (!(config.rho >= 0.0) || !std::isfinite(config.rho)) throw PreconditionError("rho must be >= 0");
  if (config.epochs < 1) throw PreconditionError("epochs must be >= 1");
  if (!(config.multiplier_init >= 0.0)) throw PreconditionError("multiplier_init must be >= 0");
  if (!(config.angle_box > 0.0)) throw PreconditionError("angle_box must be > 0");
  if (config.hidden.empty()) throw PreconditionError("hidden layer list is empty");
  for (auto h : config.hidden) {
    if (h < 1) throw PreconditionError("hidden layer sizes must be >= 1");
  }
}

ViolationTable violation_table(const SurrogateModel& model, const NetworkCase& network, std::span<const Sample> data) {
  const auto rows = static_cast<Eigen::Index>(data.size());
  ViolationTable t{Eigen::MatrixXd(rows, network.branch_count()), Eigen::MatrixXd(rows, network.bus_count()),
                   Eigen::MatrixXd(rows, network.bus_count())};
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Sample& s = data[static_cast<std::size_t>(r)];
    const ViolationReport rep = violation_report(network, Loads::from_features(s.x), predict(model, s.x));
    t.sigma_f.row(r) = rep.sigma_f.transpose();
    t.sigma_p.row(r) = rep.sigma_p.transpose();
    t.sigma_q.row(r) = rep.sigma_q.transpose();
  }
  return t;
}

void update_multipliers(TrainState& state, const ViolationTable& violations, double rho) {
  if (!(rho >= 0.0)) throw PreconditionError("rho must be >= 0");
  Multipliers& m = state.multipliers;
  auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
  };
  if (!same(m.lambda, violations.sigma_f) || !same(m.mu_p, violations.sigma_p) || !same(m.mu_q, violations.sigma_q)) {
    throw DimensionError("violation table shape does not match the multipliers");
  }
  m.lambda += rho * violations.sigma_f;
  m.mu_p += rho * violations.sigma_p;
  m.mu_q += rho * violations.sigma_q;
}

namespace {

EpochRecord summarize(int epoch, const LossBreakdown& loss, const ViolationTable& v) {
  EpochRecord r;
  r.epoch = epoch;
  r.loss = loss;
  auto max_of = [](const Eigen::MatrixXd& m) { return m.size() ? m.maxCoeff() : 0.0; };
  auto mean_of = [](const Eigen::MatrixXd& m) { return m.size() ? m.mean() : 0.0; };
  r.max_sigma_f = max_of(v.sigma_f);
  r.max_sigma_p = max_of(v.sigma_p);
  r.max_sigma_q = max_of(v.sigma_q);
  r.mean_sigma_f = mean_of(v.sigma_f);
  r.mean_sigma_p = mean_of(v.sigma_p);
  r.mean_sigma_q = mean_of(v.sigma_q);
  return r;
}

class Stepper {
 public:
  Stepper(const TrainConfig& config, Eigen::Index size) : config_(config) {
    if (config.optimizer == Optimizer::adam) {
      m_ = Eigen::VectorXd::Zero(size);
      v_ = Eigen::VectorXd::Zero(size);
    }
  }

  void step(SurrogateModel& model, const ModelGradient& grad) {
    if (config_.optimizer == Optimizer::gradient_descent) {
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        model.weights[l] -= config_.alpha * grad.weights[l];
        model.biases[l] -= config_.alpha * grad.biases[l];
      }
      return;
    }
    ++t_;
    const Eigen::VectorXd g = flatten(grad);
    m_ = config_.adam_beta1 * m_ + (1.0 - config_.adam_beta1) * g;
    v_ = config_.adam_beta2 * v_ + (1.0 - config_.adam_beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.adam_beta1, t_);
    const double c2 = 1.0 - std::pow(config_.adam_beta2, t_);
    const Eigen::VectorXd update =
        ((m_ / c1).array() / ((v_ / c2).array().sqrt() + config_.adam_epsilon)).matrix();
    assign_parameters(model, flatten_parameters(model) - config_.alpha * update);
  }

 private:
  const TrainConfig& config_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

}  // namespace

TrainResult train(const NetworkCase& network, std::span<const Sample> data, const TrainConfig& config,
                  const EpochObserver& observer) {
  validate(config);
  ModelOptions options;
  options.hidden_activation = config.activation;
  options.angle_box = config.angle_box;
  return train(network, data, config, init_model(network, config.hidden, config.seed, options), observer);
}

TrainResult train(const NetworkCase& network, std::span<const Sample> data, const TrainConfig& config,
                  SurrogateModel initial, const EpochObserver& observer) {
  validate(config);
  if (data.empty()) throw PreconditionError("training split is empty");
  const Eigen::Index n = network.bus_count();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].x.size() != 2 * n) {
      throw DimensionError("sample " + std::to_string(i) + " has " + std::to_string(data[i].x.size()) +
                           " features, expected " + std::to_string(2 * n));
    }
    if (config.loss_kind == BaseLoss::mse && data[i].label.size() != 4 * n) {
      throw PreconditionError("MSE training needs labels; sample " + std::to_string(i) + " has none");
    }
  }

  TrainResult out{std::move(initial), TrainState{}};
  SurrogateModel& model = out.model;
  TrainState& state = out.state;
  state.multipliers = Multipliers::constant(static_cast<Eigen::Index>(data.size()), network, config.multiplier_init);
  const LossSettings settings{config.loss_kind, config.mse_labels};

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = config.batch_size == 0 ? data.size() : std::min(config.batch_size, data.size());
  std::mt19937_64 shuffler(config.seed ^ 0x5851f42d4c957f2dULL);
  Stepper stepper(config, model.parameter_count());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (observer) observer(epoch, model, state);
    const LossBreakdown loss = lagrangian_loss(model, network, data, state.multipliers, settings);
    if (!std::isfinite(loss.total) || std::abs(loss.total) > 1e12) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": total loss " +
                            std::to_string(loss.total));
    }
    const ViolationTable violations = violation_table(model, network, data);
    state.history.push_back(summarize(epoch, loss, violations));

    if (batch < data.size()) std::shuffle(order.begin(), order.end(), shuffler);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      stepper.step(model, grad_weights(model, network, data, rows, state.multipliers, settings));
    }

    update_multipliers(state, violations, config.rho);
    state.epoch = epoch + 1;
  }
  return out;
}

EvaluationSummary evaluate_epoch(const NetworkCase& network, const SurrogateModel& model,
                                 std::span<const Sample> split, std::span<const SolveOutcome> baselines) {
  if (split.empty()) throw PreconditionError("evaluation split is empty");
  if (split.size() != baselines.size()) {
    throw PreconditionError("baseline list has " + std::to_string(baselines.size()) + " entries for " +
                            std::to_string(split.size()) + " samples");
  }
  EvaluationSummary s;
  s.samples = split.size();
  s.max_regret = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < split.size(); ++i) {
    const DispatchDecision y = predict(model, split[i].x);
    const double r = regret(network, y, baselines[i]);
    const ViolationReport rep = violation_report(network, Loads::from_features(split[i].x), y);
    const double f = rep.max_flow();
    const double p = rep.sigma_p.size() ? rep.sigma_p.maxCoeff() : 0.0;
    const double q = rep.sigma_q.size() ? rep.sigma_q.maxCoeff() : 0.0;
    s.mean_regret += r;
    s.max_regret = std::max(s.max_regret, r);
    s.mean_sigma_f += f;
    s.max_sigma_f = std::max(s.max_sigma_f, f);
    s.mean_sigma_p += p;
    s.max_sigma_p = std::max(s.max_sigma_p, p);
    s.mean_sigma_q += q;
    s.max_sigma_q = std::max(s.max_sigma_q, q);
    s.max_v_excess = std::max(s.max_v_excess, rep.v_excess.size() ? rep.v_excess.maxCoeff() : 0.0);
    s.max_gen_excess = std::max(s.max_gen_excess, rep.gen_excess.size() ? rep.gen_excess.maxCoeff() : 0.0);
  }
  const double count = static_cast<double>(split.size());
  s.mean_regret /= count;
  s.mean_sigma_f /= count;
  s.mean_sigma_p /= count;
  s.mean_sigma_q /= count;
  return s;
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,objective_term,ineq_penalty,eq_penalty_p,eq_penalty_q,total,"
         "max_sigma_f,max_sigma_p,max_sigma_q,mean_sigma_f,mean_sigma_p,mean_sigma_q\n";
  out.precision(17);
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << r.loss.objective_term << ',' << r.loss.ineq_penalty << ',' << r.loss.eq_penalty_p << ','
        << r.loss.eq_penalty_q << ',' << r.loss.total << ',' << r.max_sigma_f << ',' << r.max_sigma_p << ','
        << r.max_sigma_q << ',' << r.mean_sigma_f << ',' << r.mean_sigma_p << ',' << r.mean_sigma_q << '\n';
  }
}

}  // namespace opflab
