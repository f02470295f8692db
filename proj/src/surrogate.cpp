#include "opflab/surrogate.hpp"

#include "opflab/error.hpp"
#include "text_util.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace opflab {

namespace {

constexpr std::string_view kModelMagic = "opflab-surrogate";
constexpr int kModelVersion = 1;
constexpr const char* kHeadNames[4] = {"p_g", "q_g", "v", "theta"};

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double activate(Activation a, double z) { return a == Activation::relu ? std::max(z, 0.0) : std::tanh(z); }

double activate_slope(Activation a, double z) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

double sign_or_zero(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

/// Pre-activations and activations of one forward pass.
struct Trace {
  std::vector<Eigen::VectorXd> pre;   // pre[l]: input to activation of layer l + 1
  std::vector<Eigen::VectorXd> post;  // post[0] = x, post[l]: output of layer l
  Eigen::VectorXd gate;               // sigmoid of the output layer
  DispatchDecision decision;
};

Trace forward(const SurrogateModel& model, const Eigen::VectorXd& x) {
  const Eigen::Index n = model.bus_count();
  detail::require_size(x.size(), 2 * n, "load features");
  if (!x.allFinite()) throw PreconditionError("load features contain non-finite values");

  Trace t;
  const std::size_t layers = model.weights.size();
  t.pre.reserve(layers);
  t.post.reserve(layers);
  t.post.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    t.pre.push_back(model.weights[l] * t.post.back() + model.biases[l]);
    if (l + 1 < layers) {
      t.post.push_back(t.pre.back().unaryExpr([&](double z) { return activate(model.hidden_activation, z); }));
    }
  }
  t.gate = t.pre.back().unaryExpr([](double z) { return sigmoid(z); });

  std::array<Eigen::VectorXd, 4> parts;
  for (int h = 0; h < 4; ++h) {
    const auto& hb = model.heads[static_cast<std::size_t>(h)];
    Eigen::VectorXd scaled = hb.lo + t.gate.segment(h * n, n).cwiseProduct(hb.hi - hb.lo);
    // Rounding in lo + (hi - lo) * s can land one ulp outside the box.
    parts[static_cast<std::size_t>(h)] = scaled.cwiseMax(hb.lo).cwiseMin(hb.hi);
  }
  parts[head_theta][model.slack] = 0.0;
  t.decision = {std::move(parts[0]), std::move(parts[1]), std::move(parts[2]), std::move(parts[3])};
  return t;
}

/// Adds d(loss)/d(weights) for one sample given d(loss)/d(decision).
void backward(const SurrogateModel& model, const Trace& t, const DispatchDecision& d_decision,
              ModelGradient& grad) {
  const Eigen::Index n = model.bus_count();
  Eigen::VectorXd delta(4 * n);
  const Eigen::VectorXd slope = t.gate.cwiseProduct((1.0 - t.gate.array()).matrix());
  const Eigen::VectorXd* d_parts[4] = {&d_decision.p_g, &d_decision.q_g, &d_decision.v, &d_decision.theta};
  for (int h = 0; h < 4; ++h) {
    const auto& hb = model.heads[static_cast<std::size_t>(h)];
    delta.segment(h * n, n) =
        d_parts[h]->cwiseProduct(hb.hi - hb.lo).cwiseProduct(slope.segment(h * n, n));
  }
  delta[3 * n + model.slack] = 0.0;

  for (std::size_t l = model.weights.size(); l-- > 0;) {
    grad.weights[l].noalias() += delta * t.post[l].transpose();
    grad.biases[l] += delta;
    if (l > 0) {
      const Eigen::VectorXd back = model.weights[l].transpose() * delta;
      delta = back.cwiseProduct(
          t.pre[l - 1].unaryExpr([&](double z) { return activate_slope(model.hidden_activation, z); }));
    }
  }
}

struct SampleTerms {
  double objective = 0.0;
  double ineq = 0.0;
  double eq_p = 0.0;
  double eq_q = 0.0;
};

/// Loss terms of one sample; fills d_decision when it is non-null.
SampleTerms score_sample(const NetworkCase& network, const Sample& sample, const DispatchDecision& y,
                         Eigen::Index row, const Multipliers& mult, const LossSettings& settings,
                         double batch_size, DispatchDecision* d_decision) {
  const Eigen::Index n = network.bus_count();
  const Eigen::Index m = network.branch_count();
  SampleTerms terms;
  const bool want_grad = d_decision != nullptr;
  if (want_grad) {
    d_decision->p_g = Eigen::VectorXd::Zero(n);
    d_decision->q_g = Eigen::VectorXd::Zero(n);
    d_decision->v = Eigen::VectorXd::Zero(n);
    d_decision->theta = Eigen::VectorXd::Zero(n);
  }

  if (settings.base == BaseLoss::decision) {
    terms.objective = generation_cost(network, y.p_g) / batch_size;
    if (want_grad) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (network.generator_at(i) < 0) continue;
        d_decision->p_g[i] += (2.0 * network.cost_c2()[i] * y.p_g[i] + network.cost_c1()[i]) / batch_size;
      }
    }
  } else {
    const Eigen::Index width = settings.mse_labels == MseLabels::full ? 4 * n : 2 * n;
    if (sample.label.size() != 4 * n) {
      throw PreconditionError("MSE loss needs a 4N label for every sample in the batch");
    }
    const Eigen::VectorXd diff = (y.stacked() - sample.label).head(width);
    terms.objective = diff.squaredNorm() / batch_size;
    if (want_grad) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(4 * n);
      g.head(width) = 2.0 * diff / batch_size;
      *d_decision = DispatchDecision::from_stacked(g);
    }
  }

  const Loads loads = Loads::from_features(sample.x);
  const BranchFlows flows = branch_flows(network, y.v, y.theta);
  Eigen::Matrix<double, 2, Eigen::Dynamic> d_pf = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, m);
  Eigen::Matrix<double, 2, Eigen::Dynamic> d_qf = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, m);

  for (Eigen::Index e = 0; e < m; ++e) {
    const double lambda = mult.lambda(row, e);
    const double s_max = network.branches()[static_cast<std::size_t>(e)].s_max;
    int worst = 0;
    double worst_mag = -1.0;
    for (int o = 0; o < 2; ++o) {
      const double mag = std::hypot(flows.p_f(o, e), flows.q_f(o, e));
      if (mag > worst_mag) {
        worst_mag = mag;
        worst = o;
      }
    }
    const double excess = worst_mag - s_max;
    if (excess > 0.0) {
      terms.ineq += lambda * excess;
      if (want_grad && lambda != 0.0) {
        d_pf(worst, e) += lambda * flows.p_f(worst, e) / worst_mag;
        d_qf(worst, e) += lambda * flows.q_f(worst, e) / worst_mag;
      }
    }
  }

  const auto [rp, rq] = nodal_mismatch(network, loads, y, flows);
  terms.eq_p = mult.mu_p.row(row).dot(rp.cwiseAbs());
  terms.eq_q = mult.mu_q.row(row).dot(rq.cwiseAbs());

  if (!want_grad) return terms;

  Eigen::VectorXd cp(n), cq(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cp[i] = mult.mu_p(row, i) * sign_or_zero(rp[i]);
    cq[i] = mult.mu_q(row, i) * sign_or_zero(rq[i]);
  }
  d_decision->p_g += cp;
  d_decision->q_g += cq;
  for (Eigen::Index e = 0; e < m; ++e) {
    const Eigen::Index ends[2] = {network.from_index(static_cast<std::size_t>(e)),
                                  network.to_index(static_cast<std::size_t>(e))};
    for (int o = 0; o < 2; ++o) {
      d_pf(o, e) -= cp[ends[o]];
      d_qf(o, e) -= cq[ends[o]];
    }
  }

  accumulate_flow_pullback(network, y.v, y.theta, d_pf, d_qf, d_decision->v, d_decision->theta);
  return terms;
}

void check_batch(std::span<const Sample> data, std::span<const std::size_t> batch,
                 const Multipliers& mult, const NetworkCase& network) {
  if (batch.empty()) throw PreconditionError("empty batch");
  if (mult.lambda.cols() != network.branch_count() || mult.mu_p.cols() != network.bus_count() ||
      mult.mu_q.cols() != network.bus_count()) {
    throw DimensionError("multiplier arrays do not match the case dimensions");
  }
  for (auto idx : batch) {
    if (idx >= data.size()) throw PreconditionError("batch index out of range");
    const auto row = static_cast<Eigen::Index>(idx);
    if (row >= mult.lambda.rows() || row >= mult.mu_p.rows() || row >= mult.mu_q.rows()) {
      throw PreconditionError("missing multiplier row for batch sample " + std::to_string(idx));
    }
  }
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

LossBreakdown accumulate(const SurrogateModel& model, const NetworkCase& network, std::span<const Sample> data,
                         std::span<const std::size_t> batch, const Multipliers& mult,
                         const LossSettings& settings, ModelGradient* grad) {
  check_batch(data, batch, mult, network);
  if (model.bus_count() != network.bus_count()) {
    throw DimensionError("model and case have different bus counts");
  }
  const double size = static_cast<double>(batch.size());
  LossBreakdown out;
  DispatchDecision d_decision;
  for (auto idx : batch) {
    const Trace t = forward(model, data[idx].x);
    const SampleTerms terms = score_sample(network, data[idx], t.decision, static_cast<Eigen::Index>(idx), mult,
                                           settings, size, grad ? &d_decision : nullptr);
    out.objective_term += terms.objective;
    out.ineq_penalty += terms.ineq;
    out.eq_penalty_p += terms.eq_p;
    out.eq_penalty_q += terms.eq_q;
    if (grad) backward(model, t, d_decision, *grad);
  }
  out.total = out.objective_term + out.ineq_penalty + out.eq_penalty_p + out.eq_penalty_q;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string to_string(BaseLoss b) { return b == BaseLoss::decision ? "decision" : "mse"; }
std::string to_string(MseLabels m) { return m == MseLabels::full ? "full" : "generation"; }

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw PreconditionError("unknown activation '" + std::string(s) + "'");
}

BaseLoss base_loss_from_string(std::string_view s) {
  if (s == "decision") return BaseLoss::decision;
  if (s == "mse") return BaseLoss::mse;
  throw PreconditionError("unknown loss '" + std::string(s) + "'");
}

MseLabels mse_labels_from_string(std::string_view s) {
  if (s == "full") return MseLabels::full;
  if (s == "generation") return MseLabels::generation;
  throw PreconditionError("unknown MSE label layout '" + std::string(s) + "'");
}

Eigen::Index SurrogateModel::parameter_count() const {
  Eigen::Index count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) count += weights[l].size() + biases[l].size();
  return count;
}

ModelGradient ModelGradient::zeros_like(const SurrogateModel& model) {
  ModelGradient g;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
  return g;
}

ModelGradient& ModelGradient::operator+=(const ModelGradient& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

namespace {

template <typename Mats, typename Vecs>
Eigen::VectorXd pack(const Mats& mats, const Vecs& vecs, Eigen::Index total) {
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < mats.size(); ++l) {
    flat.segment(at, mats[l].size()) = mats[l].reshaped();
    at += mats[l].size();
    flat.segment(at, vecs[l].size()) = vecs[l];
    at += vecs[l].size();
  }
  return flat;
}

}  // namespace

Eigen::VectorXd flatten_parameters(const SurrogateModel& model) {
  return pack(model.weights, model.biases, model.parameter_count());
}

void assign_parameters(SurrogateModel& model, const Eigen::VectorXd& flat) {
  detail::require_size(flat.size(), model.parameter_count(), "parameter vector");
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    model.weights[l].reshaped() = flat.segment(at, model.weights[l].size());
    at += model.weights[l].size();
    model.biases[l] = flat.segment(at, model.biases[l].size());
    at += model.biases[l].size();
  }
}

Eigen::VectorXd flatten(const ModelGradient& gradient) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < gradient.weights.size(); ++l) {
    total += gradient.weights[l].size() + gradient.biases[l].size();
  }
  return pack(gradient.weights, gradient.biases, total);
}

Multipliers Multipliers::constant(Eigen::Index samples, const NetworkCase& network, double value) {
  return {Eigen::MatrixXd::Constant(samples, network.branch_count(), value),
          Eigen::MatrixXd::Constant(samples, network.bus_count(), value),
          Eigen::MatrixXd::Constant(samples, network.bus_count(), value)};
}

SurrogateModel init_model(const NetworkCase& network, std::span<const Eigen::Index> hidden_dims,
                          std::uint64_t seed, const ModelOptions& options) {
  if (hidden_dims.empty()) throw PreconditionError("at least one hidden layer is required");
  for (auto d : hidden_dims) {
    if (d <= 0) throw PreconditionError("hidden layer sizes must be positive");
  }
  if (network.slack_index() < 0) throw PreconditionError("case has no slack bus");
  if (!(options.angle_box > 0.0)) throw PreconditionError("angle box must be positive");

  const Eigen::Index n = network.bus_count();
  SurrogateModel model;
  model.layer_dims.push_back(2 * n);
  model.layer_dims.insert(model.layer_dims.end(), hidden_dims.begin(), hidden_dims.end());
  model.layer_dims.push_back(4 * n);
  model.hidden_activation = options.hidden_activation;
  model.slack = network.slack_index();
  model.case_digest = case_digest(network);
  model.heads[head_p] = {network.p_min(), network.p_max()};
  model.heads[head_q] = {network.q_min(), network.q_max()};
  model.heads[head_v] = {network.v_min(), network.v_max()};
  model.heads[head_theta] = {Eigen::VectorXd::Constant(n, -options.angle_box),
                             Eigen::VectorXd::Constant(n, options.angle_box)};

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const Eigen::Index fan_in = model.layer_dims[l];
    const Eigen::Index fan_out = model.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return model;
}

DispatchDecision predict(const SurrogateModel& model, const Eigen::VectorXd& x) {
  return forward(model, x).decision;
}

double mse_between(std::span<const Eigen::VectorXd> labels, std::span<const Eigen::VectorXd> predictions) {
  if (labels.empty()) throw PreconditionError("empty batch");
  if (labels.size() != predictions.size()) throw DimensionError("label and prediction counts differ");
  double total = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    detail::require_size(predictions[k].size(), labels[k].size(), "prediction");
    total += (labels[k] - predictions[k]).squaredNorm();
  }
  return total / static_cast<double>(labels.size());
}

double loss_mse(const SurrogateModel& model, std::span<const Sample> batch, MseLabels labels) {
  if (batch.empty()) throw PreconditionError("empty batch");
  const Eigen::Index n = model.bus_count();
  const Eigen::Index width = labels == MseLabels::full ? 4 * n : 2 * n;
  std::vector<Eigen::VectorXd> truth, guess;
  for (const Sample& s : batch) {
    if (s.label.size() != 4 * n) throw PreconditionError("MSE loss needs a 4N label for every sample");
    truth.push_back(s.label.head(width));
    guess.push_back(predict(model, s.x).stacked().head(width));
  }
  return mse_between(truth, guess);
}

double loss_decision(const SurrogateModel& model, std::span<const Sample> batch, const NetworkCase& network) {
  if (batch.empty()) throw PreconditionError("empty batch");
  double total = 0.0;
  for (const Sample& s : batch) total += generation_cost(network, predict(model, s.x).p_g);
  return total / static_cast<double>(batch.size());
}

LossBreakdown lagrangian_loss(const SurrogateModel& model, const NetworkCase& network,
                              std::span<const Sample> data, std::span<const std::size_t> batch,
                              const Multipliers& multipliers, const LossSettings& settings) {
  return accumulate(model, network, data, batch, multipliers, settings, nullptr);
}

LossBreakdown lagrangian_loss(const SurrogateModel& model, const NetworkCase& network,
                              std::span<const Sample> data, const Multipliers& multipliers,
                              const LossSettings& settings) {
  const auto rows = all_rows(data.size());
  return lagrangian_loss(model, network, data, rows, multipliers, settings);
}

ModelGradient grad_weights(const SurrogateModel& model, const NetworkCase& network,
                           std::span<const Sample> data, std::span<const std::size_t> batch,
                           const Multipliers& multipliers, const LossSettings& settings, LossBreakdown* loss) {
  ModelGradient grad = ModelGradient::zeros_like(model);
  const LossBreakdown value = accumulate(model, network, data, batch, multipliers, settings, &grad);
  if (loss) *loss = value;
  return grad;
}

ModelGradient grad_weights(const SurrogateModel& model, const NetworkCase& network,
                           std::span<const Sample> data, const Multipliers& multipliers,
                           const LossSettings& settings, LossBreakdown* loss) {
  const auto rows = all_rows(data.size());
  return grad_weights(model, network, data, rows, multipliers, settings, loss);
}

// ---------------------------------------------------------------------------
// Model file
//
//   opflab-surrogate 1
//   case_digest <16 hex>
//   activation relu|tanh
//   slack <bus index>
//   layers <count> <d0> <d1> ...
//   head <name> lo <N reals>
//   head <name> hi <N reals>          (p_g, q_g, v, theta)
//   weights <l> <rows> <cols>         followed by <rows> lines of <cols> reals
//   bias <l> <size>                   followed by one line of <size> reals
//   end

std::string serialize(const SurrogateModel& model) {
  using detail::format_real;
  std::ostringstream out;
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "case_digest " << model.case_digest << '\n';
  out << "activation " << to_string(model.hidden_activation) << '\n';
  out << "slack " << model.slack << '\n';
  out << "layers " << model.layer_dims.size();
  for (auto d : model.layer_dims) out << ' ' << d;
  out << '\n';
  auto write_vec = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << format_real(v[i]);
    out << '\n';
  };
  for (int h = 0; h < 4; ++h) {
    out << "head " << kHeadNames[h] << " lo ";
    write_vec(model.heads[static_cast<std::size_t>(h)].lo);
    out << "head " << kHeadNames[h] << " hi ";
    write_vec(model.heads[static_cast<std::size_t>(h)].hi);
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    const auto& w = model.weights[l];
    out << "weights " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) write_vec(w.row(r).transpose());
    out << "bias " << l << ' ' << model.biases[l].size() << '\n';
    write_vec(model.biases[l]);
  }
  out << "end\n";
  return out.str();
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : lines_(detail::split_lines(text)) {}

  std::vector<std::string_view> next(std::string_view what) {
    if (at_ >= lines_.size()) throw FormatError("model file truncated while reading " + std::string(what));
    return detail::split(lines_[at_++], " \t\r");
  }

  std::vector<std::string_view> keyed(std::string_view key) {
    auto tokens = next(key);
    if (tokens.empty() || tokens[0] != key) {
      throw FormatError("model file line " + std::to_string(at_) + ": expected '" + std::string(key) + "'");
    }
    return tokens;
  }

  std::size_t line() const { return at_; }

 private:
  std::vector<std::string_view> lines_;
  std::size_t at_ = 0;
};

long long to_int(std::string_view token, std::size_t line) {
  const auto v = detail::parse_real(token);
  if (!v || *v != std::floor(*v)) {
    throw FormatError("model file line " + std::to_string(line) + ": expected an integer");
  }
  return static_cast<long long>(*v);
}

Eigen::VectorXd to_vector(std::span<const std::string_view> tokens, Eigen::Index expected, std::size_t line) {
  if (static_cast<Eigen::Index>(tokens.size()) != expected) {
    throw FormatError("model file line " + std::to_string(line) + ": expected " + std::to_string(expected) +
                      " values, found " + std::to_string(tokens.size()));
  }
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    const auto x = detail::parse_real(tokens[static_cast<std::size_t>(i)]);
    if (!x) throw FormatError("model file line " + std::to_string(line) + ": bad number");
    v[i] = *x;
  }
  return v;
}

}  // namespace

SurrogateModel deserialize(std::string_view text, const NetworkCase& network) {
  LineReader in(text);
  const auto magic = in.next("header");
  if (magic.size() != 2 || magic[0] != kModelMagic) throw FormatError("not an opflab surrogate model file");
  if (magic[1] != std::to_string(kModelVersion)) {
    throw FormatError("model file version " + std::string(magic[1]) + " is not supported (expected " +
                      std::to_string(kModelVersion) + ")");
  }

  SurrogateModel model;
  const auto digest = in.keyed("case_digest");
  if (digest.size() != 2) throw FormatError("malformed case_digest line");
  model.case_digest = std::string(digest[1]);
  const std::string expected = case_digest(network);
  if (model.case_digest != expected) {
    throw DigestMismatch("model was built for case digest " + model.case_digest + " but the case has digest " +
                         expected);
  }
  const auto act = in.keyed("activation");
  if (act.size() != 2) throw FormatError("malformed activation line");
  model.hidden_activation = activation_from_string(act[1]);
  const auto slack = in.keyed("slack");
  if (slack.size() != 2) throw FormatError("malformed slack line");
  model.slack = to_int(slack[1], in.line());

  const auto layers = in.keyed("layers");
  if (layers.size() < 2) throw FormatError("malformed layers line");
  const auto count = to_int(layers[1], in.line());
  if (count < 3 || static_cast<std::size_t>(count) + 2 != layers.size()) {
    throw FormatError("layers line does not match its declared count");
  }
  for (std::size_t k = 2; k < layers.size(); ++k) model.layer_dims.push_back(to_int(layers[k], in.line()));
  const Eigen::Index n = network.bus_count();
  if (model.layer_dims.front() != 2 * n || model.layer_dims.back() != 4 * n) {
    throw FormatError("model layer sizes do not match the case bus count");
  }
  if (model.slack < 0 || model.slack >= n) throw FormatError("slack index out of range");

  for (int h = 0; h < 4; ++h) {
    for (const char* side : {"lo", "hi"}) {
      const auto tokens = in.keyed("head");
      if (tokens.size() < 3 || tokens[1] != kHeadNames[h] || tokens[2] != side) {
        throw FormatError("model file line " + std::to_string(in.line()) + ": expected head " + kHeadNames[h] +
                          " " + side);
      }
      auto v = to_vector(std::span(tokens).subspan(3), n, in.line());
      auto& hb = model.heads[static_cast<std::size_t>(h)];
      (std::string_view(side) == "lo" ? hb.lo : hb.hi) = std::move(v);
    }
  }

  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const auto header = in.keyed("weights");
    if (header.size() != 4 || to_int(header[1], in.line()) != static_cast<long long>(l) ||
        to_int(header[2], in.line()) != model.layer_dims[l + 1] ||
        to_int(header[3], in.line()) != model.layer_dims[l]) {
      throw FormatError("model file line " + std::to_string(in.line()) + ": unexpected weights header");
    }
    Eigen::MatrixXd w(model.layer_dims[l + 1], model.layer_dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const auto tokens = in.next("weights");
      w.row(r) = to_vector(tokens, w.cols(), in.line()).transpose();
    }
    const auto bias = in.keyed("bias");
    if (bias.size() != 3 || to_int(bias[1], in.line()) != static_cast<long long>(l) ||
        to_int(bias[2], in.line()) != model.layer_dims[l + 1]) {
      throw FormatError("model file line " + std::to_string(in.line()) + ": unexpected bias header");
    }
    const auto tokens = in.next("bias");
    model.weights.push_back(std::move(w));
    model.biases.push_back(to_vector(tokens, model.layer_dims[l + 1], in.line()));
  }
  in.keyed("end");
  return model;
}

}  // namespace opflab
