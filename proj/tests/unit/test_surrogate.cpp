#include "fixtures.hpp"
#include "oracle.hpp"

#include "opflab/error.hpp"
#include "opflab/surrogate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace opflab;

namespace {

oracle::Net to_oracle(const SurrogateModel& m) {
  oracle::Net net;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    net.W.push_back(m.weights[l].cast<long double>());
    net.b.push_back(m.biases[l].cast<long double>());
  }
  net.tanh_hidden = m.hidden_activation == Activation::tanh;
  const Eigen::Index n = m.bus_count();
  net.lo.resize(4, n);
  net.hi.resize(4, n);
  for (int h = 0; h < 4; ++h) {
    net.lo.row(h) = m.heads[static_cast<std::size_t>(h)].lo.cast<long double>().transpose();
    net.hi.row(h) = m.heads[static_cast<std::size_t>(h)].hi.cast<long double>().transpose();
  }
  net.slack = m.slack;
  return net;
}

oracle::Penalties to_oracle(const Multipliers& m) {
  return {m.lambda.cast<long double>(), m.mu_p.cast<long double>(), m.mu_q.cast<long double>()};
}

std::vector<Sample> random_samples(const NetworkCase& c, int count, std::mt19937_64& rng, bool labeled) {
  std::uniform_real_distribution<double> u(0.6, 1.4);
  std::vector<Sample> out;
  for (int k = 0; k < count; ++k) {
    Sample s;
    s.x.resize(2 * c.bus_count());
    for (Eigen::Index i = 0; i < c.bus_count(); ++i) {
      s.x[i] = c.p_load()[i] * u(rng);
      s.x[c.bus_count() + i] = c.q_load()[i] * u(rng);
    }
    if (labeled) {
      std::normal_distribution<double> nd(0.0, 0.5);
      s.label.resize(4 * c.bus_count());
      for (Eigen::Index i = 0; i < s.label.size(); ++i) s.label[i] = nd(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Multipliers random_multipliers(const NetworkCase& c, Eigen::Index samples, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Multipliers m{Eigen::MatrixXd(samples, c.branch_count()), Eigen::MatrixXd(samples, c.bus_count()),
                Eigen::MatrixXd(samples, c.bus_count())};
  for (Eigen::Index k = 0; k < samples; ++k) {
    for (Eigen::Index e = 0; e < c.branch_count(); ++e) m.lambda(k, e) = u(rng);
    for (Eigen::Index i = 0; i < c.bus_count(); ++i) {
      m.mu_p(k, i) = u(rng);
      m.mu_q(k, i) = u(rng);
    }
  }
  return m;
}

std::vector<oracle::VecL> xs_of(const std::vector<Sample>& s) {
  std::vector<oracle::VecL> out;
  for (const auto& x : s) out.push_back(x.x.cast<long double>());
  return out;
}

std::vector<oracle::VecL> labels_of(const std::vector<Sample>& s) {
  std::vector<oracle::VecL> out;
  for (const auto& x : s) out.push_back(x.label.cast<long double>());
  return out;
}

const std::vector<Eigen::Index> kSmall = {4, 4};

}  // namespace

TEST(Init, SameSeedSameWeights) {
  const NetworkCase c = fixtures::fig1();
  const auto a = init_model(c, kSmall, 5);
  const auto b = init_model(c, kSmall, 5);
  const auto d = init_model(c, kSmall, 6);
  EXPECT_EQ(flatten_parameters(a), flatten_parameters(b));
  EXPECT_NE(flatten_parameters(a), flatten_parameters(d));
  for (const auto& bias : a.biases) EXPECT_EQ(bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Init, Case39Dimensions) {
  const NetworkCase c = fixtures::case39();
  const std::vector<Eigen::Index> hidden = {60, 60, 60};
  const auto m = init_model(c, hidden, 1);
  EXPECT_EQ(m.layer_dims, (std::vector<Eigen::Index>{78, 60, 60, 60, 156}));
  EXPECT_EQ(m.weights[0].rows(), 60);
  EXPECT_EQ(m.weights[0].cols(), 78);
  EXPECT_EQ(m.parameter_count(), 78 * 60 + 60 + 2 * (60 * 60 + 60) + 60 * 156 + 156);
  EXPECT_EQ(flatten_parameters(m).size(), m.parameter_count());
  EXPECT_EQ(m.case_digest, case_digest(c));
}

TEST(Init, GlorotRange) {
  const auto m = init_model(fixtures::case39(), std::vector<Eigen::Index>{60}, 9);
  for (const auto& w : m.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    EXPECT_LE(w.cwiseAbs().maxCoeff(), limit);
  }
}

TEST(Init, EmptyHiddenRejected) {
  EXPECT_THROW(init_model(fixtures::fig1(), std::vector<Eigen::Index>{}, 1), PreconditionError);
  EXPECT_THROW(init_model(fixtures::fig1(), std::vector<Eigen::Index>{4, 0}, 1), PreconditionError);
}

TEST(Predict, ZeroWeightsGiveBoxMidpoints) {
  const NetworkCase c = fixtures::lossy_triangle();
  auto m = init_model(c, kSmall, 1);
  assign_parameters(m, Eigen::VectorXd::Zero(m.parameter_count()));
  const auto d = predict(m, nominal_loads(c).features());
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(d.p_g[i], 0.5 * (c.p_min()[i] + c.p_max()[i]));
    EXPECT_DOUBLE_EQ(d.q_g[i], 0.5 * (c.q_min()[i] + c.q_max()[i]));
    EXPECT_DOUBLE_EQ(d.v[i], 1.0);
  }
  EXPECT_EQ(d.theta[c.slack_index()], 0.0);
  EXPECT_EQ(d.p_g[2], 0.0);  // no generator at bus 3
}

TEST(Predict, SaturatesAtBoxEdges) {
  const NetworkCase c = fixtures::fig1();
  auto m = init_model(c, kSmall, 1);
  m.weights.back().setZero();
  m.biases.back().setConstant(60.0);
  auto d = predict(m, nominal_loads(c).features());
  EXPECT_NEAR(d.p_g[1], 4.0, 1e-12);
  EXPECT_NEAR(d.v[2], 1.1, 1e-12);
  EXPECT_NEAR(d.theta[1], m.heads[head_theta].hi[1], 1e-12);
  m.biases.back().setConstant(-60.0);
  d = predict(m, nominal_loads(c).features());
  EXPECT_NEAR(d.q_g[0], -5.0, 1e-12);
  EXPECT_NEAR(d.v[1], 0.9, 1e-12);
  EXPECT_EQ(d.theta[0], 0.0);
}

TEST(Predict, StaysInsideBoxes) {
  const NetworkCase c = fixtures::case39();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = init_model(c, std::vector<Eigen::Index>{16}, static_cast<std::uint64_t>(trial));
    Eigen::VectorXd theta = flatten_parameters(m);
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] *= 1 + std::abs(nd(rng));
    assign_parameters(m, theta);
    Eigen::VectorXd x(78);
    for (Eigen::Index k = 0; k < 78; ++k) x[k] = nd(rng);
    const auto y = predict(m, x).stacked();
    for (int h = 0; h < 4; ++h) {
      for (Eigen::Index i = 0; i < 39; ++i) {
        EXPECT_GE(y[h * 39 + i], m.heads[static_cast<std::size_t>(h)].lo[i]);
        EXPECT_LE(y[h * 39 + i], m.heads[static_cast<std::size_t>(h)].hi[i]);
      }
    }
  }
}

TEST(Predict, MatchesOracleForward) {
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(4);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    const auto m = init_model(c, kSmall, 3, {act});
    const auto net = to_oracle(m);
    for (const auto& s : random_samples(c, 5, rng, false)) {
      const auto y = predict(m, s.x).stacked();
      const auto ref = oracle::forward(net, s.x.cast<long double>());
      EXPECT_LT((y.cast<long double>() - ref).cwiseAbs().maxCoeff(), 1e-13L);
    }
  }
}

TEST(Predict, WrongFeatureLength) {
  const auto m = init_model(fixtures::fig1(), kSmall, 1);
  EXPECT_THROW(predict(m, Eigen::VectorXd::Zero(5)), DimensionError);
}

TEST(BaseLoss, MseOfCounterexampleCandidates) {
  auto stack = [](double a, double b, double c) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(12);
    y.head(3) << a, b, c;
    return y;
  };
  const std::vector<Eigen::VectorXd> label = {stack(3, 0, 0)};
  EXPECT_DOUBLE_EQ(mse_between(label, std::vector<Eigen::VectorXd>{stack(1, 2, 0)}), 8.0);
  EXPECT_DOUBLE_EQ(mse_between(label, std::vector<Eigen::VectorXd>{stack(1, 1, 1)}), 6.0);
  const std::vector<Eigen::VectorXd> two = {stack(3, 0, 0), stack(0, 0, 0)};
  EXPECT_DOUBLE_EQ(mse_between(two, std::vector<Eigen::VectorXd>{stack(1, 2, 0), stack(0, 0, 1)}), 4.5);
}

TEST(BaseLoss, DecisionAtMidpoints) {
  const NetworkCase c = fixtures::fig1();
  auto m = init_model(c, kSmall, 1);
  assign_parameters(m, Eigen::VectorXd::Zero(m.parameter_count()));
  std::mt19937_64 rng(1);
  const auto batch = random_samples(c, 4, rng, false);
  // p_g = (2, 2, 2) whatever the load
  EXPECT_DOUBLE_EQ(loss_decision(m, batch, c), 2 * 1 + 2 * 2 + 2 * 3);
}

TEST(BaseLoss, MseAtMidpointsAndGenerationSlice) {
  const NetworkCase c = fixtures::fig1();
  auto m = init_model(c, kSmall, 1);
  assign_parameters(m, Eigen::VectorXd::Zero(m.parameter_count()));
  Sample s{nominal_loads(c).features(), predict(m, nominal_loads(c).features()).stacked()};
  s.label[0] += 1.0;  // p_g
  s.label[6] += 2.0;  // v
  const std::vector<Sample> batch = {s};
  EXPECT_DOUBLE_EQ(loss_mse(m, batch), 5.0);
  EXPECT_DOUBLE_EQ(loss_mse(m, batch, MseLabels::generation), 1.0);
}

TEST(BaseLoss, DuplicatingBatchChangesNothing) {
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(8);
  const auto m = init_model(c, kSmall, 2);
  auto batch = random_samples(c, 6, rng, true);
  const double mse = loss_mse(m, batch), dec = loss_decision(m, batch, c);
  auto twice = batch;
  twice.insert(twice.end(), batch.begin(), batch.end());
  EXPECT_NEAR(loss_mse(m, twice), mse, 1e-12 * mse);
  EXPECT_NEAR(loss_decision(m, twice, c), dec, 1e-12 * std::abs(dec));
}

TEST(BaseLoss, MseNeedsLabels) {
  const NetworkCase c = fixtures::fig1();
  std::mt19937_64 rng(1);
  const auto m = init_model(c, kSmall, 1);
  EXPECT_THROW(loss_mse(m, random_samples(c, 2, rng, false)), PreconditionError);
}

TEST(Lagrangian, ZeroMultipliersEqualBase) {
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(12);
  const auto m = init_model(c, kSmall, 4);
  const auto data = random_samples(c, 5, rng, true);
  const auto zero = Multipliers::constant(5, c, 0.0);
  EXPECT_DOUBLE_EQ(lagrangian_loss(m, c, data, zero, {BaseLoss::mse}).total, loss_mse(m, data));
  EXPECT_DOUBLE_EQ(lagrangian_loss(m, c, data, zero, {BaseLoss::decision}).total, loss_decision(m, data, c));
}

TEST(Lagrangian, SingleBusExample) {
  // one bus, generator box p [0, 5], q [-5, 5]; zero weights predict (2.5, 0)
  const NetworkCase c = fixtures::single_bus(1.0, 0.5);
  auto m = init_model(c, kSmall, 1);
  assign_parameters(m, Eigen::VectorXd::Zero(m.parameter_count()));
  const std::vector<Sample> data = {{nominal_loads(c).features(), {}}};
  const auto mult = Multipliers::constant(1, c, 2.0);
  const auto br = lagrangian_loss(m, c, data, mult, {BaseLoss::decision});
  EXPECT_DOUBLE_EQ(br.objective_term, 2.5);
  EXPECT_DOUBLE_EQ(br.eq_penalty_p, 2.0 * 1.5);
  EXPECT_DOUBLE_EQ(br.eq_penalty_q, 2.0 * 0.5);
  EXPECT_DOUBLE_EQ(br.ineq_penalty, 0.0);
  EXPECT_DOUBLE_EQ(br.total, 2.5 + 3.0 + 1.0);
}

TEST(Lagrangian, MatchesOracle) {
  std::mt19937_64 rng(21);
  for (const NetworkCase& c : {fixtures::lossy_triangle(), fixtures::case39()}) {
    const auto m = init_model(c, std::vector<Eigen::Index>{8, 8}, 6, {Activation::tanh});
    const auto data = random_samples(c, 4, rng, true);
    const auto mult = random_multipliers(c, 4, rng);
    const auto net = to_oracle(m);
    for (auto [settings, width] : {std::pair{LossSettings{BaseLoss::decision}, Eigen::Index{0}},
                                   std::pair{LossSettings{BaseLoss::mse}, 4 * c.bus_count()},
                                   std::pair{LossSettings{BaseLoss::mse, MseLabels::generation}, 2 * c.bus_count()}}) {
      const double got = lagrangian_loss(m, c, data, mult, settings).total;
      const auto want = oracle::lagrangian(c, net, xs_of(data), labels_of(data), to_oracle(mult), width);
      EXPECT_NEAR(got, static_cast<double>(want), 1e-10 * (1 + std::abs(static_cast<double>(want))));
    }
  }
}

TEST(Lagrangian, BatchIndicesSelectMultiplierRows) {
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(22);
  const auto m = init_model(c, kSmall, 6);
  const auto data = random_samples(c, 4, rng, true);
  const auto mult = random_multipliers(c, 4, rng);
  const std::vector<std::size_t> idx = {2};
  const std::vector<Sample> one = {data[2]};
  Multipliers row{mult.lambda.middleRows(2, 1), mult.mu_p.middleRows(2, 1), mult.mu_q.middleRows(2, 1)};
  EXPECT_NEAR(lagrangian_loss(m, c, data, idx, mult, {}).total, lagrangian_loss(m, c, one, row, {}).total, 1e-12);
}

TEST(Lagrangian, MonotoneInMultipliers) {
  const NetworkCase c = fixtures::case39();
  std::mt19937_64 rng(23);
  const auto m = init_model(c, std::vector<Eigen::Index>{8}, 6);
  const auto data = random_samples(c, 3, rng, true);
  auto mult = random_multipliers(c, 3, rng);
  double prev = lagrangian_loss(m, c, data, mult, {}).total;
  for (int step = 0; step < 5; ++step) {
    mult.lambda.array() += 0.5;
    mult.mu_p.array() += 0.5;
    const double now = lagrangian_loss(m, c, data, mult, {}).total;
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(Gradient, MatchesOracleDifferences) {
  // Central differences of the independent long double loss, per weight.
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(31);
  for (Activation act : {Activation::relu, Activation::tanh}) {
    const auto m = init_model(c, kSmall, 8, {act});
    const auto data = random_samples(c, 3, rng, true);
    const auto mult = random_multipliers(c, 3, rng);
    for (auto [settings, width] : {std::pair{LossSettings{BaseLoss::decision}, Eigen::Index{0}},
                                   std::pair{LossSettings{BaseLoss::mse}, Eigen::Index{12}}}) {
      const Eigen::VectorXd g = flatten(grad_weights(m, c, data, mult, settings));
      const Eigen::VectorXd theta = flatten_parameters(m);
      const long double h = 1e-7L;
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        auto at = [&](long double delta) {
          SurrogateModel shifted = m;
          auto net = to_oracle(shifted);
          // locate parameter k in the oracle net (weights column-major, then bias)
          Eigen::Index left = k;
          for (std::size_t l = 0; l < net.W.size(); ++l) {
            const Eigen::Index nw = net.W[l].size();
            if (left < nw) {
              net.W[l](left % net.W[l].rows(), left / net.W[l].rows()) += delta;
              break;
            }
            left -= nw;
            if (left < net.b[l].size()) {
              net.b[l][left] += delta;
              break;
            }
            left -= net.b[l].size();
          }
          return oracle::lagrangian(c, net, xs_of(data), labels_of(data), to_oracle(mult), width);
        };
        const double fd = static_cast<double>((at(h) - at(-h)) / (2 * h));
        EXPECT_NEAR(g[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "parameter " << k;
      }
    }
  }
}

TEST(Gradient, ZeroAtLabelsWithoutPenalties) {
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(32);
  const auto m = init_model(c, kSmall, 9);
  auto data = random_samples(c, 4, rng, false);
  for (auto& s : data) s.label = predict(m, s.x).stacked();
  const auto g = flatten(grad_weights(m, c, data, Multipliers::constant(4, c, 0.0), {BaseLoss::mse}));
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradient, PinnedOutputsGetNoGradient) {
  // Bus 3 has no generator (p and q boxes collapse) and the slack angle is fixed.
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(33);
  const auto m = init_model(c, kSmall, 10);
  const auto data = random_samples(c, 4, rng, true);
  const auto mult = random_multipliers(c, 4, rng);
  for (BaseLoss base : {BaseLoss::decision, BaseLoss::mse}) {
    const auto g = grad_weights(m, c, data, mult, {base});
    for (Eigen::Index row : {Eigen::Index{2}, Eigen::Index{3 + 2}, Eigen::Index{9 + c.slack_index()}}) {
      EXPECT_EQ(g.weights.back().row(row).cwiseAbs().maxCoeff(), 0.0) << row;
      EXPECT_EQ(g.biases.back()[row], 0.0) << row;
    }
  }
}

TEST(Gradient, ReportsTheLossItDifferentiates) {
  const NetworkCase c = fixtures::lossy_triangle();
  std::mt19937_64 rng(34);
  const auto m = init_model(c, kSmall, 11);
  const auto data = random_samples(c, 4, rng, true);
  const auto mult = random_multipliers(c, 4, rng);
  LossBreakdown seen;
  grad_weights(m, c, data, mult, {}, &seen);
  EXPECT_NEAR(seen.total, lagrangian_loss(m, c, data, mult, {}).total, 1e-12);
}

TEST(Serialize, RoundTripIsBitExact) {
  const NetworkCase c = fixtures::case39();
  const auto m = init_model(c, std::vector<Eigen::Index>{12, 7}, 3, {Activation::tanh});
  const auto back = deserialize(serialize(m), c);
  EXPECT_EQ(flatten_parameters(back), flatten_parameters(m));
  EXPECT_EQ(back.layer_dims, m.layer_dims);
  EXPECT_EQ(back.hidden_activation, Activation::tanh);
  const Eigen::VectorXd x = nominal_loads(c).features();
  EXPECT_EQ(predict(back, x).stacked(), predict(m, x).stacked());
  EXPECT_EQ(serialize(back), serialize(m));
}

TEST(Serialize, TruncatedStreamRejected) {
  const NetworkCase c = fixtures::fig1();
  const std::string text = serialize(init_model(c, kSmall, 3));
  EXPECT_THROW(deserialize(text.substr(0, text.size() / 2), c), FormatError);
  EXPECT_THROW(deserialize("not a model\n", c), FormatError);
}

TEST(Serialize, OtherCaseRejected) {
  const std::string text = serialize(init_model(fixtures::fig1(), kSmall, 3));
  EXPECT_THROW(deserialize(text, fixtures::discontinuity()), DigestMismatch);
}

namespace {

// Zero weights; the output biases pin the prediction so that p_g = target
// (an entry of 0 uses a saturating bias) and q_g sits at its midpoint.
SurrogateModel pinned(const NetworkCase& c, const Eigen::Vector3d& p) {
  auto m = init_model(c, kSmall, 1);
  assign_parameters(m, Eigen::VectorXd::Zero(m.parameter_count()));
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double u = (p[i] - c.p_min()[i]) / (c.p_max()[i] - c.p_min()[i]);
    m.biases.back()[i] = u == 0.0 ? -1000.0 : std::log(u / (1 - u));
  }
  return m;
}

}  // namespace

TEST(BaseLoss, OrderingOnCounterexample) {
  const NetworkCase c = fixtures::fig1();
  const Eigen::VectorXd x = nominal_loads(c).features();
  const auto a = pinned(c, Eigen::Vector3d(1, 2, 0));
  const auto b = pinned(c, Eigen::Vector3d(1, 1, 1));
  Eigen::VectorXd label = predict(a, x).stacked();
  label.head(3) << 3, 0, 0;
  const std::vector<Sample> batch = {{x, label}};
  EXPECT_NEAR(loss_mse(a, batch), 8.0, 1e-9);
  EXPECT_NEAR(loss_mse(b, batch), 6.0, 1e-9);
  EXPECT_NEAR(loss_decision(a, batch, c), 5.0, 1e-9);
  EXPECT_NEAR(loss_decision(b, batch, c), 6.0, 1e-9);
  EXPECT_GT(loss_mse(a, batch), loss_mse(b, batch));
  EXPECT_LT(loss_decision(a, batch, c), loss_decision(b, batch, c));
  EXPECT_NEAR(loss_decision(pinned(c, Eigen::Vector3d(3, 0, 0)), batch, c), 3.0, 1e-9);
}

TEST(BaseLoss, ExactLabelsGiveZero) {
  const NetworkCase c = fixtures::lossy_triangle();
  const auto m = init_model(c, kSmall, 4);
  const Eigen::VectorXd x = nominal_loads(c).features();
  const std::vector<Sample> batch = {{x, predict(m, x).stacked()}};
  EXPECT_EQ(loss_mse(m, batch), 0.0);
}

TEST(BaseLoss, EmptyBatchRejected) {
  const NetworkCase c = fixtures::fig1();
  const auto m = init_model(c, kSmall, 1);
  EXPECT_THROW(loss_mse(m, std::vector<Sample>{}), PreconditionError);
  EXPECT_THROW(loss_decision(m, std::vector<Sample>{}, c), PreconditionError);
}

TEST(Predict, NonFiniteInputRejected) {
  const NetworkCase c = fixtures::fig1();
  const auto m = init_model(c, kSmall, 1);
  Eigen::VectorXd x = nominal_loads(c).features();
  x[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(predict(m, x), PreconditionError);
}

TEST(Lagrangian, MissingMultiplierRowRejected) {
  const NetworkCase c = fixtures::fig1();
  std::mt19937_64 rng(1);
  const auto m = init_model(c, kSmall, 1);
  const auto data = random_samples(c, 3, rng, true);
  const auto short_rows = Multipliers::constant(2, c, 1.0);
  EXPECT_THROW(lagrangian_loss(m, c, data, short_rows, {}), PreconditionError);
  EXPECT_THROW(grad_weights(m, c, data, short_rows, {}), PreconditionError);
}

TEST(Serialize, PredictionsSurviveOnManyInputs) {
  const NetworkCase c = fixtures::lossy_triangle();
  const auto m = init_model(c, kSmall, 12);
  const auto back = deserialize(serialize(m), c);
  std::mt19937_64 rng(6);
  for (const auto& s : random_samples(c, 100, rng, false)) EXPECT_EQ(predict(back, s.x).stacked(), predict(m, s.x).stacked());
}
