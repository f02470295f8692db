#include "fixtures.hpp"

#include "opflab/error.hpp"
#include "opflab/labeler.hpp"
#include "opflab/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace opflab;

namespace {

struct Labeled {
  std::vector<Sample> samples;
  std::vector<SolveOutcome> baselines;
};

Labeled labeled(const NetworkCase& c, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.8, 1.2);
  Labeled out;
  while (static_cast<int>(out.samples.size()) < count) {
    Loads l = nominal_loads(c);
    for (Eigen::Index i = 0; i < c.bus_count(); ++i) {
      l.p_d[i] *= u(rng);
      l.q_d[i] *= u(rng);
    }
    auto sol = solve_opf_local(c, l, {}, rng());
    if (!sol.converged) continue;
    out.samples.push_back({l.features(), sol.decision.stacked()});
    out.baselines.push_back(std::move(sol));
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = {4, 4};
  cfg.epochs = 10;
  cfg.alpha = 1e-3;
  cfg.rho = 1e-2;
  cfg.seed = 3;
  return cfg;
}

const Labeled& fig1_data() {
  static const Labeled data = labeled(fixtures::fig1(), 12, 99);
  return data;
}

}  // namespace

TEST(Train, ZeroStepLeavesWeightsAlone) {
  const NetworkCase c = fixtures::fig1();
  for (BaseLoss loss : {BaseLoss::decision, BaseLoss::mse}) {
    for (Optimizer opt : {Optimizer::gradient_descent, Optimizer::adam}) {
      TrainConfig cfg = small_config();
      cfg.alpha = 0.0;
      cfg.loss_kind = loss;
      cfg.optimizer = opt;
      const auto result = train(c, fig1_data().samples, cfg);
      const auto init = init_model(c, cfg.hidden, cfg.seed);
      EXPECT_EQ(flatten_parameters(result.model), flatten_parameters(init));
    }
  }
}

TEST(Train, FixedSeedIsBitIdentical) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  cfg.batch_size = 5;
  cfg.optimizer = Optimizer::adam;
  const auto a = train(c, fig1_data().samples, cfg);
  const auto b = train(c, fig1_data().samples, cfg);
  EXPECT_EQ(flatten_parameters(a.model), flatten_parameters(b.model));
  EXPECT_EQ(a.state.multipliers.mu_p, b.state.multipliers.mu_p);
  std::ostringstream ha, hb;
  write_history_csv(ha, a.state.history);
  write_history_csv(hb, b.state.history);
  EXPECT_EQ(ha.str(), hb.str());
  EXPECT_EQ(serialize(a.model), serialize(b.model));
}

TEST(Train, SeedChangesTheRun) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  const auto a = train(c, fig1_data().samples, cfg);
  cfg.seed = 4;
  const auto b = train(c, fig1_data().samples, cfg);
  EXPECT_NE(flatten_parameters(a.model), flatten_parameters(b.model));
}

TEST(Train, MultipliersNeverDecrease) {
  const NetworkCase c = fixtures::lossy_triangle();
  const auto data = labeled(c, 8, 5);
  TrainConfig cfg = small_config();
  cfg.epochs = 30;
  cfg.rho = 0.5;
  Multipliers prev;
  int checked = 0;
  train(c, data.samples, cfg, [&](int, const SurrogateModel&, const TrainState& s) {
    if (prev.lambda.size()) {
      EXPECT_TRUE((s.multipliers.lambda.array() >= prev.lambda.array()).all());
      EXPECT_TRUE((s.multipliers.mu_p.array() >= prev.mu_p.array()).all());
      EXPECT_TRUE((s.multipliers.mu_q.array() >= prev.mu_q.array()).all());
      ++checked;
    }
    prev = s.multipliers;
  });
  EXPECT_EQ(checked, cfg.epochs - 1);
}

TEST(Train, StartingMultiplierIsApplied) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.multiplier_init = 7.5;
  train(c, fig1_data().samples, cfg, [&](int, const SurrogateModel&, const TrainState& s) {
    EXPECT_EQ(s.multipliers.lambda.minCoeff(), 7.5);
    EXPECT_EQ(s.multipliers.mu_q.maxCoeff(), 7.5);
    EXPECT_EQ(s.multipliers.mu_p.rows(), 12);
  });
}

TEST(Train, OneStepOfPlainDescent) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  cfg.rho = 0.0;
  cfg.loss_kind = BaseLoss::mse;
  const auto& data = fig1_data().samples;
  const auto init = init_model(c, cfg.hidden, cfg.seed);
  const auto g = flatten(grad_weights(init, c, data, Multipliers::constant(12, c, 0.0), {BaseLoss::mse}));
  const Eigen::VectorXd expect = flatten_parameters(init) - cfg.alpha * g;
  const auto result = train(c, data, cfg);
  EXPECT_LT((flatten_parameters(result.model) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Train, DescentWithFrozenMultipliers) {
  const NetworkCase c = fixtures::fig1();
  const auto data = labeled(c, 50, 17);
  for (BaseLoss loss : {BaseLoss::decision, BaseLoss::mse}) {
    TrainConfig cfg = small_config();
    cfg.hidden = {8, 8};
    cfg.alpha = 1e-5;  // penalties are summed over 50 samples
    cfg.epochs = 200;
    cfg.rho = 0.0;
    cfg.multiplier_init = 1.0;
    cfg.loss_kind = loss;
    const auto r = train(c, data.samples, cfg);
    const auto& h = r.state.history;
    ASSERT_EQ(h.size(), 200u);
    EXPECT_LT(h.back().loss.total, h.front().loss.total) << to_string(loss);
    // trend, not every step: the later half averages below the first half
    double first = 0, second = 0;
    for (std::size_t k = 0; k < 100; ++k) {
      first += h[k].loss.total;
      second += h[100 + k].loss.total;
    }
    EXPECT_LT(second, first);
  }
}

TEST(Train, HistoryMatchesRecomputedLoss) {
  const NetworkCase c = fixtures::lossy_triangle();
  const auto data = labeled(c, 6, 8);
  TrainConfig cfg = small_config();
  cfg.epochs = 5;
  cfg.rho = 0.3;
  std::vector<double> seen;
  const auto r = train(c, data.samples, cfg, [&](int, const SurrogateModel& m, const TrainState& s) {
    seen.push_back(lagrangian_loss(m, c, data.samples, s.multipliers, {cfg.loss_kind, cfg.mse_labels}).total);
  });
  ASSERT_EQ(r.state.history.size(), 5u);
  for (std::size_t e = 0; e < 5; ++e) {
    EXPECT_EQ(r.state.history[e].epoch, static_cast<int>(e));
    EXPECT_NEAR(r.state.history[e].loss.total, seen[e], 1e-12 * (1 + std::abs(seen[e])));
  }
}

TEST(Train, ResumesFromGivenModel) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  cfg.alpha = 0.0;
  auto start = init_model(c, cfg.hidden, 1234);
  const auto r = train(c, fig1_data().samples, cfg, start);
  EXPECT_EQ(flatten_parameters(r.model), flatten_parameters(start));
}

TEST(Train, MseWithoutLabelsRejected) {
  const NetworkCase c = fixtures::fig1();
  auto data = fig1_data().samples;
  data[3].label.resize(0);
  TrainConfig cfg = small_config();
  cfg.loss_kind = BaseLoss::mse;
  EXPECT_THROW(train(c, data, cfg), PreconditionError);
  cfg.loss_kind = BaseLoss::decision;
  EXPECT_NO_THROW(train(c, data, cfg));
}

TEST(Train, EmptySplitRejected) {
  EXPECT_THROW(train(fixtures::fig1(), std::vector<Sample>{}, small_config()), PreconditionError);
}

TEST(Train, DivergenceIsReported) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  cfg.rho = 1e15;
  cfg.epochs = 5;
  try {
    train(c, fig1_data().samples, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Config, ValidateNamesField) {
  auto expect_field = [](TrainConfig cfg, const std::string& field) {
    try {
      validate(cfg);
      FAIL() << field;
    } catch (const PreconditionError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  TrainConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.alpha = -1;
  expect_field(cfg, "alpha");
  cfg = {};
  cfg.rho = -0.1;
  expect_field(cfg, "rho");
  cfg = {};
  cfg.epochs = 0;
  expect_field(cfg, "epochs");
  cfg = {};
  cfg.hidden.clear();
  expect_field(cfg, "hidden");
  cfg = {};
  cfg.multiplier_init = -2;
  expect_field(cfg, "multiplier_init");
  EXPECT_THROW(optimizer_from_string("sgd"), PreconditionError);
  EXPECT_EQ(optimizer_from_string(to_string(Optimizer::adam)), Optimizer::adam);
}

TEST(Multipliers, UpdateExample) {
  const NetworkCase c = fixtures::fig1();
  TrainState s;
  s.multipliers = Multipliers::constant(2, c, 1.0);
  ViolationTable v{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3)};
  v.sigma_f(0, 1) = 0.5;
  v.sigma_p(1, 2) = 0.25;
  v.sigma_q(1, 0) = 4.0;
  update_multipliers(s, v, 2.0);
  EXPECT_EQ(s.multipliers.lambda(0, 1), 2.0);
  EXPECT_EQ(s.multipliers.lambda(1, 1), 1.0);
  EXPECT_EQ(s.multipliers.mu_p(1, 2), 1.5);
  EXPECT_EQ(s.multipliers.mu_q(1, 0), 9.0);
  EXPECT_EQ(s.multipliers.mu_q.sum(), 6.0 + 8.0);
}

TEST(Multipliers, UpdateRejectsBadInput) {
  const NetworkCase c = fixtures::fig1();
  TrainState s;
  s.multipliers = Multipliers::constant(2, c, 0.0);
  ViolationTable wrong{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_THROW(update_multipliers(s, wrong, 1.0), DimensionError);
  ViolationTable right{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3)};
  EXPECT_THROW(update_multipliers(s, right, -1.0), PreconditionError);
}

TEST(Violations, TableMatchesReport) {
  const NetworkCase c = fixtures::lossy_triangle();
  const auto data = labeled(c, 4, 3);
  const auto m = init_model(c, std::vector<Eigen::Index>{4}, 2);
  const auto t = violation_table(m, c, data.samples);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto r = violation_report(c, Loads::from_features(data.samples[k].x), predict(m, data.samples[k].x));
    const auto row = static_cast<Eigen::Index>(k);
    EXPECT_EQ(t.sigma_f.row(row).transpose(), r.sigma_f);
    EXPECT_EQ(t.sigma_p.row(row).transpose(), r.sigma_p);
    EXPECT_EQ(t.sigma_q.row(row).transpose(), r.sigma_q);
  }
}

TEST(Evaluate, SummaryMatchesPerSampleAudit) {
  const NetworkCase c = fixtures::fig1();
  const auto& data = fig1_data();
  const auto m = init_model(c, std::vector<Eigen::Index>{4}, 2);
  const auto s = evaluate_epoch(c, m, data.samples, data.baselines);
  double reg = 0, worst_p = 0, mean_p = 0;
  for (std::size_t k = 0; k < data.samples.size(); ++k) {
    const auto pred = predict(m, data.samples[k].x);
    reg += regret(c, pred, data.baselines[k]);
    const auto r = violation_report(c, Loads::from_features(data.samples[k].x), pred);
    worst_p = std::max(worst_p, r.sigma_p.maxCoeff());
    mean_p += r.sigma_p.maxCoeff();
  }
  EXPECT_EQ(s.samples, 12u);
  EXPECT_NEAR(s.mean_regret, reg / 12, 1e-9);
  EXPECT_NEAR(s.max_sigma_p, worst_p, 1e-12);
  EXPECT_NEAR(s.mean_sigma_p, mean_p / 12, 1e-12);
  EXPECT_EQ(s.max_v_excess, 0.0);
  EXPECT_EQ(s.max_gen_excess, 0.0);
}

TEST(Evaluate, LabelsScoreZeroRegret) {
  const NetworkCase c = fixtures::fig1();
  const auto& data = fig1_data();
  for (std::size_t k = 0; k < data.samples.size(); ++k) {
    EXPECT_NEAR(regret(c, data.baselines[k].decision, data.baselines[k]), 0.0, 1e-12);
  }
}

TEST(Evaluate, BadInputRejected) {
  const NetworkCase c = fixtures::fig1();
  const auto& data = fig1_data();
  const auto m = init_model(c, std::vector<Eigen::Index>{4}, 2);
  EXPECT_THROW(evaluate_epoch(c, m, std::vector<Sample>{}, std::vector<SolveOutcome>{}), PreconditionError);
  EXPECT_THROW(evaluate_epoch(c, m, data.samples, std::span(data.baselines).first(3)), PreconditionError);
  auto broken = data.baselines;
  broken[0].converged = false;
  EXPECT_THROW(evaluate_epoch(c, m, data.samples, broken), PreconditionError);
}

TEST(History, CsvHasOneRowPerEpoch) {
  const NetworkCase c = fixtures::fig1();
  TrainConfig cfg = small_config();
  cfg.epochs = 7;
  const auto r = train(c, fig1_data().samples, cfg);
  std::ostringstream out;
  write_history_csv(out, r.state.history);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 8);
}
