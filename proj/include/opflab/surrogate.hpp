// Neural OPF surrogate: MLP trunk, four sigmoid heads scaled into the
// operating boxes, a physics layer that scores the prediction, and the
// reverse-mode gradient of the penalized loss with respect to the weights.
#ifndef OPFLAB_SURROGATE_HPP
#define OPFLAB_SURROGATE_HPP

#include "opflab/network.hpp"
#include "opflab/powerflow.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opflab {

enum class Activation { relu, tanh };
enum class BaseLoss { decision, mse };
/// Which part of the label the MSE compares: all four heads, or (p_g, q_g) only.
enum class MseLabels { full, generation };

std::string to_string(Activation a);
std::string to_string(BaseLoss b);
std::string to_string(MseLabels m);
Activation activation_from_string(std::string_view s);
BaseLoss base_loss_from_string(std::string_view s);
MseLabels mse_labels_from_string(std::string_view s);

struct ModelOptions {
  Activation hidden_activation = Activation::relu;
  /// The angle head spans [-angle_box, angle_box] at every bus.
  double angle_box = std::numbers::pi / 2;
};

struct HeadBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

enum Head : int { head_p = 0, head_q = 1, head_v = 2, head_theta = 3 };

struct SurrogateModel {
  /// input = 2N, hidden sizes..., output = 4N
  std::vector<Eigen::Index> layer_dims;
  /// weights[l] maps layer l to layer l + 1 (rows = layer_dims[l + 1]).
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation hidden_activation = Activation::relu;
  std::array<HeadBounds, 4> heads;
  /// The slack angle is forced to zero after scaling.
  Eigen::Index slack = 0;
  std::string case_digest;

  Eigen::Index bus_count() const { return layer_dims.back() / 4; }
  Eigen::Index parameter_count() const;
};

/// Same shape as the model's weights and biases.
struct ModelGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static ModelGradient zeros_like(const SurrogateModel& model);
  ModelGradient& operator+=(const ModelGradient& other);
};

Eigen::VectorXd flatten_parameters(const SurrogateModel& model);
void assign_parameters(SurrogateModel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten(const ModelGradient& gradient);

/// One training example: x = (p_d, q_d); label is the stacked optimal
/// (p_g, q_g, V, theta), or empty when unlabeled.
struct Sample {
  Eigen::VectorXd x;
  Eigen::VectorXd label;
};

/// Per-sample multipliers: lambda is |D| x |E|, mu_p and mu_q are |D| x |N|.
struct Multipliers {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd mu_p;
  Eigen::MatrixXd mu_q;

  static Multipliers constant(Eigen::Index samples, const NetworkCase& network, double value);
};

struct LossSettings {
  BaseLoss base = BaseLoss::decision;
  MseLabels mse_labels = MseLabels::full;
};

struct LossBreakdown {
  double objective_term = 0.0;
  double ineq_penalty = 0.0;
  double eq_penalty_p = 0.0;
  double eq_penalty_q = 0.0;
  double total = 0.0;
};

/// Glorot-uniform weights keyed by seed, zero biases, bound tables from the case.
/// Throws PreconditionError for an empty hidden layer list.
SurrogateModel init_model(const NetworkCase& network, std::span<const Eigen::Index> hidden_dims,
                          std::uint64_t seed, const ModelOptions& options = {});

DispatchDecision predict(const SurrogateModel& model, const Eigen::VectorXd& x);

/// Mean over samples of ||label - prediction||^2 on stacked decision vectors.
double mse_between(std::span<const Eigen::VectorXd> labels, std::span<const Eigen::VectorXd> predictions);

double loss_mse(const SurrogateModel& model, std::span<const Sample> batch,
                MseLabels labels = MseLabels::full);
double loss_decision(const SurrogateModel& model, std::span<const Sample> batch, const NetworkCase& network);

/// Base loss over the batch plus sum_n lambda_n.sigma_f + mu_p_n.sigma_p + mu_q_n.sigma_q.
/// `batch` lists indices into `data`; the same index selects the multiplier row.
LossBreakdown lagrangian_loss(const SurrogateModel& model, const NetworkCase& network,
                              std::span<const Sample> data, std::span<const std::size_t> batch,
                              const Multipliers& multipliers, const LossSettings& settings);
LossBreakdown lagrangian_loss(const SurrogateModel& model, const NetworkCase& network,
                              std::span<const Sample> data, const Multipliers& multipliers,
                              const LossSettings& settings);

/// Exact gradient of lagrangian_loss. Kinks of max and |.| contribute zero.
ModelGradient grad_weights(const SurrogateModel& model, const NetworkCase& network,
                           std::span<const Sample> data, std::span<const std::size_t> batch,
                           const Multipliers& multipliers, const LossSettings& settings,
                           LossBreakdown* loss = nullptr);
ModelGradient grad_weights(const SurrogateModel& model, const NetworkCase& network,
                           std::span<const Sample> data, const Multipliers& multipliers,
                           const LossSettings& settings, LossBreakdown* loss = nullptr);

/// Text model file: magic + version, case digest, layer dims, head bounds and
/// every matrix row-major in 17-digit decimal.
std::string serialize(const SurrogateModel& model);
/// Throws DigestMismatch when the file was built for another case and
/// FormatError on truncation or version mismatch.
SurrogateModel deserialize(std::string_view text, const NetworkCase& network);

}  // namespace opflab

#endif  // OPFLAB_SURROGATE_HPP
