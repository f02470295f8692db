#include "opflab/config_json.hpp"

#include "opflab/error.hpp"

#include <set>
#include <string>

namespace opflab {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw PreconditionError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw PreconditionError("unknown " + std::string(what) + " key '" + item.key() + "'");
    }
  }
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"feas_tol", c.feas_tol},
                     {"opt_tol", c.opt_tol},
                     {"max_outer", c.max_outer},
                     {"max_inner", c.max_inner},
                     {"starts", c.starts},
                     {"penalty_init", c.penalty_init},
                     {"penalty_growth", c.penalty_growth},
                     {"penalty_max", c.penalty_max},
                     {"ignore_line_limits", c.ignore_line_limits}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
  reject_unknown(j,
                 {"feas_tol", "opt_tol", "max_outer", "max_inner", "starts", "penalty_init", "penalty_growth",
                  "penalty_max", "ignore_line_limits"},
                 "solver");
  read_if(j, "feas_tol", c.feas_tol);
  read_if(j, "opt_tol", c.opt_tol);
  read_if(j, "max_outer", c.max_outer);
  read_if(j, "max_inner", c.max_inner);
  read_if(j, "starts", c.starts);
  read_if(j, "penalty_init", c.penalty_init);
  read_if(j, "penalty_growth", c.penalty_growth);
  read_if(j, "penalty_max", c.penalty_max);
  read_if(j, "ignore_line_limits", c.ignore_line_limits);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"loss", to_string(c.loss_kind)},
                     {"mse_labels", to_string(c.mse_labels)},
                     {"alpha", c.alpha},
                     {"rho", c.rho},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"seed", c.seed},
                     {"multiplier_init", c.multiplier_init},
                     {"angle_box", c.angle_box},
                     {"hidden", c.hidden},
                     {"activation", to_string(c.activation)},
                     {"optimizer", to_string(c.optimizer)},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_epsilon", c.adam_epsilon}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"loss", "mse_labels", "alpha", "rho", "epochs", "batch_size", "seed", "multiplier_init", "angle_box",
                  "hidden", "activation", "optimizer", "adam_beta1", "adam_beta2", "adam_epsilon"},
                 "training");
  if (j.contains("loss")) c.loss_kind = base_loss_from_string(j.at("loss").get<std::string>());
  if (j.contains("mse_labels")) c.mse_labels = mse_labels_from_string(j.at("mse_labels").get<std::string>());
  if (j.contains("activation")) c.activation = activation_from_string(j.at("activation").get<std::string>());
  if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  read_if(j, "alpha", c.alpha);
  read_if(j, "rho", c.rho);
  read_if(j, "epochs", c.epochs);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "seed", c.seed);
  read_if(j, "multiplier_init", c.multiplier_init);
  read_if(j, "angle_box", c.angle_box);
  read_if(j, "hidden", c.hidden);
  read_if(j, "adam_beta1", c.adam_beta1);
  read_if(j, "adam_beta2", c.adam_beta2);
  read_if(j, "adam_epsilon", c.adam_epsilon);
}

void to_json(nlohmann::json& j, const SamplingSpec& s) {
  j = nlohmann::json{
      {"distribution", s.distribution}, {"range_frac", s.range_frac}, {"seed", s.seed}, {"count", s.count}};
}

void from_json(const nlohmann::json& j, SamplingSpec& s) {
  reject_unknown(j, {"distribution", "range_frac", "seed", "count"}, "sampling");
  read_if(j, "distribution", s.distribution);
  read_if(j, "range_frac", s.range_frac);
  read_if(j, "seed", s.seed);
  read_if(j, "count", s.count);
}

}  // namespace opflab
