// JSON mapping of the configuration structs (manifests, config files).
#ifndef OPFLAB_CONFIG_JSON_HPP
#define OPFLAB_CONFIG_JSON_HPP

#include "opflab/labeler.hpp"
#include "opflab/pipeline.hpp"
#include "opflab/training.hpp"

#include <json.hpp>

namespace opflab {

void to_json(nlohmann::json& j, const SolverConfig& c);
/// Missing keys keep their current values; unknown keys are rejected.
void from_json(const nlohmann::json& j, SolverConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const SamplingSpec& s);
void from_json(const nlohmann::json& j, SamplingSpec& s);

}  // namespace opflab

#endif  // OPFLAB_CONFIG_JSON_HPP
