#pragma once

#include <string>

#include "json.hpp"
#include "salmask/data.hpp"
#include "salmask/masker.hpp"
#include "salmask/objectives.hpp"
#include "salmask/perturb.hpp"
#include "salmask/trainer.hpp"

namespace salmask {

// JSON (de)serialization for every config the CLI accepts. Snapshots written
// into run directories round-trip through these.

nlohmann::json to_json(const DatasetSpec& s);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GumbelConfig& g);
nlohmann::json to_json(const MaskerConfig& c);
MaskerConfig masker_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RegularizerConfig& r);
nlohmann::json to_json(const ObjectiveConfig& c);
ObjectiveConfig objective_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Infiller& inf);
Infiller infiller_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ClassifierTrainConfig& c);
ClassifierTrainConfig classifier_train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Loads a JSON config file, applies `--set key.path=value` overrides last,
// and validates. Throws with the offending field on bad input.
nlohmann::json load_config_json(const std::string& path,
                                const std::vector<std::string>& overrides);
void apply_override(nlohmann::json& j, const std::string& assignment);

// Default coefficients: the published best values with the L1 terms rescaled
// by the pixel-count ratio between this resolution and the original (mask L1
// is a raw pixel sum, so per-pixel pressure stays matched).
ObjectiveConfig default_objective(const std::string& mode);

}  // namespace salmask
