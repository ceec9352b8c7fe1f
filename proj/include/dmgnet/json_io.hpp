#pragma once

// JSON (de)serialization of configurations and reports. Readers accept
// partial objects: missing keys keep their defaults, unknown keys are
// rejected so typos surface as validation errors.

#include <nlohmann/json.hpp>

#include "dmgnet/analysis.hpp"
#include "dmgnet/metrics.hpp"
#include "dmgnet/network.hpp"
#include "dmgnet/training.hpp"

namespace dmgnet {

nlohmann::json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& j, NetworkConfig base = {});

nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j, LossConfig base = {});

nlohmann::json to_json(const AugmentationConfig& c);
AugmentationConfig augmentation_from_json(const nlohmann::json& j, AugmentationConfig base = {});

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const DecisionRule& r);
DecisionRule decision_rule_from_json(const nlohmann::json& j, DecisionRule base = {});

nlohmann::json to_json(const F1Stats& s);
nlohmann::json to_json(const MetricsReport& r);

nlohmann::json to_json(const CrossValidationResult& r);

/// Thrown for malformed configuration objects; `field` is the dotted key path.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace dmgnet
