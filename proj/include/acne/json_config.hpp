#pragma once

#include <string>

#include "acne/config.hpp"

namespace acne {

// Experiment file layout: {"train": {...}, "network": {...}}. The network
// section starts from the preset named in train.preset and overrides fields.
// Unknown keys are rejected.
struct ExperimentConfig {
  TrainConfig train;
  NetworkConfig network;
};

ExperimentConfig parse_experiment_json(const std::string& text);
ExperimentConfig load_experiment_file(const std::string& path);
std::string experiment_to_json(const ExperimentConfig& config);

}  // namespace acne
