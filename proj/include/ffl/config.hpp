#pragma once

// Stage configurations as JSON. Parsing rejects unknown keys; missing keys
// keep their defaults.

#include <nlohmann/json.hpp>

#include "ffl/gan.hpp"
#include "ffl/metrics.hpp"
#include "ffl/sae.hpp"
#include "ffl/synthetic.hpp"

namespace ffl {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

nlohmann::json to_json(const SyntheticSpec& s);
nlohmann::json to_json(const SAETrainConfig& c);
nlohmann::json to_json(const GANTrainConfig& c);
nlohmann::json to_json(const MetricConfig& c);

void from_json(const nlohmann::json& j, SyntheticSpec& s);
void from_json(const nlohmann::json& j, SAETrainConfig& c);
void from_json(const nlohmann::json& j, GANTrainConfig& c);
void from_json(const nlohmann::json& j, MetricConfig& c);
// Widths only; vertex_count and class counts come from the dataset.
nlohmann::json to_json(const SAEArchitecture& a);
void from_json(const nlohmann::json& j, SAEArchitecture& a);

struct RunConfig {
  SyntheticSpec synthetic;
  SAETrainConfig sae;
  SAEArchitecture sae_architecture;
  GANTrainConfig gan;
  MetricConfig metrics;

  nlohmann::json to_json() const;
  // Keys: synthetic, sae, sae_architecture, gan, metrics.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
};

// Settings the pipeline was calibrated with: a cosine-decayed SAE learning
// rate of 1e-3 over 60 epochs at batch 64, and a Gaussian-identity GAN for
// 3000 steps.
RunConfig reference_config();

}  // namespace ffl
