// KL-annealing weight and the delayed cross-modal activation gate.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cmlf/model/config.hpp"

namespace cmlf::train {

struct TrainConfig {
  double learning_rate = 1e-5;
  int epochs = 100;
  int batch_size = 32;
  double anneal_fraction = 0.3;          // beta ramps linearly over this fraction of epochs
  double cm_activation_fraction = 0.25;  // 0.25 = "Late", 0.10 = "Early"
  std::uint64_t seed = 0;
  model::Variant variant = model::Variant::w_cm;
  double beta_max = 1.0;
  double grad_clip = 10.0;

  void validate() const {
    if (!(learning_rate > 0.0) || epochs < 1 || batch_size < 1)
      throw ConfigError("train config: learning_rate/epochs/batch_size must be positive");
    if (!(anneal_fraction > 0.0 && anneal_fraction <= 1.0))
      throw ConfigError("train config: anneal_fraction must be in (0, 1]");
    if (!(cm_activation_fraction > 0.0 && cm_activation_fraction < 1.0))
      throw ConfigError("train config: cm_activation_fraction must be in (0, 1)");
    if (!(beta_max > 0.0)) throw ConfigError("train config: beta_max must be positive");
  }
};

/// Linear ramp 0 -> beta_max over anneal_fraction * epochs, then constant.
inline double anneal_weight(int epoch, const TrainConfig& config) {
  double ramp = config.anneal_fraction * config.epochs;
  return config.beta_max * std::min(1.0, static_cast<double>(epoch) / ramp);
}

/// Cross-modal priors switch on at floor(fraction * epochs); always off
/// for variants without cross-modal connections.
inline bool cm_gate(int epoch, const TrainConfig& config) {
  if (config.variant != model::Variant::w_cm) return false;
  int activation = static_cast<int>(std::floor(config.cm_activation_fraction * config.epochs + 1e-9));
  return epoch >= activation;
}

}  // namespace cmlf::train
