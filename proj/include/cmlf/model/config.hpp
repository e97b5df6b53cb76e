#pragma once

#include <string>
#include <vector>

#include "cmlf/errors.hpp"
#include "cmlf/sim/simulate.hpp"

namespace cmlf::model {

/// The four architectures compared in the ablation study.
enum class Variant { baseline = 0, joint = 1, wo_cm = 2, w_cm = 3 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::joint: return "joint";
    case Variant::wo_cm: return "wo_cm";
    case Variant::w_cm: return "w_cm";
  }
  return "?";
}

Variant variant_from_name(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::w_cm;
  int n_z = 32;         // directly observable latent per modality
  int n_y = 16;         // indirectly observable latent per modality
  int hidden = 64;      // MLP trunk width
  int lstm_hidden = 32; // y-predictor recurrent width
  int conv_channels1 = 8;
  int conv_channels2 = 16;

  // observation interface; must match the dataset config
  sim::VisualMode visual_mode = sim::VisualMode::grid;
  int grid_side = 32;
  int visual_dim = 32;   // vector mode
  int tactile_dim = 64;

  // hierarchical-prior table: slot -> object index of the training set
  std::vector<int> object_ids;

  int visual_size() const {
    return visual_mode == sim::VisualMode::grid ? grid_side * grid_side : visual_dim;
  }
  /// Shared-latent dimension of the baseline variant.
  int n_s() const { return n_z + n_y; }

  void validate() const {
    if (n_z < 1 || n_y < 1 || hidden < 1 || lstm_hidden < 1)
      throw ConfigError("model config: latent/width fields must be positive");
    if (visual_size() < 1 || tactile_dim < 1)
      throw ConfigError("model config: observation dims must be positive");
  }
};

/// Dims used by the desk-scale profile (vector observations).
ModelConfig desk_model_config(Variant variant, const sim::ObsConfig& obs);

}  // namespace cmlf::model
