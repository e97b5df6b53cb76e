// Synthetic visuo-tactile sensor model. Grasping excites stiffness,
// lifting excites the coupled friction-mass-stiffness load path, and
// in-hand rotation separates friction from inertia.
#pragma once

#include <cstdint>
#include <vector>

#include "cmlf/sim/trajectory.hpp"

namespace cmlf::sim {

enum class VisualMode { vector = 0, grid = 1 };

struct ObsConfig {
  VisualMode visual_mode = VisualMode::grid;
  int grid_side = 32;      // grid mode: image is grid_side x grid_side
  int visual_dim = 32;     // vector mode feature dimension
  int tactile_dim = 64;    // 4 physical channels x taps
  double sensor_noise = 0.01;
  double frame_hz = 3.0;

  int visual_size() const {
    return visual_mode == VisualMode::grid ? grid_side * grid_side : visual_dim;
  }
};

/// Deterministic under (spec, actions, seed). Observations are finite
/// and O(1)-scaled; the pose trajectory follows the action kinematics.
Trajectory simulate_trajectory(const ObjectSpec& spec, const std::vector<Action>& actions,
                               const ObsConfig& obs, std::uint64_t seed);

/// Contact state at one step (exposed for tests).
struct ContactState {
  double penetration = 0.0;  // m, foam compression
  double normal_force = 0.0;
  double tangential_load = 0.0;
  bool slipping = false;
  bool held = false;
};

ContactState contact_state(const ObjectSpec& spec, const Action& action, bool lifted);

}  // namespace cmlf::sim
