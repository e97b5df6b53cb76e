#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cmlf/sim/actions.hpp"
#include "cmlf/sim/catalog.hpp"

namespace cmlf::sim {

/// One interaction: time-aligned actions, visual/tactile observation
/// streams (one column per step), ground-truth pose and per-stream
/// presence masks (all true unless a missing_flag perturbation ran).
struct Trajectory {
  ObjectSpec object;
  std::vector<Action> actions;
  Eigen::MatrixXd obs_visual;   // n_oV x H
  Eigen::MatrixXd obs_tactile;  // n_oT x H
  Eigen::MatrixXd pose_gt;      // 6 x H: translation (m), rotation vector (rad)
  Eigen::Array<bool, Eigen::Dynamic, 1> visual_present;
  Eigen::Array<bool, Eigen::Dynamic, 1> tactile_present;
  std::uint64_t seed = 0;
  int config_index = 0;
  int repeat = 0;

  int horizon() const { return static_cast<int>(actions.size()); }
};

}  // namespace cmlf::sim
