// Prehensile interaction primitive: palpate -> grasp -> lift -> rotate
// -> place, parameterized by grip force level and speed level.
#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf::sim {

enum class Phase { palpate = 0, grasp = 1, lift = 2, rotate = 3, place = 4 };

inline constexpr double kSpeedMax = 0.025;   // m/s, arm safety limit
inline constexpr double kOmegaMax = 0.5;     // rad/s
inline constexpr double kFingerOpen = 0.11;  // m, fully open commanded distance
inline constexpr double kGraspWidth = 0.08;  // m, nominal object width at the grasp line

/// One commanded step: finger distance d, lift velocity v_z, hand
/// angular velocity v_beta, plus the schedule phase.
struct Action {
  double d = kFingerOpen;
  double v_z = 0.0;
  double v_beta = 0.0;
  Phase phase = Phase::palpate;

  Eigen::Vector3d vector() const { return {d, v_z, v_beta}; }
};

/// Phase lengths partitioning the horizon (fractions 20/20/20/25/15%),
/// every phase at least one step.
std::array<int, 5> phase_lengths(int horizon);

/// Commanded grip distance for a force level 0..3 (higher level squeezes
/// harder, i.e. strictly smaller d).
double grip_distance(int grip_level);

/// Action sequence for one interaction configuration. v_z is nonzero only
/// during lift, v_beta only during rotate, both scaled by speed_level; d
/// ramps from open to the grip distance during grasp and back open at the
/// end of place.
std::vector<Action> make_action_sequence(int grip_level, int speed_level, int horizon);

}  // namespace cmlf::sim
