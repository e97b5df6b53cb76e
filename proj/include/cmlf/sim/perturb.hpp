// Evaluation-time observation perturbations: additive Gaussian white
// noise (sigma is a standard deviation) and frame dropout with
// probability c, replaced by zeros or marked missing.
#pragma once

#include <cstdint>

#include "cmlf/sim/trajectory.hpp"

namespace cmlf::sim {

enum class CorruptionMode { zero_fill = 0, missing_flag = 1 };

struct PerturbationSpec {
  double sigma = 0.0;  // noise standard deviation, >= 0
  double c = 0.0;      // per-step dropout probability in [0, 1]
  CorruptionMode mode = CorruptionMode::zero_fill;

  void validate() const;
};

/// Returns a perturbed copy; actions, pose and object are untouched and
/// the input trajectory is never modified. sigma = 0, c = 0 returns a
/// bit-identical copy. Deterministic under seed.
Trajectory perturb(const Trajectory& traj, const PerturbationSpec& spec, std::uint64_t seed);

}  // namespace cmlf::sim
