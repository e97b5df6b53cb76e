#include "cmlf/sim/actions.hpp"

#include <string>

namespace cmlf::sim {

namespace {
constexpr double kGripDistances[4] = {0.075, 0.071, 0.067, 0.063};
constexpr double kLiftSpeeds[4] = {0.008, 0.013, 0.019, 0.025};
constexpr double kRotateSpeeds[4] = {0.10, 0.18, 0.26, 0.35};
constexpr double kPhaseFractions[5] = {0.10, 0.20, 0.25, 0.30, 0.15};

void check_level(int level, const char* name) {
  if (level < 0 || level > 3)
    throw ConfigError(std::string(name) + " level must be in 0..3, got " + std::to_string(level));
}
}  // namespace

std::array<int, 5> phase_lengths(int horizon) {
  if (horizon < 5) throw ConfigError("horizon too short for the 5-phase schedule");
  std::array<int, 5> lengths{};
  int assigned = 0;
  double cumulative = 0.0;
  for (int p = 0; p < 5; ++p) {
    cumulative += kPhaseFractions[p];
    int boundary = (p == 4) ? horizon : static_cast<int>(cumulative * horizon + 0.5);
    lengths[static_cast<std::size_t>(p)] = boundary - assigned;
    assigned = boundary;
  }
  for (int p = 0; p < 5; ++p) {
    while (lengths[static_cast<std::size_t>(p)] < 1) {
      // borrow from the largest phase
      int largest = 0;
      for (int q = 1; q < 5; ++q)
        if (lengths[static_cast<std::size_t>(q)] > lengths[static_cast<std::size_t>(largest)])
          largest = q;
      lengths[static_cast<std::size_t>(largest)]--;
      lengths[static_cast<std::size_t>(p)]++;
    }
  }
  return lengths;
}

double grip_distance(int grip_level) {
  check_level(grip_level, "grip");
  return kGripDistances[grip_level];
}

std::vector<Action> make_action_sequence(int grip_level, int speed_level, int horizon) {
  check_level(grip_level, "grip");
  check_level(speed_level, "speed");
  const auto lengths = phase_lengths(horizon);
  const double d_grip = kGripDistances[grip_level];
  const double v_lift = kLiftSpeeds[speed_level];
  const double v_rot = kRotateSpeeds[speed_level];

  std::vector<Action> actions;
  actions.reserve(static_cast<std::size_t>(horizon));
  for (int p = 0; p < 5; ++p) {
    const Phase phase = static_cast<Phase>(p);
    const int len = lengths[static_cast<std::size_t>(p)];
    for (int k = 0; k < len; ++k) {
      Action a;
      a.phase = phase;
      switch (phase) {
        case Phase::palpate:
          a.d = kFingerOpen;  // contact-free pose-correction sweep
          break;
        case Phase::grasp:
          // close from open to the grip distance; strictly below open from
          // the first grasp step so grip levels are separable everywhere
          a.d = kFingerOpen + (d_grip - kFingerOpen) * (k + 1) / len;
          break;
        case Phase::lift:
          a.d = d_grip;
          a.v_z = v_lift;
          break;
        case Phase::rotate:
          a.d = d_grip;
          a.v_beta = v_rot;
          break;
        case Phase::place:
          a.d = d_grip;  // settle in place, grip held
          break;
      }
      actions.push_back(a);
    }
  }
  return actions;
}

}  // namespace cmlf::sim
