#include "cmlf/sim/perturb.hpp"

#include <cmath>

#include "cmlf/core/rng.hpp"

namespace cmlf::sim {

void PerturbationSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ContractError("PerturbationSpec: sigma must be finite and >= 0");
  if (!(c >= 0.0 && c <= 1.0)) throw ContractError("PerturbationSpec: c must be in [0, 1]");
}

Trajectory perturb(const Trajectory& traj, const PerturbationSpec& spec, std::uint64_t seed) {
  spec.validate();
  Trajectory out = traj;
  const int horizon = traj.horizon();

  if (spec.sigma > 0.0) {
    Rng noise_v(derive_seed(seed, "perturb_noise_v"));
    Rng noise_t(derive_seed(seed, "perturb_noise_t"));
    out.obs_visual += spec.sigma * noise_v.normal_matrix(out.obs_visual.rows(), horizon);
    out.obs_tactile += spec.sigma * noise_t.normal_matrix(out.obs_tactile.rows(), horizon);
  }

  if (spec.c > 0.0) {
    Rng drop(derive_seed(seed, "perturb_drop"));
    for (int t = 0; t < horizon; ++t) {
      bool drop_v = drop.uniform() < spec.c;
      bool drop_t = drop.uniform() < spec.c;
      if (drop_v) {
        out.obs_visual.col(t).setZero();
        if (spec.mode == CorruptionMode::missing_flag) out.visual_present[t] = false;
      }
      if (drop_t) {
        out.obs_tactile.col(t).setZero();
        if (spec.mode == CorruptionMode::missing_flag) out.tactile_present[t] = false;
      }
    }
  }
  return out;
}

}  // namespace cmlf::sim
