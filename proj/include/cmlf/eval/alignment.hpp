// Aligning the learned latent spaces with ground-truth physical
// parameters: three RBF kernel ridge regressors mapping visual y-latents
// to extrinsic properties, tactile y-latents to intrinsic properties,
// and visual z-latents to pose.
#pragma once

#include <cstdint>
#include <vector>

#include "cmlf/eval/krr.hpp"
#include "cmlf/model/filter.hpp"
#include "cmlf/sim/dataset.hpp"

namespace cmlf::eval {

/// Filtered latent means over one trajectory (columns are time steps).
struct LatentTrack {
  int trajectory_index = 0;
  Eigen::MatrixXd y_V, y_T, z_V;
};

/// Batched deterministic rollouts (no sampling touches the beliefs).
std::vector<LatentTrack> collect_latents(const model::CmlfModel& model,
                                         const sim::Dataset& dataset,
                                         const std::vector<int>& indices, bool cm_active,
                                         int batch_size = 32);

/// Cross-modal evaluation keeps the priors active only for the full model.
inline bool eval_cm_active(model::Variant variant) { return variant == model::Variant::w_cm; }

struct AlignmentModel {
  KernelRidge f_V_y;  // visual y -> (shape_code, height, texture_code)
  KernelRidge f_T_y;  // tactile y -> (stiffness, mass, friction)
  KernelRidge f_V_z;  // visual z -> pose (6)
  bool fitted = false;
};

/// Property regressors fit on the final 10% of time steps of each
/// validation trajectory; the pose regressor uses the full duration.
AlignmentModel fit_alignment(const model::CmlfModel& model, const sim::Dataset& dataset,
                             std::uint64_t seed);

/// Last max(1, H/10) step indices of an H-step trajectory.
std::vector<int> property_fit_window(int horizon);

}  // namespace cmlf::eval
