#include "cmlf/eval/alignment.hpp"

#include "cmlf/core/rng.hpp"

namespace cmlf::eval {

std::vector<LatentTrack> collect_latents(const model::CmlfModel& model,
                                         const sim::Dataset& dataset,
                                         const std::vector<int>& indices, bool cm_active,
                                         int batch_size) {
  std::vector<LatentTrack> tracks;
  tracks.reserve(indices.size());
  for (std::size_t first = 0; first < indices.size();
       first += static_cast<std::size_t>(batch_size)) {
    std::size_t count =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), indices.size() - first);
    std::vector<const sim::Trajectory*> slice;
    for (std::size_t i = first; i < first + count; ++i)
      slice.push_back(&dataset.trajectory(indices[i]));
    model::Batch batch = model::Batch::from_trajectories(slice);
    ad::Graph g;
    model::RolloutTape tape = model.rollout(g, batch, cm_active);
    const int horizon = batch.horizon();
    for (std::size_t s = 0; s < count; ++s) {
      LatentTrack track;
      track.trajectory_index = indices[first + s];
      track.y_V.resize(model.config().n_y, horizon);
      track.y_T.resize(model.config().n_y, horizon);
      track.z_V.resize(model.z_dim(), horizon);
      for (int t = 0; t < horizon; ++t) {
        const model::StepTape& step = tape.steps[static_cast<std::size_t>(t)];
        track.y_V.col(t) = step.y_V.mean.value().col(static_cast<Eigen::Index>(s));
        track.y_T.col(t) = step.y_T.mean.value().col(static_cast<Eigen::Index>(s));
        track.z_V.col(t) = step.z_V.mean.value().col(static_cast<Eigen::Index>(s));
      }
      tracks.push_back(std::move(track));
    }
  }
  return tracks;
}

std::vector<int> property_fit_window(int horizon) {
  int window = std::max(1, horizon / 10);
  std::vector<int> steps;
  for (int t = horizon - window; t < horizon; ++t) steps.push_back(t);
  return steps;
}

AlignmentModel fit_alignment(const model::CmlfModel& model, const sim::Dataset& dataset,
                             std::uint64_t seed) {
  const std::vector<int>& val = dataset.splits.val;
  if (val.empty()) throw ContractError("fit_alignment: dataset has no validation split");

  auto tracks = collect_latents(model, dataset, val, eval_cm_active(model.variant()));
  const int horizon = dataset.config.horizon;
  const auto window = property_fit_window(horizon);

  const Eigen::Index n_prop = static_cast<Eigen::Index>(tracks.size() * window.size());
  Eigen::MatrixXd X_vy(n_prop, model.config().n_y), X_ty(n_prop, model.config().n_y);
  Eigen::MatrixXd Y_ext(n_prop, 3), Y_int(n_prop, 3);
  Eigen::Index row = 0;
  for (const LatentTrack& track : tracks) {
    const sim::ObjectSpec& obj = dataset.trajectory(track.trajectory_index).object;
    for (int t : window) {
      X_vy.row(row) = track.y_V.col(t).transpose();
      X_ty.row(row) = track.y_T.col(t).transpose();
      Y_ext.row(row) = obj.props.extrinsic().transpose();
      Y_int.row(row) = obj.props.intrinsic().transpose();
      ++row;
    }
  }

  // pose regressor: full duration, strided to keep the kernel tractable
  const Eigen::Index total_steps = static_cast<Eigen::Index>(tracks.size()) * horizon;
  const int stride = std::max<int>(1, static_cast<int>(total_steps / 1500));
  std::vector<std::pair<const LatentTrack*, int>> pose_rows;
  for (const LatentTrack& track : tracks)
    for (int t = 0; t < horizon; t += stride) pose_rows.emplace_back(&track, t);
  Eigen::MatrixXd X_vz(static_cast<Eigen::Index>(pose_rows.size()), model.z_dim());
  Eigen::MatrixXd Y_pose(static_cast<Eigen::Index>(pose_rows.size()), 6);
  for (std::size_t i = 0; i < pose_rows.size(); ++i) {
    const auto& [track, t] = pose_rows[i];
    X_vz.row(static_cast<Eigen::Index>(i)) = track->z_V.col(t).transpose();
    Y_pose.row(static_cast<Eigen::Index>(i)) =
        dataset.trajectory(track->trajectory_index).pose_gt.col(t).transpose();
  }

  AlignmentModel alignment;
  KernelRidge::Options options;
  options.seed = derive_seed(seed, "alignment");
  alignment.f_V_y.fit(X_vy, Y_ext, options);
  alignment.f_T_y.fit(X_ty, Y_int, options);
  alignment.f_V_z.fit(X_vz, Y_pose, options);
  alignment.fitted = true;
  return alignment;
}

}  // namespace cmlf::eval
