#include "cmlf/eval/evaluate.hpp"

#include <cmath>
#include <map>

#include "cmlf/core/metrics.hpp"
#include "cmlf/core/rng.hpp"

namespace cmlf::eval {

Eigen::VectorXd NmseCurves::mean_curve(const std::vector<int>& props) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(curves.cols());
  for (int p : props) out += curves.row(p).transpose();
  return out / static_cast<double>(props.size());
}

Eigen::VectorXd property_normalizers(const sim::Dataset& dataset, const std::vector<int>& indices) {
  if (indices.empty()) throw ContractError("property_normalizers: empty index list");
  const Eigen::Index n = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd values(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const sim::ObjectSpec& obj = dataset.trajectory(indices[static_cast<std::size_t>(i)]).object;
    values.row(i) << obj.props.extrinsic().transpose(), obj.props.intrinsic().transpose();
  }
  Eigen::VectorXd normalizers(kNumProperties);
  for (int p = 0; p < 6; ++p) normalizers[p] = population_variance(values.col(p));
  // pose: pooled variance over time, trajectories and the 6 pose dims
  double pose_mean = 0.0, pose_sq = 0.0;
  long count = 0;
  for (int idx : indices) {
    const Eigen::MatrixXd& pose = dataset.trajectory(idx).pose_gt;
    pose_mean += pose.sum();
    pose_sq += pose.array().square().sum();
    count += pose.size();
  }
  pose_mean /= static_cast<double>(count);
  normalizers[6] = pose_sq / static_cast<double>(count) - pose_mean * pose_mean;
  for (int p = 0; p < kNumProperties; ++p)
    if (!(normalizers[p] > 0.0))
      throw ContractError("property_normalizers: degenerate property '" + property_names()[static_cast<std::size_t>(p)] + "'");
  return normalizers;
}

namespace {

NmseCurves score_tracks(const std::vector<LatentTrack>& tracks, const AlignmentModel& alignment,
                        const sim::Dataset& dataset, const Eigen::VectorXd& normalizers) {
  if (!alignment.fitted) throw ContractError("property_nmse_curves: alignment not fitted");
  const int horizon = static_cast<int>(tracks.front().y_V.cols());
  const Eigen::Index n = static_cast<Eigen::Index>(tracks.size());

  NmseCurves out;
  out.normalizers = normalizers;
  out.curves = Eigen::MatrixXd::Zero(kNumProperties, horizon);
  out.per_trajectory = Eigen::MatrixXd::Zero(n, kNumProperties);

  for (Eigen::Index i = 0; i < n; ++i) {
    const LatentTrack& track = tracks[static_cast<std::size_t>(i)];
    const sim::Trajectory& traj = dataset.trajectory(track.trajectory_index);
    Eigen::MatrixXd ext_pred = alignment.f_V_y.predict(track.y_V.transpose());  // H x 3
    Eigen::MatrixXd int_pred = alignment.f_T_y.predict(track.y_T.transpose());
    Eigen::MatrixXd pose_pred = alignment.f_V_z.predict(track.z_V.transpose());  // H x 6
    Eigen::Vector3d ext_gt = traj.object.props.extrinsic();
    Eigen::Vector3d int_gt = traj.object.props.intrinsic();
    for (int t = 0; t < horizon; ++t) {
      for (int p = 0; p < 3; ++p) {
        double e_ext = ext_pred(t, p) - ext_gt[p];
        double e_int = int_pred(t, p) - int_gt[p];
        out.curves(p, t) += e_ext * e_ext / normalizers[p];
        out.curves(3 + p, t) += e_int * e_int / normalizers[3 + p];
      }
      double pose_err =
          (pose_pred.row(t).transpose() - traj.pose_gt.col(t)).squaredNorm() / 6.0;
      out.curves(6, t) += pose_err / normalizers[6];
    }
  }
  out.curves /= static_cast<double>(n);

  // per-trajectory time averages (recomputed per trajectory for the std)
  for (Eigen::Index i = 0; i < n; ++i) {
    const LatentTrack& track = tracks[static_cast<std::size_t>(i)];
    const sim::Trajectory& traj = dataset.trajectory(track.trajectory_index);
    Eigen::MatrixXd ext_pred = alignment.f_V_y.predict(track.y_V.transpose());
    Eigen::MatrixXd int_pred = alignment.f_T_y.predict(track.y_T.transpose());
    Eigen::MatrixXd pose_pred = alignment.f_V_z.predict(track.z_V.transpose());
    Eigen::Vector3d ext_gt = traj.object.props.extrinsic();
    Eigen::Vector3d int_gt = traj.object.props.intrinsic();
    for (int p = 0; p < 3; ++p) {
      out.per_trajectory(i, p) =
          (ext_pred.col(p).array() - ext_gt[p]).square().mean() / normalizers[p];
      out.per_trajectory(i, 3 + p) =
          (int_pred.col(p).array() - int_gt[p]).square().mean() / normalizers[3 + p];
    }
    out.per_trajectory(i, 6) =
        (pose_pred - traj.pose_gt.transpose()).array().square().rowwise().mean().mean() /
        normalizers[6];
  }
  out.time_avg_mean = out.per_trajectory.colwise().mean();
  out.time_avg_std.resize(kNumProperties);
  for (int p = 0; p < kNumProperties; ++p)
    out.time_avg_std[p] = std::sqrt(
        (out.per_trajectory.col(p).array() - out.time_avg_mean[p]).square().mean());
  return out;
}

}  // namespace

NmseCurves property_nmse_curves(const model::CmlfModel& model, const AlignmentModel& alignment,
                                const sim::Dataset& dataset, const std::vector<int>& indices,
                                const Eigen::VectorXd* normalizer_override) {
  if (indices.empty()) throw ContractError("property_nmse_curves: empty index list");
  Eigen::VectorXd normalizers =
      normalizer_override != nullptr ? *normalizer_override : property_normalizers(dataset, indices);
  auto tracks = collect_latents(model, dataset, indices, eval_cm_active(model.variant()));
  return score_tracks(tracks, alignment, dataset, normalizers);
}

CvAccuracy classify_latents(const model::CmlfModel& model, const sim::Dataset& dataset,
                            const std::vector<int>& indices, FeatureSet features,
                            std::uint64_t seed) {
  if (indices.empty()) throw ContractError("classify_latents: empty index list");
  auto tracks = collect_latents(model, dataset, indices, eval_cm_active(model.variant()));

  std::map<int, int> class_of;
  for (const LatentTrack& track : tracks) {
    int object = dataset.trajectory(track.trajectory_index).object.object_index;
    class_of.emplace(object, static_cast<int>(class_of.size()));
  }
  const int n_classes = static_cast<int>(class_of.size());
  const int n_y = model.config().n_y;
  const Eigen::Index dim = features == FeatureSet::both ? 2 * n_y : n_y;

  Eigen::MatrixXd X(static_cast<Eigen::Index>(tracks.size()), dim);
  std::vector<int> labels;
  std::vector<std::int64_t> strat_keys;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const LatentTrack& track = tracks[i];
    const sim::Trajectory& traj = dataset.trajectory(track.trajectory_index);
    Eigen::VectorXd final_yV = track.y_V.rightCols(1);
    Eigen::VectorXd final_yT = track.y_T.rightCols(1);
    switch (features) {
      case FeatureSet::y_V: X.row(static_cast<Eigen::Index>(i)) = final_yV.transpose(); break;
      case FeatureSet::y_T: X.row(static_cast<Eigen::Index>(i)) = final_yT.transpose(); break;
      case FeatureSet::both:
        X.row(static_cast<Eigen::Index>(i)).leftCols(n_y) = final_yV.transpose();
        X.row(static_cast<Eigen::Index>(i)).rightCols(n_y) = final_yT.transpose();
        break;
    }
    labels.push_back(class_of.at(traj.object.object_index));
    // stable key independent of input ordering
    strat_keys.push_back(static_cast<std::int64_t>(traj.object.object_index) * 1000000 +
                         traj.config_index * 1000 + traj.repeat);
  }
  return cross_validated_accuracy(X, labels, n_classes, 5, seed, strat_keys);
}

std::vector<PerturbationCell> perturbation_sweep(
    const model::CmlfModel& model, const AlignmentModel& alignment, const sim::Dataset& dataset,
    const std::vector<int>& indices, std::uint64_t seed,
    const std::vector<std::pair<double, double>>& grid, sim::CorruptionMode mode, int draws) {
  if (indices.empty()) throw ContractError("perturbation_sweep: empty index list");
  if (draws < 1) throw ContractError("perturbation_sweep: draws must be >= 1");
  Eigen::VectorXd normalizers = property_normalizers(dataset, indices);

  std::vector<PerturbationCell> cells;
  int cell_id = 0;
  for (auto [sigma, c] : grid) {
    const bool perturbed = sigma != 0.0 || c != 0.0;
    const int cell_draws = perturbed ? draws : 1;
    PerturbationCell cell;
    cell.sigma = sigma;
    cell.c = c;
    for (int draw = 0; draw < cell_draws; ++draw) {
      sim::Dataset working = dataset;  // evaluation copy; the input is never mutated
      if (perturbed) {
        sim::PerturbationSpec spec;
        spec.sigma = sigma;
        spec.c = c;
        spec.mode = mode;
        for (int idx : indices)
          working.trajectories[static_cast<std::size_t>(idx)] = sim::perturb(
              dataset.trajectory(idx), spec, derive_seed(seed, "sweep", cell_id, idx, draw));
      }
      auto tracks = collect_latents(model, working, indices, eval_cm_active(model.variant()));
      NmseCurves scored = score_tracks(tracks, alignment, working, normalizers);
      if (draw == 0) {
        cell.nmse_per_property = scored.time_avg_mean;
        cell.per_trajectory = scored.per_trajectory;
      } else {
        cell.nmse_per_property += scored.time_avg_mean;
        cell.per_trajectory += scored.per_trajectory;
      }
    }
    cell.nmse_per_property /= static_cast<double>(cell_draws);
    cell.per_trajectory /= static_cast<double>(cell_draws);
    cells.push_back(std::move(cell));
    ++cell_id;
  }
  return cells;
}

std::vector<Comparison> paired_tests(const std::vector<MethodMetrics>& family,
                                     Alternative alternative) {
  if (family.size() < 2) throw ContractError("paired_tests: need at least two methods");
  const Eigen::Index n = family.front().per_trajectory.size();
  for (const MethodMetrics& m : family)
    if (m.per_trajectory.size() != n)
      throw ContractError("paired_tests: unequal trajectory pairing for method '" + m.name + "'");

  std::vector<Comparison> comparisons;
  std::vector<double> raw;
  for (std::size_t i = 0; i < family.size(); ++i) {
    for (std::size_t j = i + 1; j < family.size(); ++j) {
      TestResult t = paired_t_test(family[i].per_trajectory, family[j].per_trajectory, alternative);
      Comparison cmp;
      cmp.method_a = family[i].name;
      cmp.method_b = family[j].name;
      cmp.statistic = t.statistic;
      cmp.raw_p = t.p_value;
      comparisons.push_back(cmp);
      raw.push_back(t.p_value);
    }
  }
  std::vector<double> adjusted = holm_bonferroni(raw);
  for (std::size_t k = 0; k < comparisons.size(); ++k) {
    comparisons[k].adjusted_p = adjusted[k];
    comparisons[k].stars = significance_stars(adjusted[k]);
  }
  return comparisons;
}

}  // namespace cmlf::eval
