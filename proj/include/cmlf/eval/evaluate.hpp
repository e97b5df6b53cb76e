// Evaluation probes: NMSE-over-time through the alignment regressors,
// five-fold object classification on final-step latents, the noise /
// corruption robustness sweep, and paired significance testing.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cmlf/eval/alignment.hpp"
#include "cmlf/eval/logistic.hpp"
#include "cmlf/eval/stats.hpp"
#include "cmlf/sim/perturb.hpp"

namespace cmlf::eval {

inline const std::vector<std::string>& property_names() {
  static const std::vector<std::string> names{"shape",     "height", "texture",
                                              "stiffness", "mass",   "friction", "pose"};
  return names;
}
inline constexpr int kNumProperties = 7;            // 3 extrinsic + 3 intrinsic + pose
inline const std::vector<int> kIntrinsicProps{3, 4, 5};  // stiffness, mass, friction
inline const std::vector<int> kExtrinsicProps{0, 1, 2};

struct NmseCurves {
  Eigen::MatrixXd curves;           // properties x H, mean over trajectories
  Eigen::VectorXd time_avg_mean;    // per property
  Eigen::VectorXd time_avg_std;     // across trajectories
  Eigen::MatrixXd per_trajectory;   // trajectories x properties (time-averaged)
  Eigen::VectorXd normalizers;      // per property (population variance used)

  Eigen::VectorXd mean_curve(const std::vector<int>& props) const;
};

/// Per-property population variances of the ground truth over the given
/// trajectories (pose pooled over time and dims).
Eigen::VectorXd property_normalizers(const sim::Dataset& dataset, const std::vector<int>& indices);

/// Predicts properties from the filtered latent means at every step via
/// the alignment and scores NMSE against ground truth. Pass an explicit
/// normalizer to compare across object sets on a common scale.
NmseCurves property_nmse_curves(const model::CmlfModel& model, const AlignmentModel& alignment,
                                const sim::Dataset& dataset, const std::vector<int>& indices,
                                const Eigen::VectorXd* normalizer_override = nullptr);

enum class FeatureSet { y_V = 0, y_T = 1, both = 2 };
inline const char* feature_set_name(FeatureSet f) {
  switch (f) {
    case FeatureSet::y_V: return "y_V";
    case FeatureSet::y_T: return "y_T";
    case FeatureSet::both: return "both";
  }
  return "?";
}

/// Five-fold cross-validated logistic classification of object identity
/// from final-step latent means, stratified by object.
CvAccuracy classify_latents(const model::CmlfModel& model, const sim::Dataset& dataset,
                            const std::vector<int>& indices, FeatureSet features,
                            std::uint64_t seed);

struct PerturbationCell {
  double sigma = 0.0;
  double c = 0.0;
  Eigen::VectorXd nmse_per_property;   // time-averaged mean over trajectories
  Eigen::MatrixXd per_trajectory;      // trajectories x properties
};

/// Table-1-style grid (nominal, two noise levels, two corruption levels
/// by default); perturbations are applied to evaluation copies only.
/// draws > 1 averages each perturbed cell over that many independent
/// perturbation draws (the nominal cell is deterministic).
std::vector<PerturbationCell> perturbation_sweep(
    const model::CmlfModel& model, const AlignmentModel& alignment, const sim::Dataset& dataset,
    const std::vector<int>& indices, std::uint64_t seed,
    const std::vector<std::pair<double, double>>& grid = {{0.0, 0.0},
                                                          {0.2, 0.0},
                                                          {0.4, 0.0},
                                                          {0.0, 0.15},
                                                          {0.0, 0.35}},
    sim::CorruptionMode mode = sim::CorruptionMode::zero_fill, int draws = 1);

struct MethodMetrics {
  std::string name;
  Eigen::VectorXd per_trajectory;
};

struct Comparison {
  std::string method_a, method_b;
  double statistic = 0.0;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
  std::string stars = "ns";
};

/// All pairwise paired t-tests within one family, Holm-adjusted together.
/// Methods must be evaluated on identical trajectories (equal lengths).
std::vector<Comparison> paired_tests(const std::vector<MethodMetrics>& family,
                                     Alternative alternative = Alternative::two_sided);

}  // namespace cmlf::eval
