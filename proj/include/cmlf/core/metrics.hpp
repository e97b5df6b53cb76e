// Evaluation metrics shared by the evaluation module and tests.
#pragma once

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf {

/// Normalized mean squared error per time step.
///
/// predictions/ground_truth are (trajectories x time steps); the
/// normalizer is the population variance of the ground-truth property
/// over the evaluation dataset, so a constant dataset-mean predictor
/// scores 1.0 at every step.
inline Eigen::VectorXd nmse(const Eigen::MatrixXd& predictions,
                            const Eigen::MatrixXd& ground_truth, double normalizer) {
  if (predictions.rows() != ground_truth.rows() || predictions.cols() != ground_truth.cols())
    throw ContractError("nmse: prediction/ground-truth shape mismatch");
  if (predictions.rows() == 0 || predictions.cols() == 0)
    throw ContractError("nmse: empty input");
  if (!(normalizer > 0.0))
    throw ContractError("nmse: degenerate property (normalizer must be > 0)");
  return (predictions - ground_truth).array().square().colwise().mean() / normalizer;
}

/// Population variance (divides by N); the NMSE normalizer convention.
inline double population_variance(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw ContractError("population_variance: empty input");
  double mean = values.mean();
  return (values.array() - mean).square().mean();
}

}  // namespace cmlf
