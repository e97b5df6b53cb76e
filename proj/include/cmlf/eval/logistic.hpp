// Multinomial logistic regression with stratified k-fold cross-validated
// accuracy, deterministic under seed.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf::eval {

class LogisticClassifier {
 public:
  struct Options {
    double learning_rate = 0.2;
    int iterations = 400;
    double l2 = 1e-3;
  };

  /// X is (samples x features); labels in [0, n_classes).
  void fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes,
           const Options& options);
  void fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, int n_classes);
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
  double accuracy(const Eigen::MatrixXd& X, const std::vector<int>& labels) const;

 private:
  Eigen::MatrixXd weights_;  // n_classes x (features + 1), bias last
  Eigen::VectorXd feat_mean_, feat_scale_;
  bool fitted_ = false;
};

inline void LogisticClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                    int n_classes) {
  fit(X, labels, n_classes, Options());
}

struct CvAccuracy {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> fold_accuracies;
};

/// Stratified k-fold CV accuracy. Fold assignment depends only on the
/// seed and the per-class sample order, so permuting the input rows does
/// not change the result as long as stratification keys are stable.
/// Classes with fewer samples than folds raise a stratification error.
CvAccuracy cross_validated_accuracy(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                    int n_classes, int folds, std::uint64_t seed,
                                    const std::vector<std::int64_t>& strat_keys,
                                    const LogisticClassifier::Options& options = LogisticClassifier::Options());

}  // namespace cmlf::eval
