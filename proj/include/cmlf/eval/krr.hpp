// Kernel ridge regression with an RBF kernel; bandwidth by the median
// pairwise-distance heuristic, ridge strength by internal 3-fold
// cross-validation over a small grid.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf::eval {

class KernelRidge {
 public:
  struct Options {
    std::vector<double> ridge_grid{1e-3, 1e-2, 1e-1};
    int cv_folds = 3;
    std::uint64_t seed = 0;
    int max_bandwidth_samples = 512;  // median heuristic subsample cap
  };

  /// X is (samples x features), Y is (samples x outputs). Requires at
  /// least 10 fitting samples.
  void fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Options& options);
  void fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

  Eigen::MatrixXd predict(const Eigen::MatrixXd& X) const;

  bool fitted() const { return fitted_; }
  double bandwidth() const { return bandwidth_; }
  double ridge() const { return ridge_; }
  Eigen::Index in_dim() const { return X_train_.cols(); }
  Eigen::Index out_dim() const { return coef_.cols(); }

 private:
  Eigen::MatrixXd kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const;

  Eigen::MatrixXd X_train_;
  Eigen::MatrixXd coef_;
  Eigen::VectorXd y_mean_;
  double bandwidth_ = 1.0;
  double ridge_ = 0.0;
  bool fitted_ = false;
};

inline void KernelRidge::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  fit(X, Y, Options());
}

}  // namespace cmlf::eval
