#include "cmlf/eval/krr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

#include "cmlf/core/rng.hpp"

namespace cmlf::eval {

namespace {

double median_pairwise_distance(const Eigen::MatrixXd& X, int cap, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(n));
  std::iota(pick.begin(), pick.end(), 0);
  if (n > cap) {
    Rng rng(derive_seed(seed, "bandwidth"));
    rng.shuffle(pick);
    pick.resize(static_cast<std::size_t>(cap));
  }
  std::vector<double> dists;
  dists.reserve(pick.size() * (pick.size() - 1) / 2);
  for (std::size_t i = 0; i < pick.size(); ++i)
    for (std::size_t j = i + 1; j < pick.size(); ++j)
      dists.push_back((X.row(pick[i]) - X.row(pick[j])).norm());
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                   dists.end());
  double median = dists[dists.size() / 2];
  return median > 1e-12 ? median : 1.0;
}

// Empirical-risk formulation: (K + alpha * n * I) c = Y, so the ridge
// strength is scale-free in the number of fitting samples.
Eigen::MatrixXd solve_krr(const Eigen::MatrixXd& K, const Eigen::MatrixXd& Y, double ridge) {
  Eigen::MatrixXd A = K;
  A.diagonal().array() += ridge * static_cast<double>(K.rows());
  return A.ldlt().solve(Y);
}

}  // namespace

Eigen::MatrixXd KernelRidge::kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const {
  Eigen::VectorXd a2 = A.rowwise().squaredNorm();
  Eigen::VectorXd b2 = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = a2.replicate(1, B.rows()) + b2.transpose().replicate(A.rows(), 1) -
                       2.0 * A * B.transpose();
  return (-d2.array().max(0.0) / (2.0 * bandwidth_ * bandwidth_)).exp();
}

void KernelRidge::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Options& options) {
  if (X.rows() != Y.rows()) throw ContractError("KernelRidge: X/Y row mismatch");
  if (X.rows() < 10) throw ContractError("KernelRidge: insufficient data (< 10 samples)");
  if (options.ridge_grid.empty()) throw ContractError("KernelRidge: empty ridge grid");

  X_train_ = X;
  bandwidth_ = median_pairwise_distance(X, options.max_bandwidth_samples, options.seed);
  // center the targets so far-field predictions fall back to the mean
  y_mean_ = Y.colwise().mean();
  Eigen::MatrixXd Yc = Y.rowwise() - y_mean_.transpose();

  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K = kernel(X, X);

  if (options.ridge_grid.size() == 1) {
    ridge_ = options.ridge_grid.front();
  } else {
    // deterministic shuffled folds for the internal ridge search
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(options.seed, "krr_cv"));
    rng.shuffle(order);
    const int folds = std::max(2, options.cv_folds);

    double best_err = std::numeric_limits<double>::infinity();
    for (double candidate : options.ridge_grid) {
      double err = 0.0;
      for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train_idx, test_idx;
        for (std::size_t i = 0; i < order.size(); ++i)
          (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? test_idx : train_idx)
              .push_back(order[i]);
        if (train_idx.empty() || test_idx.empty()) continue;
        Eigen::MatrixXd K_tr(train_idx.size(), train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i)
          for (std::size_t j = 0; j < train_idx.size(); ++j)
            K_tr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                K(train_idx[i], train_idx[j]);
        Eigen::MatrixXd Y_tr(train_idx.size(), Y.cols());
        for (std::size_t i = 0; i < train_idx.size(); ++i)
          Y_tr.row(static_cast<Eigen::Index>(i)) = Yc.row(train_idx[i]);
        Eigen::MatrixXd coef = solve_krr(K_tr, Y_tr, candidate);
        Eigen::MatrixXd K_te(test_idx.size(), train_idx.size());
        for (std::size_t i = 0; i < test_idx.size(); ++i)
          for (std::size_t j = 0; j < train_idx.size(); ++j)
            K_te(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                K(test_idx[i], train_idx[j]);
        Eigen::MatrixXd pred = K_te * coef;
        for (std::size_t i = 0; i < test_idx.size(); ++i)
          err += (pred.row(static_cast<Eigen::Index>(i)) - Yc.row(test_idx[i])).squaredNorm();
      }
      if (err < best_err) {
        best_err = err;
        ridge_ = candidate;
      }
    }
  }

  coef_ = solve_krr(K, Yc, ridge_);
  fitted_ = true;
}

Eigen::MatrixXd KernelRidge::predict(const Eigen::MatrixXd& X) const {
  if (!fitted_) throw ContractError("KernelRidge: predict before fit");
  if (X.cols() != X_train_.cols())
    throw ContractError("KernelRidge: feature dimension mismatch (" + std::to_string(X.cols()) +
                        " vs fitted " + std::to_string(X_train_.cols()) + ")");
  return (kernel(X, X_train_) * coef_).rowwise() + y_mean_.transpose();
}

}  // namespace cmlf::eval
