#include "cmlf/eval/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cmlf/core/rng.hpp"

namespace cmlf::eval {

namespace {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

void LogisticClassifier::fit(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                             int n_classes, const Options& options) {
  if (X.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ContractError("LogisticClassifier: X/label size mismatch");
  if (n_classes < 2) throw ContractError("LogisticClassifier: need at least 2 classes");
  const Eigen::Index n = X.rows(), d = X.cols();

  // standardize features for stable full-batch gradient descent
  feat_mean_ = X.colwise().mean();
  feat_scale_.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double var = (X.col(j).array() - feat_mean_[j]).square().mean();
    feat_scale_[j] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  Eigen::MatrixXd Z(n, d + 1);
  Z.leftCols(d) = (X.rowwise() - feat_mean_.transpose()).array().rowwise() /
                  feat_scale_.transpose().array();
  Z.col(d).setOnes();

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= n_classes)
      throw ContractError("LogisticClassifier: label outside [0, n_classes)");
    onehot(i, label) = 1.0;
  }

  weights_ = Eigen::MatrixXd::Zero(n_classes, d + 1);
  for (int it = 0; it < options.iterations; ++it) {
    Eigen::MatrixXd probs = softmax_rows(Z * weights_.transpose());
    Eigen::MatrixXd grad =
        ((probs - onehot).transpose() * Z) / static_cast<double>(n) + options.l2 * weights_;
    weights_ -= options.learning_rate * grad;
  }
  fitted_ = true;
}

std::vector<int> LogisticClassifier::predict(const Eigen::MatrixXd& X) const {
  if (!fitted_) throw ContractError("LogisticClassifier: predict before fit");
  const Eigen::Index d = feat_mean_.size();
  if (X.cols() != d) throw ContractError("LogisticClassifier: feature dimension mismatch");
  Eigen::MatrixXd Z(X.rows(), d + 1);
  Z.leftCols(d) = (X.rowwise() - feat_mean_.transpose()).array().rowwise() /
                  feat_scale_.transpose().array();
  Z.col(d).setOnes();
  Eigen::MatrixXd logits = Z * weights_.transpose();
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double LogisticClassifier::accuracy(const Eigen::MatrixXd& X, const std::vector<int>& labels) const {
  std::vector<int> pred = predict(X);
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

CvAccuracy cross_validated_accuracy(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                    int n_classes, int folds, std::uint64_t seed,
                                    const std::vector<std::int64_t>& strat_keys,
                                    const LogisticClassifier::Options& options) {
  if (folds < 2) throw ContractError("cross_validated_accuracy: need at least 2 folds");
  if (strat_keys.size() != labels.size())
    throw ContractError("cross_validated_accuracy: stratification key size mismatch");

  // per-class sample lists ordered by the stable stratification key, then
  // dealt round-robin into folds after a seeded per-class shuffle
  std::map<int, std::vector<Eigen::Index>> by_class;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(labels.size()); ++i)
    by_class[labels[static_cast<std::size_t>(i)]].push_back(i);

  std::vector<int> fold_of(labels.size(), -1);
  for (auto& [cls, members] : by_class) {
    if (static_cast<int>(members.size()) < folds)
      throw ContractError("cross_validated_accuracy: class " + std::to_string(cls) +
                          " has fewer than " + std::to_string(folds) + " samples");
    std::sort(members.begin(), members.end(), [&](Eigen::Index a, Eigen::Index b) {
      return strat_keys[static_cast<std::size_t>(a)] < strat_keys[static_cast<std::size_t>(b)];
    });
    Rng rng(derive_seed(seed, "fold", cls));
    rng.shuffle(members);
    for (std::size_t k = 0; k < members.size(); ++k)
      fold_of[static_cast<std::size_t>(members[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }

  CvAccuracy result;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train_idx, test_idx;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(labels.size()); ++i)
      (fold_of[static_cast<std::size_t>(i)] == f ? test_idx : train_idx).push_back(i);

    Eigen::MatrixXd X_tr(train_idx.size(), X.cols()), X_te(test_idx.size(), X.cols());
    std::vector<int> y_tr, y_te;
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      X_tr.row(static_cast<Eigen::Index>(i)) = X.row(train_idx[i]);
      y_tr.push_back(labels[static_cast<std::size_t>(train_idx[i])]);
    }
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      X_te.row(static_cast<Eigen::Index>(i)) = X.row(test_idx[i]);
      y_te.push_back(labels[static_cast<std::size_t>(test_idx[i])]);
    }
    LogisticClassifier clf;
    clf.fit(X_tr, y_tr, n_classes, options);
    result.fold_accuracies.push_back(clf.accuracy(X_te, y_te));
  }

  const auto& acc = result.fold_accuracies;
  result.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
  double var = 0.0;
  for (double a : acc) var += (a - result.mean) * (a - result.mean);
  result.stddev = std::sqrt(var / static_cast<double>(acc.size()));
  return result;
}

}  // namespace cmlf::eval
