// Batched diagonal-Gaussian operations on the autodiff tape. Each
// GaussianVar holds (dim x batch) mean and log-variance nodes and the
// arithmetic mirrors cmlf/core/gaussian.hpp exactly.
#pragma once

#include <cmath>

#include "cmlf/ad/graph.hpp"
#include "cmlf/core/gaussian.hpp"

namespace cmlf::ad {

struct GaussianVar {
  Var mean;
  Var log_var;

  Eigen::Index dim() const { return mean.rows(); }
  Eigen::Index batch() const { return mean.cols(); }
};

/// Floors the variance at kVarFloor and caps log-variance at kLogVarMax,
/// matching the DiagonalGaussian construction invariant.
inline Var floor_log_var(const Var& lv) {
  return clamp(lv, std::log(kVarFloor), kLogVarMax);
}

inline GaussianVar make_gaussian(const Var& mean, const Var& raw_log_var) {
  return GaussianVar{mean, floor_log_var(raw_log_var)};
}

inline GaussianVar gaussian_constant(Graph& g, const Mat& mean, const Mat& log_var) {
  return GaussianVar{g.constant(mean), g.constant(log_var)};
}

inline GaussianVar standard_gaussian(Graph& g, Eigen::Index dim, Eigen::Index batch) {
  return gaussian_constant(g, Mat::Zero(dim, batch), Mat::Zero(dim, batch));
}

inline GaussianVar flat_gaussian(Graph& g, Eigen::Index dim, Eigen::Index batch) {
  return gaussian_constant(g, Mat::Zero(dim, batch), Mat::Constant(dim, batch, kLogVarFlat));
}

/// Precision-weighted fusion, batched; same arithmetic as cmlf::fuse.
inline GaussianVar fuse(const GaussianVar& a, const GaussianVar& b) {
  Var prec_a = exp(neg(a.log_var));
  Var prec_b = exp(neg(b.log_var));
  Var prec = add(prec_a, prec_b);
  Var mean = cdiv(add(cmul(prec_a, a.mean), cmul(prec_b, b.mean)), prec);
  Var log_var = floor_log_var(neg(log(prec)));
  return GaussianVar{mean, log_var};
}

/// Sum over dimensions and batch of KL[q || p].
inline Var kl_divergence(const GaussianVar& q, const GaussianVar& p) {
  Var var_ratio = exp(sub(q.log_var, p.log_var));
  Var mean_term = cmul(square(sub(q.mean, p.mean)), exp(neg(p.log_var)));
  Var inner = add(add(var_ratio, mean_term), sub(p.log_var, q.log_var));
  double n = static_cast<double>(q.mean.rows() * q.mean.cols());
  return affine(sum_all(inner), 0.5, -0.5 * n);
}

/// mean + sqrt(var) * noise, with noise a constant (dim x batch) draw.
inline Var reparam_sample(const GaussianVar& g, const Var& noise) {
  return add(g.mean, cmul(exp(affine(g.log_var, 0.5)), noise));
}

/// Per-column KL (1 x batch row vector), used for masked reductions.
inline Var kl_divergence_per_col(const GaussianVar& q, const GaussianVar& p) {
  Var var_ratio = exp(sub(q.log_var, p.log_var));
  Var mean_term = cmul(square(sub(q.mean, p.mean)), exp(neg(p.log_var)));
  Var inner = add(add(var_ratio, mean_term), sub(p.log_var, q.log_var));
  Graph& g = *inner.graph();
  Var ones = g.constant(Mat::Ones(1, inner.rows()));
  double d = static_cast<double>(q.mean.rows());
  return affine(matmul(ones, inner), 0.5, -0.5 * d);
}

}  // namespace cmlf::ad
