// Diagonal-Gaussian beliefs and the algebra every filtering stage is
// built from: precision-weighted fusion, closed-form KL divergence and
// reparameterized sampling.
#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf {

/// Variance floor applied after construction and fusion.
inline constexpr double kVarFloor = 1e-6;
/// Clamp range for log-variance network heads.
inline constexpr double kLogVarMin = -14.0;
inline constexpr double kLogVarMax = 20.0;
/// Log-variance of an effectively flat belief (fusion identity).
inline constexpr double kLogVarFlat = kLogVarMax;

/// Factorized Gaussian over a latent vector, parameterized by mean and
/// log-variance. Construction floors the variance at kVarFloor and caps
/// the log-variance at kLogVarMax.
template <typename Scalar>
struct DiagonalGaussianT {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector mean;
  Vector log_var;

  DiagonalGaussianT() = default;

  DiagonalGaussianT(Vector mean_in, Vector log_var_in)
      : mean(std::move(mean_in)), log_var(std::move(log_var_in)) {
    if (mean.size() != log_var.size() || mean.size() < 1)
      throw ContractError("DiagonalGaussian: mean/log_var dimension mismatch");
    if (!mean.allFinite() || !log_var.allFinite())
      throw ContractError("DiagonalGaussian: non-finite parameters");
    const Scalar lv_floor = std::log(static_cast<Scalar>(kVarFloor));
    log_var = log_var.cwiseMax(lv_floor).cwiseMin(static_cast<Scalar>(kLogVarMax));
  }

  Eigen::Index dim() const { return mean.size(); }

  Vector variance() const { return log_var.array().exp().matrix(); }

  /// Standard normal N(0, I) of dimension d.
  static DiagonalGaussianT standard(Eigen::Index d) {
    return DiagonalGaussianT(Vector::Zero(d), Vector::Zero(d));
  }

  /// Effectively flat belief (fusion identity within 1e-6).
  static DiagonalGaussianT flat(Eigen::Index d) {
    return DiagonalGaussianT(Vector::Zero(d),
                             Vector::Constant(d, static_cast<Scalar>(kLogVarFlat)));
  }
};

using DiagonalGaussian = DiagonalGaussianT<double>;

namespace detail {
template <typename Scalar>
void check_same_dim(const DiagonalGaussianT<Scalar>& a, const DiagonalGaussianT<Scalar>& b,
                    const char* op) {
  if (a.dim() != b.dim())
    throw ContractError(std::string(op) + ": dimension mismatch (" + std::to_string(a.dim()) +
                        " vs " + std::to_string(b.dim()) + ")");
}
}  // namespace detail

/// Bayesian integration of two diagonal-Gaussian beliefs: per dimension
/// the precisions add and the mean is the precision-weighted average.
/// Commutative; the fused variance is floored at kVarFloor.
template <typename Scalar>
DiagonalGaussianT<Scalar> fuse(const DiagonalGaussianT<Scalar>& a,
                               const DiagonalGaussianT<Scalar>& b) {
  detail::check_same_dim(a, b, "fuse");
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Array prec_a = (-a.log_var.array()).exp();
  Array prec_b = (-b.log_var.array()).exp();
  Array prec = prec_a + prec_b;
  Array mean = (prec_a * a.mean.array() + prec_b * b.mean.array()) / prec;
  Array log_var = -prec.log();
  return DiagonalGaussianT<Scalar>(mean.matrix(), log_var.matrix());
}

/// Closed-form KL[q || p] for diagonal Gaussians, summed over dimensions.
template <typename Scalar>
Scalar kl_divergence(const DiagonalGaussianT<Scalar>& q, const DiagonalGaussianT<Scalar>& p) {
  detail::check_same_dim(q, p, "kl_divergence");
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Array var_ratio = (q.log_var - p.log_var).array().exp();
  Array mean_term = (q.mean - p.mean).array().square() * (-p.log_var.array()).exp();
  Scalar kl = Scalar(0.5) * (var_ratio + mean_term - Scalar(1) +
                             p.log_var.array() - q.log_var.array())
                                .sum();
  return kl;
}

/// mean + sqrt(var) * noise; the pathwise (reparameterization) sample.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reparam_sample(const DiagonalGaussianT<Scalar>& g,
                                                        const Eigen::MatrixBase<Derived>& noise) {
  if (noise.size() != g.dim())
    throw ContractError("reparam_sample: noise dimension mismatch");
  return g.mean.array() + (Scalar(0.5) * g.log_var.array()).exp() * noise.array();
}

/// Log-density of x under g, summed over dimensions.
template <typename Scalar, typename Derived>
Scalar log_density(const DiagonalGaussianT<Scalar>& g, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != g.dim()) throw ContractError("log_density: dimension mismatch");
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  auto diff = (x - g.mean).array();
  return Scalar(-0.5) *
         (g.log_var.array() + diff.square() * (-g.log_var.array()).exp() +
          Scalar(kLog2Pi))
             .sum();
}

}  // namespace cmlf
