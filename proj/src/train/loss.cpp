#include "cmlf/train/loss.hpp"

#include <cmath>

#include "cmlf/core/rng.hpp"

namespace cmlf::train {

using model::Modality;
using model::Variant;

bool LossBreakdown::finite() const { return offending_term()[0] == '\0'; }

const char* LossBreakdown::offending_term() const {
  if (!std::isfinite(recon_V)) return "recon_V";
  if (!std::isfinite(recon_T)) return "recon_T";
  if (!std::isfinite(kl_zV)) return "kl_zV";
  if (!std::isfinite(kl_zT)) return "kl_zT";
  if (!std::isfinite(kl_yV)) return "kl_yV";
  if (!std::isfinite(kl_yT)) return "kl_yT";
  if (!std::isfinite(total)) return "total";
  return "";
}

LossGraph elbo_loss_graph(ad::Graph& g, const model::CmlfModel& model, const model::Batch& batch,
                          double beta, bool cm_active, std::uint64_t noise_seed,
                          model::CmInputLog* cm_log) {
  const int horizon = batch.horizon();
  const int b = batch.batch();
  const Variant variant = model.variant();
  const bool structured = variant == Variant::wo_cm || variant == Variant::w_cm;
  const bool has_y_prior = variant != Variant::baseline;

  model::RolloutTape tape = model.rollout(g, batch, cm_active, cm_log);

  Rng noise_V(derive_seed(noise_seed, "recon_noise_v"));
  Rng noise_T(derive_seed(noise_seed, "recon_noise_t"));
  const int nz = model.z_dim();

  auto masked_sse = [&](const ad::Var& reconstruction, const Eigen::MatrixXd& target,
                        const Eigen::ArrayXd& present) {
    ad::Var sq = ad::square(ad::sub(reconstruction, g.constant(target)));
    if (present.minCoeff() < 1.0) sq = ad::scale_cols(sq, present);
    return ad::sum_all(sq);
  };

  ad::Var recon_V, recon_T, kl_zV, kl_zT, kl_yV, kl_yT;
  auto accumulate = [&](ad::Var& acc, const ad::Var& term) {
    acc = acc.valid() ? ad::add(acc, term) : term;
  };

  for (int t = 0; t < horizon; ++t) {
    const model::StepTape& s = tape.steps[static_cast<std::size_t>(t)];

    // Reconstruction: one reparameterized sample per step.
    ad::Var noise_v = g.constant(noise_V.normal_matrix(nz, b));
    ad::Var z_sample_V = ad::reparam_sample(s.z_V, noise_v);
    ad::Var z_sample_T = z_sample_V;
    if (structured) {
      ad::Var noise_t_mat = g.constant(noise_T.normal_matrix(nz, b));
      z_sample_T = ad::reparam_sample(s.z_T, noise_t_mat);
    }
    accumulate(recon_V, masked_sse(model.decode_in_graph(g, z_sample_V, Modality::visual),
                                   batch.obs_V[static_cast<std::size_t>(t)],
                                   batch.present_V[static_cast<std::size_t>(t)]));
    accumulate(recon_T, masked_sse(model.decode_in_graph(g, z_sample_T, Modality::tactile),
                                   batch.obs_T[static_cast<std::size_t>(t)],
                                   batch.present_T[static_cast<std::size_t>(t)]));

    // KL terms start at the second step.
    if (t == 0) continue;
    accumulate(kl_zV, ad::kl_divergence(s.z_V, s.z_trans_V));
    if (structured) accumulate(kl_zT, ad::kl_divergence(s.z_T, s.z_trans_T));
    if (has_y_prior) {
      ad::Var a_scaled = model.scale_action(g, batch.actions[static_cast<std::size_t>(t)]);
      accumulate(kl_yV, ad::kl_divergence(
                            s.y_V, model.hierarchical_prior(g, batch.object_indices, a_scaled,
                                                            Modality::visual)));
      if (structured)
        accumulate(kl_yT, ad::kl_divergence(
                              s.y_T, model.hierarchical_prior(g, batch.object_indices, a_scaled,
                                                              Modality::tactile)));
    }
  }

  ad::Var zero = g.constant(Eigen::MatrixXd::Zero(1, 1));
  if (!kl_zT.valid()) kl_zT = zero;
  if (!kl_yV.valid()) kl_yV = zero;
  if (!kl_yT.valid()) kl_yT = zero;

  // log p(o | z) with unit observation variance reduces to -0.5 * SSE.
  ad::Var log_lik = ad::affine(ad::add(recon_V, recon_T), -0.5);
  ad::Var kl_sum = ad::add(ad::add(kl_zV, kl_zT), ad::add(kl_yV, kl_yT));
  ad::Var total = ad::affine(ad::add(ad::neg(log_lik), ad::affine(kl_sum, beta)), 1.0 / b);

  LossGraph result{LossBreakdown{}, total, std::move(tape)};
  result.breakdown.recon_V = -0.5 * recon_V.value()(0, 0) / b;
  result.breakdown.recon_T = -0.5 * recon_T.value()(0, 0) / b;
  result.breakdown.kl_zV = kl_zV.value()(0, 0) / b;
  result.breakdown.kl_zT = kl_zT.value()(0, 0) / b;
  result.breakdown.kl_yV = kl_yV.value()(0, 0) / b;
  result.breakdown.kl_yT = kl_yT.value()(0, 0) / b;
  result.breakdown.total = total.value()(0, 0);
  return result;
}

LossBreakdown elbo_loss(const model::CmlfModel& model, const model::Batch& batch, double beta,
                        bool cm_active, std::uint64_t noise_seed) {
  ad::Graph g;
  return elbo_loss_graph(g, model, batch, beta, cm_active, noise_seed).breakdown;
}

}  // namespace cmlf::train
