// The evidence-lower-bound training objective: per-modality Gaussian
// reconstruction terms plus KL of the filtered beliefs against the
// transition prior (z) and the hierarchical prior (y), averaged over the
// batch, negated so the total is minimized.
#pragma once

#include <cstdint>

#include "cmlf/model/filter.hpp"

namespace cmlf::train {

struct LossBreakdown {
  double recon_V = 0.0;  // log-likelihood terms (higher is better)
  double recon_T = 0.0;
  double kl_zV = 0.0;
  double kl_zT = 0.0;
  double kl_yV = 0.0;
  double kl_yT = 0.0;
  double total = 0.0;  // -(recon_V + recon_T) + beta * (kl terms)

  bool finite() const;
  /// Name of the first non-finite member, empty when all finite.
  const char* offending_term() const;
};

struct LossGraph {
  LossBreakdown breakdown;
  ad::Var total;               // differentiable root
  model::RolloutTape rollout;  // retained for diagnostics
};

/// Builds the loss on the caller's graph. KL sums start at the second
/// step (the first step's beliefs come from the fixed N(0, I) prior).
/// Reconstruction uses one reparameterized sample per step with noise
/// drawn deterministically from noise_seed; frames marked missing
/// contribute no reconstruction term.
LossGraph elbo_loss_graph(ad::Graph& g, const model::CmlfModel& model, const model::Batch& batch,
                          double beta, bool cm_active, std::uint64_t noise_seed,
                          model::CmInputLog* cm_log = nullptr);

/// Value-only convenience wrapper.
LossBreakdown elbo_loss(const model::CmlfModel& model, const model::Batch& batch, double beta,
                        bool cm_active, std::uint64_t noise_seed);

}  // namespace cmlf::train
