// The cross-modal latent filter: per-modality measurement encoders,
// transition and y-predictor networks, bidirectional cross-modal priors,
// and the sequential Bayesian-fusion filtering step, plus the three
// ablation variants (baseline sequential VAE, joint shared-latent, and
// the split model without cross-modal connections).
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cmlf/ad/gaussian_ops.hpp"
#include "cmlf/core/gaussian.hpp"
#include "cmlf/model/config.hpp"
#include "cmlf/model/networks.hpp"
#include "cmlf/model/params.hpp"
#include "cmlf/sim/trajectory.hpp"

namespace cmlf::model {

enum class Modality { visual = 0, tactile = 1 };
enum class CmDirection { v2t = 0, t2v = 1 };

/// Plain recurrent carry (outside any graph).
struct LstmState {
  Eigen::MatrixXd h, c;
};

/// Filtered beliefs and pre-fusion components at one time step. In the
/// joint variant the V and T slots alias the shared stream; the baseline
/// stores its shared latent in the z slots and its trailing n_y
/// dimensions in the y slots.
struct FilterState {
  DiagonalGaussian z_V, z_T, y_V, y_T;
  DiagonalGaussian z_trans_V, z_trans_T, y_pred_V, y_pred_T;
  DiagonalGaussian z_meas_V, z_meas_T, cm_prior_V, cm_prior_T;
  LstmState carry_V, carry_T;
  Eigen::Vector3d prev_action = Eigen::Vector3d::Zero();
};

struct StepFlags {
  bool obs_V_present = true;
  bool obs_T_present = true;
  bool cm_active = false;
};

/// Batched trajectories, time-major; one sample per column.
struct Batch {
  std::vector<Eigen::MatrixXd> obs_V, obs_T;  // H entries of (n_o x B)
  std::vector<Eigen::MatrixXd> actions;       // H entries of (3 x B), raw units
  std::vector<Eigen::ArrayXd> present_V, present_T;
  std::vector<int> object_indices;

  int horizon() const { return static_cast<int>(actions.size()); }
  int batch() const { return static_cast<int>(object_indices.size()); }

  static Batch from_trajectories(const std::vector<const sim::Trajectory*>& trajectories);
};

/// In-graph mirror of FilterState used during rollouts.
struct StepTape {
  ad::GaussianVar z_V, z_T, y_V, y_T;
  ad::GaussianVar z_trans_V, z_trans_T, y_pred_V, y_pred_T;
  ad::GaussianVar z_meas_V, z_meas_T, cm_prior_V, cm_prior_T;
  LstmCell::State carry_V, carry_T;
  Eigen::ArrayXd present_V, present_T;
};

struct RolloutTape {
  std::vector<StepTape> steps;
};

/// Record/replay of the cross-modal prior inputs (the y_pred means whose
/// gradient is stopped). Replaying a recorded log freezes those inputs as
/// constants, which is exactly the surrogate objective the optimizer
/// descends; finite-difference gradient checks evaluate against it.
struct CmInputLog {
  bool replay = false;
  std::vector<Eigen::MatrixXd> v2t, t2v;  // one entry per step while the gate is active
  std::size_t cursor = 0;                 // consumed entries in replay mode
};

class CmlfModel {
 public:
  CmlfModel(ModelConfig config, std::uint64_t init_seed);

  // The network wrappers hold pointers into the parameter map. Map nodes
  // survive moves, so moves are defaulted; copies rebuild the wrappers
  // against the copied store.
  CmlfModel(const CmlfModel& other);
  CmlfModel& operator=(const CmlfModel& other);
  CmlfModel(CmlfModel&&) = default;
  CmlfModel& operator=(CmlfModel&&) = default;

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // --- single-sample operations ---
  DiagonalGaussian encode_measurement(const Eigen::VectorXd& obs, Modality m) const;
  DiagonalGaussian transition_z(const Eigen::VectorXd& z_prev, const Eigen::VectorXd& y_V,
                                const Eigen::VectorXd& y_T, const sim::Action& action, Modality m,
                                bool cross_modal_active) const;
  std::pair<DiagonalGaussian, LstmState> predict_y(const Eigen::VectorXd& z_prev,
                                                   const DiagonalGaussian& y_prev,
                                                   const sim::Action& action_prev,
                                                   const LstmState& carry, Modality m) const;
  /// Flat belief when inactive or the variant has no cross-modal nets.
  DiagonalGaussian cross_modal_prior(const Eigen::VectorXd& y_other_mean, CmDirection direction,
                                     bool active = true) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& z_sample, Modality m) const;

  FilterState initial_state() const;
  /// One filtering step; obs pointers may be null (missing frames skip
  /// measurement fusion and never reach the encoder).
  FilterState filter_step(const FilterState& prev, const Eigen::VectorXd* obs_V,
                          const Eigen::VectorXd* obs_T, const sim::Action& action,
                          const StepFlags& flags) const;
  std::vector<FilterState> filter_rollout(const sim::Trajectory& trajectory,
                                          bool cm_active) const;

  // --- batched tape machinery (training and evaluation) ---
  RolloutTape rollout(ad::Graph& g, const Batch& batch, bool cm_active,
                      CmInputLog* cm_log = nullptr) const;
  ad::Var decode_in_graph(ad::Graph& g, const ad::Var& z_sample, Modality m) const;
  /// Hierarchical prior p(y | a_t, L) for a batch of object indices;
  /// indices outside the training table map to N(0, I).
  ad::GaussianVar hierarchical_prior(ad::Graph& g, const std::vector<int>& object_indices,
                                     const ad::Var& action_scaled, Modality m) const;
  ad::Var scale_action(ad::Graph& g, const Eigen::MatrixXd& raw_action) const;

  /// Latent dimension of the z slots (n_s for the baseline).
  int z_dim() const;

 private:
  struct ModalityNets {
    MlpTrunk enc_trunk;
    Conv2d enc_conv1, enc_conv2;
    MlpTrunk enc_grid_dense;
    GaussianHead enc_head;
    MlpTrunk dec_trunk;
    Linear dec_out;
    Linear dec_grid_dense;
    Conv2d dec_conv1, dec_conv2;
    MlpTrunk trans_trunk;
    GaussianHead trans_head;
    LstmCell pred_lstm;
    GaussianHead pred_head;
  };

  void build_networks(std::uint64_t init_seed);
  const ModalityNets& nets(Modality m) const { return m == Modality::visual ? nets_V_ : nets_T_; }

  ad::Var encode_features(ad::Graph& g, const ad::Var& obs, Modality m, Eigen::Index batch) const;
  ad::GaussianVar encode_in_graph(ad::Graph& g, const ad::Var& obs, Modality m,
                                  Eigen::Index batch) const;

  StepTape initial_tape(ad::Graph& g, Eigen::Index batch) const;
  StepTape step(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V, const ad::Var& obs_T,
                const Eigen::ArrayXd& present_V, const Eigen::ArrayXd& present_T,
                const ad::Var& action_prev, const ad::Var& action_cur, bool cm_active,
                CmInputLog* cm_log = nullptr) const;
  StepTape step_structured(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                           const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                           const Eigen::ArrayXd& present_T, const ad::Var& action_prev,
                           const ad::Var& action_cur, bool cm_active,
                           CmInputLog* cm_log) const;
  StepTape step_joint(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                      const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                      const Eigen::ArrayXd& present_T, const ad::Var& action_prev,
                      const ad::Var& action_cur) const;
  StepTape step_baseline(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                         const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                         const Eigen::ArrayXd& present_T, const ad::Var& action_cur) const;

  ModelConfig config_;
  ParamStore params_;

  ModalityNets nets_V_, nets_T_;
  // cross-modal priors (w_cm)
  MlpTrunk cm_v2t_trunk_, cm_t2v_trunk_;
  GaussianHead cm_v2t_head_, cm_t2v_head_;
  // baseline-specific nets
  MlpTrunk vrnn_prior_trunk_, vrnn_post_trunk_;
  GaussianHead vrnn_prior_head_, vrnn_post_head_;
  LstmCell vrnn_lstm_;
  std::map<int, int> object_slot_;  // object_index -> hierarchical table column
};

/// Extracts the plain FilterState for one batch column. Missing
/// measurements are reported as flat beliefs per the filter contract.
FilterState extract_state(const StepTape& tape, int column, const Eigen::Vector3d& prev_action);

}  // namespace cmlf::model
