#include "cmlf/model/filter.hpp"

#include <cmath>

#include "cmlf/core/rng.hpp"

namespace cmlf::model {

namespace {

// Raw action units are tiny (meters, m/s); scale them to O(1) inputs.
const Eigen::Vector3d kActionScale(1.0 / sim::kFingerOpen, 1.0 / sim::kSpeedMax, 1.0 / 0.35);

ad::GaussianVar select_gaussian(const Eigen::ArrayXd& mask, const ad::GaussianVar& a,
                                const ad::GaussianVar& b) {
  if (mask.minCoeff() >= 1.0) return a;
  if (mask.maxCoeff() <= 0.0) return b;
  return {ad::select_cols(mask, a.mean, b.mean), ad::select_cols(mask, a.log_var, b.log_var)};
}

ad::GaussianVar slice_gaussian(const ad::GaussianVar& g, Eigen::Index r0, Eigen::Index n) {
  return {ad::slice_rows(g.mean, r0, n), ad::slice_rows(g.log_var, r0, n)};
}

/// Bounded uncertainty encoding of a log-variance input.
ad::Var uncertainty(const ad::Var& log_var) { return ad::tanh(ad::affine(log_var, 0.25)); }

DiagonalGaussian column_gaussian(const ad::GaussianVar& g, int col) {
  return DiagonalGaussian(g.mean.value().col(col), g.log_var.value().col(col));
}

LstmCell::State constant_carry(ad::Graph& g, const LstmState& carry) {
  return {g.constant(carry.h), g.constant(carry.c)};
}

LstmState extract_carry(const LstmCell::State& state, int col) {
  LstmState out;
  if (state.h.valid()) {
    out.h = state.h.value().col(col);
    out.c = state.c.value().col(col);
  }
  return out;
}

}  // namespace

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::baseline, Variant::joint, Variant::wo_cm, Variant::w_cm})
    if (name == variant_name(v)) return v;
  throw ConfigError("unknown variant '" + name + "'");
}

ModelConfig desk_model_config(Variant variant, const sim::ObsConfig& obs) {
  ModelConfig config;
  config.variant = variant;
  config.n_z = 16;
  config.n_y = 16;
  config.hidden = 32;
  config.lstm_hidden = 24;
  config.visual_mode = obs.visual_mode;
  config.grid_side = obs.grid_side;
  config.visual_dim = obs.visual_dim;
  config.tactile_dim = obs.tactile_dim;
  return config;
}

Batch Batch::from_trajectories(const std::vector<const sim::Trajectory*>& trajectories) {
  if (trajectories.empty()) throw ContractError("Batch: empty trajectory list");
  const int horizon = trajectories.front()->horizon();
  const auto n_ov = trajectories.front()->obs_visual.rows();
  const auto n_ot = trajectories.front()->obs_tactile.rows();
  const int b = static_cast<int>(trajectories.size());
  Batch batch;
  batch.obs_V.assign(static_cast<std::size_t>(horizon), Eigen::MatrixXd(n_ov, b));
  batch.obs_T.assign(static_cast<std::size_t>(horizon), Eigen::MatrixXd(n_ot, b));
  batch.actions.assign(static_cast<std::size_t>(horizon), Eigen::MatrixXd(3, b));
  batch.present_V.assign(static_cast<std::size_t>(horizon), Eigen::ArrayXd(b));
  batch.present_T.assign(static_cast<std::size_t>(horizon), Eigen::ArrayXd(b));
  for (int s = 0; s < b; ++s) {
    const sim::Trajectory& t = *trajectories[static_cast<std::size_t>(s)];
    if (t.horizon() != horizon || t.obs_visual.rows() != n_ov || t.obs_tactile.rows() != n_ot)
      throw ContractError("Batch: trajectories must share horizon and observation dims");
    batch.object_indices.push_back(t.object.object_index);
    for (int step = 0; step < horizon; ++step) {
      batch.obs_V[static_cast<std::size_t>(step)].col(s) = t.obs_visual.col(step);
      batch.obs_T[static_cast<std::size_t>(step)].col(s) = t.obs_tactile.col(step);
      batch.actions[static_cast<std::size_t>(step)].col(s) =
          t.actions[static_cast<std::size_t>(step)].vector();
      batch.present_V[static_cast<std::size_t>(step)][s] = t.visual_present[step] ? 1.0 : 0.0;
      batch.present_T[static_cast<std::size_t>(step)][s] = t.tactile_present[step] ? 1.0 : 0.0;
    }
  }
  return batch;
}

CmlfModel::CmlfModel(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)), params_(init_seed) {
  config_.validate();
  for (int slot = 0; slot < static_cast<int>(config_.object_ids.size()); ++slot)
    object_slot_[config_.object_ids[static_cast<std::size_t>(slot)]] = slot;
  build_networks(init_seed);
}

CmlfModel::CmlfModel(const CmlfModel& other) : CmlfModel(other.config_, other.params_.init_seed()) {
  for (auto& [name, tensor] : params_.map()) tensor.value = other.params_.at(name).value;
}

CmlfModel& CmlfModel::operator=(const CmlfModel& other) {
  if (this != &other) *this = CmlfModel(other);  // rebuild, then move-assign
  return *this;
}

int CmlfModel::z_dim() const {
  return config_.variant == Variant::baseline ? config_.n_s() : config_.n_z;
}

void CmlfModel::build_networks(std::uint64_t) {
  const int h = config_.hidden;
  const int n_z = config_.n_z;
  const int n_y = config_.n_y;
  const int lh = config_.lstm_hidden;
  const bool grid = config_.visual_mode == sim::VisualMode::grid;
  const int n_slots = std::max<int>(1, static_cast<int>(config_.object_ids.size()));

  auto build_encoder = [&](ModalityNets& nets, const std::string& name, int obs_dim, bool is_grid,
                           int head_dim) {
    if (is_grid) {
      nets.enc_conv1 = Conv2d(params_, name + ".conv1", config_.grid_side, 1,
                              config_.conv_channels1, 2);
      nets.enc_conv2 = Conv2d(params_, name + ".conv2", nets.enc_conv1.out_side(),
                              config_.conv_channels1, config_.conv_channels2, 2);
      int flat = config_.conv_channels2 * nets.enc_conv2.out_side() * nets.enc_conv2.out_side();
      nets.enc_grid_dense = MlpTrunk(params_, name + ".dense", {flat, h});
    } else {
      nets.enc_trunk = MlpTrunk(params_, name + ".trunk", {obs_dim, h});
    }
    nets.enc_head = GaussianHead(params_, name, h, head_dim);
  };

  auto build_decoder = [&](ModalityNets& nets, const std::string& name, int in_dim, int obs_dim,
                           bool is_grid) {
    if (is_grid) {
      const int side4 = config_.grid_side / 4;
      nets.dec_grid_dense =
          Linear(params_, name + ".dense", in_dim, config_.conv_channels2 * side4 * side4);
      nets.dec_conv1 = Conv2d(params_, name + ".conv1", 2 * side4, config_.conv_channels2,
                              config_.conv_channels1, 1);
      nets.dec_conv2 =
          Conv2d(params_, name + ".conv2", config_.grid_side, config_.conv_channels1, 1, 1);
    } else {
      nets.dec_trunk = MlpTrunk(params_, name + ".trunk", {in_dim, h});
      nets.dec_out = Linear(params_, name + ".out", h, obs_dim);
    }
  };

  const int n_ov = config_.visual_size();
  const int n_ot = config_.tactile_dim;

  switch (config_.variant) {
    case Variant::wo_cm:
    case Variant::w_cm: {
      for (Modality m : {Modality::visual, Modality::tactile}) {
        ModalityNets& nets = m == Modality::visual ? nets_V_ : nets_T_;
        const std::string tag = m == Modality::visual ? "V" : "T";
        const int obs_dim = m == Modality::visual ? n_ov : n_ot;
        const bool is_grid = m == Modality::visual && grid;
        build_encoder(nets, "enc_" + tag, obs_dim, is_grid, n_z);
        build_decoder(nets, "dec_" + tag, n_z, obs_dim, is_grid);
        nets.trans_trunk = MlpTrunk(params_, "trans_" + tag + ".trunk", {n_z + 2 * n_y + 3, h});
        nets.trans_head = GaussianHead(params_, "trans_" + tag, h, n_z);
        nets.pred_lstm = LstmCell(params_, "pred_" + tag + ".lstm", n_z + 2 * n_y + 3, lh);
        nets.pred_head = GaussianHead(params_, "pred_" + tag, lh, n_y);
        params_.create("hier_" + tag + ".mean", n_y, n_slots, 0.0);
        params_.create("hier_" + tag + ".lv", n_y, n_slots, 0.0);
        params_.create("hier_" + tag + ".act.w", n_y, 3, 0.05);
      }
      if (config_.variant == Variant::w_cm) {
        cm_v2t_trunk_ = MlpTrunk(params_, "cm_v2t.trunk", {n_y, h});
        cm_v2t_head_ = GaussianHead(params_, "cm_v2t", h, n_y);
        cm_t2v_trunk_ = MlpTrunk(params_, "cm_t2v.trunk", {n_y, h});
        cm_t2v_head_ = GaussianHead(params_, "cm_t2v", h, n_y);
      }
      break;
    }
    case Variant::joint: {
      build_encoder(nets_V_, "enc_V", n_ov, grid, n_z);
      build_encoder(nets_T_, "enc_T", n_ot, false, n_z);
      build_decoder(nets_V_, "dec_V", n_z, n_ov, grid);
      build_decoder(nets_T_, "dec_T", n_z, n_ot, false);
      nets_V_.trans_trunk = MlpTrunk(params_, "trans.trunk", {n_z + n_y + 3, h});
      nets_V_.trans_head = GaussianHead(params_, "trans", h, n_z);
      nets_V_.pred_lstm = LstmCell(params_, "pred.lstm", n_z + 2 * n_y + 3, lh);
      nets_V_.pred_head = GaussianHead(params_, "pred", lh, n_y);
      params_.create("hier.mean", n_y, n_slots, 0.0);
      params_.create("hier.lv", n_y, n_slots, 0.0);
      params_.create("hier.act.w", n_y, 3, 0.05);
      break;
    }
    case Variant::baseline: {
      const int n_s = config_.n_s();
      build_encoder(nets_V_, "enc_V", n_ov, grid, n_z);  // head unused; trunk gives features
      build_encoder(nets_T_, "enc_T", n_ot, false, n_z);
      build_decoder(nets_V_, "dec_V", n_s, n_ov, grid);
      build_decoder(nets_T_, "dec_T", n_s, n_ot, false);
      vrnn_prior_trunk_ = MlpTrunk(params_, "vrnn_prior.trunk", {lh + 3, h});
      vrnn_prior_head_ = GaussianHead(params_, "vrnn_prior", h, n_s);
      vrnn_post_trunk_ = MlpTrunk(params_, "vrnn_post.trunk", {2 * h + lh, h});
      vrnn_post_head_ = GaussianHead(params_, "vrnn_post", h, n_s);
      vrnn_lstm_ = LstmCell(params_, "vrnn.lstm", n_s + 2 * h + 3, lh);
      break;
    }
  }
}

ad::Var CmlfModel::scale_action(ad::Graph& g, const Eigen::MatrixXd& raw_action) const {
  return g.constant(kActionScale.asDiagonal() * raw_action);
}

ad::Var CmlfModel::encode_features(ad::Graph& g, const ad::Var& obs, Modality m,
                                   Eigen::Index batch) const {
  const ModalityNets& n = nets(m);
  const bool is_grid = m == Modality::visual && config_.visual_mode == sim::VisualMode::grid;
  if (!is_grid) return n.enc_trunk.forward(g, obs);
  ad::Var x = ad::to_channel_layout(obs, 1);
  x = ad::tanh(n.enc_conv1.forward(g, x, batch));
  x = ad::tanh(n.enc_conv2.forward(g, x, batch));
  x = ad::from_channel_layout(x, batch);
  return n.enc_grid_dense.forward(g, x);
}

ad::GaussianVar CmlfModel::encode_in_graph(ad::Graph& g, const ad::Var& obs, Modality m,
                                           Eigen::Index batch) const {
  if (obs.rows() != (m == Modality::visual ? config_.visual_size() : config_.tactile_dim))
    throw ContractError("encode_measurement: observation shape mismatch");
  return nets(m).enc_head.forward(g, encode_features(g, obs, m, batch));
}

ad::Var CmlfModel::decode_in_graph(ad::Graph& g, const ad::Var& z_sample, Modality m) const {
  const ModalityNets& n = nets(m);
  const bool is_grid = m == Modality::visual && config_.visual_mode == sim::VisualMode::grid;
  if (!is_grid) return n.dec_out.forward(g, n.dec_trunk.forward(g, z_sample));
  const Eigen::Index batch = z_sample.cols();
  const int side4 = config_.grid_side / 4;
  ad::Var x = ad::tanh(n.dec_grid_dense.forward(g, z_sample));
  x = ad::to_channel_layout(x, config_.conv_channels2);
  x = upsample2(g, x, side4, batch);
  x = ad::tanh(n.dec_conv1.forward(g, x, batch));
  x = upsample2(g, x, 2 * side4, batch);
  x = n.dec_conv2.forward(g, x, batch);
  return ad::from_channel_layout(x, batch);
}

ad::GaussianVar CmlfModel::hierarchical_prior(ad::Graph& g, const std::vector<int>& object_indices,
                                              const ad::Var& action_scaled, Modality m) const {
  std::string tag;
  switch (config_.variant) {
    case Variant::joint: tag = "hier"; break;
    case Variant::wo_cm:
    case Variant::w_cm: tag = m == Modality::visual ? "hier_V" : "hier_T"; break;
    case Variant::baseline:
      throw ContractError("hierarchical_prior: baseline variant has no hierarchical prior");
  }
  std::vector<int> slots;
  Eigen::ArrayXd known(static_cast<Eigen::Index>(object_indices.size()));
  bool all_known = true;
  for (std::size_t i = 0; i < object_indices.size(); ++i) {
    auto it = object_slot_.find(object_indices[i]);
    known[static_cast<Eigen::Index>(i)] = it != object_slot_.end() ? 1.0 : 0.0;
    all_known = all_known && it != object_slot_.end();
    slots.push_back(it != object_slot_.end() ? it->second : 0);
  }
  ad::Var mean = ad::gather_cols(g.param(params_.at(tag + ".mean")), slots);
  mean = ad::add(mean, ad::matmul(g.param(params_.at(tag + ".act.w")), action_scaled));
  ad::Var lv = ad::clamp(ad::gather_cols(g.param(params_.at(tag + ".lv")), slots), kLogVarMin,
                         kLogVarMax);
  ad::GaussianVar prior = ad::make_gaussian(mean, lv);
  if (all_known) return prior;
  ad::GaussianVar standard = ad::standard_gaussian(g, config_.n_y, mean.cols());
  return select_gaussian(known, prior, standard);
}

StepTape CmlfModel::initial_tape(ad::Graph& g, Eigen::Index batch) const {
  StepTape tape;
  const int nz = z_dim();
  const int ny = config_.n_y;
  tape.z_V = ad::standard_gaussian(g, nz, batch);
  tape.z_T = tape.z_V;
  tape.y_V = ad::standard_gaussian(g, ny, batch);
  tape.y_T = tape.y_V;
  tape.z_trans_V = tape.z_trans_T = tape.z_V;
  tape.y_pred_V = tape.y_pred_T = tape.y_V;
  tape.z_meas_V = tape.z_meas_T = ad::flat_gaussian(g, nz, batch);
  tape.cm_prior_V = tape.cm_prior_T = ad::flat_gaussian(g, ny, batch);
  const int lh = config_.lstm_hidden;
  LstmState zero{Eigen::MatrixXd::Zero(lh, batch), Eigen::MatrixXd::Zero(lh, batch)};
  tape.carry_V = constant_carry(g, zero);
  tape.carry_T = constant_carry(g, zero);
  tape.present_V = Eigen::ArrayXd::Zero(batch);
  tape.present_T = Eigen::ArrayXd::Zero(batch);
  return tape;
}

StepTape CmlfModel::step(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                         const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                         const Eigen::ArrayXd& present_T, const ad::Var& action_prev,
                         const ad::Var& action_cur, bool cm_active, CmInputLog* cm_log) const {
  switch (config_.variant) {
    case Variant::wo_cm:
      return step_structured(g, prev, obs_V, obs_T, present_V, present_T, action_prev, action_cur,
                             false, nullptr);
    case Variant::w_cm:
      return step_structured(g, prev, obs_V, obs_T, present_V, present_T, action_prev, action_cur,
                             cm_active, cm_log);
    case Variant::joint:
      return step_joint(g, prev, obs_V, obs_T, present_V, present_T, action_prev, action_cur);
    case Variant::baseline:
      return step_baseline(g, prev, obs_V, obs_T, present_V, present_T, action_cur);
  }
  throw ContractError("step: unreachable");
}

StepTape CmlfModel::step_structured(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                                    const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                                    const Eigen::ArrayXd& present_T, const ad::Var& action_prev,
                                    const ad::Var& action_cur, bool cm_active,
                                    CmInputLog* cm_log) const {
  const Eigen::Index batch = obs_V.cols();
  StepTape out;
  out.present_V = present_V;
  out.present_T = present_T;

  // (1) y predictions from the previous step's filtered beliefs.
  auto predict = [&](Modality m) {
    const ModalityNets& n = nets(m);
    const ad::GaussianVar& z_prev = m == Modality::visual ? prev.z_V : prev.z_T;
    const ad::GaussianVar& y_prev = m == Modality::visual ? prev.y_V : prev.y_T;
    const LstmCell::State& carry = m == Modality::visual ? prev.carry_V : prev.carry_T;
    ad::Var input =
        ad::concat_rows({z_prev.mean, y_prev.mean, uncertainty(y_prev.log_var), action_prev});
    LstmCell::State next = n.pred_lstm.forward(g, input, carry);
    ad::GaussianVar y_pred = n.pred_head.forward(g, next.h);
    return std::make_pair(y_pred, next);
  };
  auto [y_pred_V, carry_V] = predict(Modality::visual);
  auto [y_pred_T, carry_T] = predict(Modality::tactile);
  out.y_pred_V = y_pred_V;
  out.y_pred_T = y_pred_T;
  out.carry_V = carry_V;
  out.carry_T = carry_T;

  // (2) cross-modal priors from the pre-fusion y means (gradient stopped
  // through the input); (3) y fusion.
  if (cm_active) {
    ad::Var v2t_in, t2v_in;
    if (cm_log != nullptr && cm_log->replay) {
      if (cm_log->cursor >= cm_log->v2t.size())
        throw ContractError("CmInputLog: replay log exhausted");
      v2t_in = g.constant(cm_log->v2t[cm_log->cursor]);
      t2v_in = g.constant(cm_log->t2v[cm_log->cursor]);
      ++cm_log->cursor;
    } else {
      v2t_in = ad::detach(y_pred_V.mean);
      t2v_in = ad::detach(y_pred_T.mean);
      if (cm_log != nullptr) {
        cm_log->v2t.push_back(y_pred_V.mean.value());
        cm_log->t2v.push_back(y_pred_T.mean.value());
      }
    }
    out.cm_prior_T = cm_v2t_head_.forward(g, cm_v2t_trunk_.forward(g, v2t_in));
    out.cm_prior_V = cm_t2v_head_.forward(g, cm_t2v_trunk_.forward(g, t2v_in));
    out.y_V = ad::fuse(y_pred_V, out.cm_prior_V);
    out.y_T = ad::fuse(y_pred_T, out.cm_prior_T);
  } else {
    out.cm_prior_V = ad::flat_gaussian(g, config_.n_y, batch);
    out.cm_prior_T = ad::flat_gaussian(g, config_.n_y, batch);
    out.y_V = y_pred_V;
    out.y_T = y_pred_T;
  }

  // (4) transitions conditioned on the filtered y means; the cross-modal
  // y input is zeroed unless the cross-modal connections are active.
  const double cross_gate = cm_active ? 1.0 : 0.0;
  auto transition = [&](Modality m) {
    const ModalityNets& n = nets(m);
    const ad::GaussianVar& z_prev = m == Modality::visual ? prev.z_V : prev.z_T;
    const ad::GaussianVar& y_own = m == Modality::visual ? out.y_V : out.y_T;
    const ad::GaussianVar& y_cross = m == Modality::visual ? out.y_T : out.y_V;
    ad::Var input = ad::concat_rows(
        {z_prev.mean, y_own.mean, ad::affine(y_cross.mean, cross_gate), action_cur});
    return n.trans_head.forward(g, n.trans_trunk.forward(g, input));
  };
  out.z_trans_V = transition(Modality::visual);
  out.z_trans_T = transition(Modality::tactile);

  // (5) measurement fusion where observations are present.
  out.z_meas_V = encode_in_graph(g, obs_V, Modality::visual, batch);
  out.z_meas_T = encode_in_graph(g, obs_T, Modality::tactile, batch);
  out.z_V = select_gaussian(present_V, ad::fuse(out.z_trans_V, out.z_meas_V), out.z_trans_V);
  out.z_T = select_gaussian(present_T, ad::fuse(out.z_trans_T, out.z_meas_T), out.z_trans_T);
  return out;
}

StepTape CmlfModel::step_joint(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                               const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                               const Eigen::ArrayXd& present_T, const ad::Var& action_prev,
                               const ad::Var& action_cur) const {
  const Eigen::Index batch = obs_V.cols();
  StepTape out;
  out.present_V = present_V;
  out.present_T = present_T;

  ad::Var pred_in = ad::concat_rows(
      {prev.z_V.mean, prev.y_V.mean, uncertainty(prev.y_V.log_var), action_prev});
  out.carry_V = nets_V_.pred_lstm.forward(g, pred_in, prev.carry_V);
  out.carry_T = prev.carry_T;
  ad::GaussianVar y = nets_V_.pred_head.forward(g, out.carry_V.h);
  out.y_pred_V = out.y_pred_T = y;
  out.y_V = out.y_T = y;
  out.cm_prior_V = out.cm_prior_T = ad::flat_gaussian(g, config_.n_y, batch);

  ad::Var trans_in = ad::concat_rows({prev.z_V.mean, y.mean, action_cur});
  ad::GaussianVar z_trans = nets_V_.trans_head.forward(g, nets_V_.trans_trunk.forward(g, trans_in));
  out.z_trans_V = out.z_trans_T = z_trans;

  out.z_meas_V = encode_in_graph(g, obs_V, Modality::visual, batch);
  out.z_meas_T = encode_in_graph(g, obs_T, Modality::tactile, batch);
  ad::GaussianVar z = select_gaussian(present_V, ad::fuse(z_trans, out.z_meas_V), z_trans);
  z = select_gaussian(present_T, ad::fuse(z, out.z_meas_T), z);
  out.z_V = out.z_T = z;
  return out;
}

StepTape CmlfModel::step_baseline(ad::Graph& g, const StepTape& prev, const ad::Var& obs_V,
                                  const ad::Var& obs_T, const Eigen::ArrayXd& present_V,
                                  const Eigen::ArrayXd& present_T, const ad::Var& action_cur) const {
  const Eigen::Index batch = obs_V.cols();
  const int n_s = config_.n_s();
  const int n_y = config_.n_y;
  StepTape out;
  out.present_V = present_V;
  out.present_T = present_T;

  ad::Var feat_V = ad::scale_cols(encode_features(g, obs_V, Modality::visual, batch), present_V);
  ad::Var feat_T = ad::scale_cols(encode_features(g, obs_T, Modality::tactile, batch), present_T);

  ad::GaussianVar prior = vrnn_prior_head_.forward(
      g, vrnn_prior_trunk_.forward(g, ad::concat_rows({prev.carry_V.h, action_cur})));
  ad::GaussianVar posterior = vrnn_post_head_.forward(
      g, vrnn_post_trunk_.forward(g, ad::concat_rows({feat_V, feat_T, prev.carry_V.h})));
  Eigen::ArrayXd any_present = present_V.max(present_T);
  ad::GaussianVar s = select_gaussian(any_present, posterior, prior);

  out.carry_V =
      vrnn_lstm_.forward(g, ad::concat_rows({s.mean, feat_V, feat_T, action_cur}), prev.carry_V);
  out.carry_T = prev.carry_T;

  out.z_V = out.z_T = s;
  out.z_trans_V = out.z_trans_T = prior;
  out.z_meas_V = out.z_meas_T = posterior;
  out.y_V = out.y_T = slice_gaussian(s, n_s - n_y, n_y);
  out.y_pred_V = out.y_pred_T = slice_gaussian(prior, n_s - n_y, n_y);
  out.cm_prior_V = out.cm_prior_T = ad::flat_gaussian(g, n_y, batch);
  return out;
}

RolloutTape CmlfModel::rollout(ad::Graph& g, const Batch& batch, bool cm_active,
                               CmInputLog* cm_log) const {
  const int horizon = batch.horizon();
  if (horizon < 1) throw ContractError("rollout: empty batch");
  RolloutTape tape;
  tape.steps.reserve(static_cast<std::size_t>(horizon));
  StepTape cur = initial_tape(g, batch.batch());
  for (int t = 0; t < horizon; ++t) {
    ad::Var obs_V = g.constant(batch.obs_V[static_cast<std::size_t>(t)]);
    ad::Var obs_T = g.constant(batch.obs_T[static_cast<std::size_t>(t)]);
    ad::Var a_prev = t == 0 ? g.constant(Eigen::MatrixXd::Zero(3, batch.batch()))
                            : scale_action(g, batch.actions[static_cast<std::size_t>(t - 1)]);
    ad::Var a_cur = scale_action(g, batch.actions[static_cast<std::size_t>(t)]);
    cur = step(g, cur, obs_V, obs_T, batch.present_V[static_cast<std::size_t>(t)],
               batch.present_T[static_cast<std::size_t>(t)], a_prev, a_cur, cm_active, cm_log);
    tape.steps.push_back(cur);
  }
  return tape;
}

// --- single-sample wrappers -------------------------------------------------

DiagonalGaussian CmlfModel::encode_measurement(const Eigen::VectorXd& obs, Modality m) const {
  if (!obs.allFinite()) throw ContractError("encode_measurement: non-finite observation");
  ad::Graph g;
  return column_gaussian(encode_in_graph(g, g.constant(obs), m, 1), 0);
}

DiagonalGaussian CmlfModel::transition_z(const Eigen::VectorXd& z_prev, const Eigen::VectorXd& y_V,
                                         const Eigen::VectorXd& y_T, const sim::Action& action,
                                         Modality m, bool cross_modal_active) const {
  if (config_.variant == Variant::baseline)
    throw ContractError("transition_z: baseline variant has no structured transition");
  if (!z_prev.allFinite() || !y_V.allFinite() || !y_T.allFinite())
    throw ContractError("transition_z: non-finite inputs");
  ad::Graph g;
  ad::Var a = scale_action(g, action.vector());
  const ModalityNets& n = nets(m);
  ad::Var input;
  if (config_.variant == Variant::joint) {
    input = ad::concat_rows({g.constant(z_prev), g.constant(y_V), a});
  } else {
    const bool cross = config_.variant == Variant::w_cm && cross_modal_active;
    const Eigen::VectorXd& own = m == Modality::visual ? y_V : y_T;
    const Eigen::VectorXd& other = m == Modality::visual ? y_T : y_V;
    input = ad::concat_rows({g.constant(z_prev), g.constant(own),
                             ad::affine(g.constant(other), cross ? 1.0 : 0.0), a});
  }
  return column_gaussian(n.trans_head.forward(g, n.trans_trunk.forward(g, input)), 0);
}

std::pair<DiagonalGaussian, LstmState> CmlfModel::predict_y(const Eigen::VectorXd& z_prev,
                                                            const DiagonalGaussian& y_prev,
                                                            const sim::Action& action_prev,
                                                            const LstmState& carry,
                                                            Modality m) const {
  if (config_.variant == Variant::baseline)
    throw ContractError("predict_y: baseline variant has no y stream");
  ad::Graph g;
  const ModalityNets& n = config_.variant == Variant::joint ? nets_V_ : nets(m);
  ad::Var input = ad::concat_rows({g.constant(z_prev), g.constant(y_prev.mean),
                                   uncertainty(g.constant(y_prev.log_var)),
                                   scale_action(g, action_prev.vector())});
  LstmCell::State state = n.pred_lstm.forward(g, input, constant_carry(g, carry));
  return {column_gaussian(n.pred_head.forward(g, state.h), 0), extract_carry(state, 0)};
}

DiagonalGaussian CmlfModel::cross_modal_prior(const Eigen::VectorXd& y_other_mean,
                                              CmDirection direction, bool active) const {
  if (!active || config_.variant != Variant::w_cm)
    return DiagonalGaussian::flat(config_.n_y);
  if (y_other_mean.size() != config_.n_y)
    throw ContractError("cross_modal_prior: input dimension mismatch");
  ad::Graph g;
  ad::Var input = g.constant(y_other_mean);
  const MlpTrunk& trunk = direction == CmDirection::v2t ? cm_v2t_trunk_ : cm_t2v_trunk_;
  const GaussianHead& head = direction == CmDirection::v2t ? cm_v2t_head_ : cm_t2v_head_;
  return column_gaussian(head.forward(g, trunk.forward(g, input)), 0);
}

Eigen::VectorXd CmlfModel::decode(const Eigen::VectorXd& z_sample, Modality m) const {
  if (z_sample.size() != z_dim()) throw ContractError("decode: latent dimension mismatch");
  ad::Graph g;
  return decode_in_graph(g, g.constant(z_sample), m).value().col(0);
}

FilterState CmlfModel::initial_state() const {
  FilterState s;
  const int nz = z_dim();
  const int ny = config_.n_y;
  s.z_V = s.z_T = s.z_trans_V = s.z_trans_T = DiagonalGaussian::standard(nz);
  s.y_V = s.y_T = s.y_pred_V = s.y_pred_T = DiagonalGaussian::standard(ny);
  s.z_meas_V = s.z_meas_T = DiagonalGaussian::flat(nz);
  s.cm_prior_V = s.cm_prior_T = DiagonalGaussian::flat(ny);
  const int lh = config_.lstm_hidden;
  s.carry_V = s.carry_T = LstmState{Eigen::MatrixXd::Zero(lh, 1), Eigen::MatrixXd::Zero(lh, 1)};
  return s;
}

FilterState extract_state(const StepTape& tape, int column, const Eigen::Vector3d& prev_action) {
  FilterState s;
  s.z_V = column_gaussian(tape.z_V, column);
  s.z_T = column_gaussian(tape.z_T, column);
  s.y_V = column_gaussian(tape.y_V, column);
  s.y_T = column_gaussian(tape.y_T, column);
  s.z_trans_V = column_gaussian(tape.z_trans_V, column);
  s.z_trans_T = column_gaussian(tape.z_trans_T, column);
  s.y_pred_V = column_gaussian(tape.y_pred_V, column);
  s.y_pred_T = column_gaussian(tape.y_pred_T, column);
  s.z_meas_V = tape.present_V[column] != 0.0 ? column_gaussian(tape.z_meas_V, column)
                                             : DiagonalGaussian::flat(tape.z_meas_V.dim());
  s.z_meas_T = tape.present_T[column] != 0.0 ? column_gaussian(tape.z_meas_T, column)
                                             : DiagonalGaussian::flat(tape.z_meas_T.dim());
  s.cm_prior_V = column_gaussian(tape.cm_prior_V, column);
  s.cm_prior_T = column_gaussian(tape.cm_prior_T, column);
  s.carry_V = extract_carry(tape.carry_V, column);
  s.carry_T = extract_carry(tape.carry_T, column);
  s.prev_action = prev_action;
  return s;
}

FilterState CmlfModel::filter_step(const FilterState& prev, const Eigen::VectorXd* obs_V,
                                   const Eigen::VectorXd* obs_T, const sim::Action& action,
                                   const StepFlags& flags) const {
  ad::Graph g;
  StepTape prev_tape;
  auto to_var = [&](const DiagonalGaussian& d) {
    return ad::GaussianVar{g.constant(d.mean), g.constant(d.log_var)};
  };
  prev_tape.z_V = to_var(prev.z_V);
  prev_tape.z_T = to_var(prev.z_T);
  prev_tape.y_V = to_var(prev.y_V);
  prev_tape.y_T = to_var(prev.y_T);
  prev_tape.carry_V = constant_carry(g, prev.carry_V);
  prev_tape.carry_T = constant_carry(g, prev.carry_T);

  const int n_ov = config_.visual_size();
  const int n_ot = config_.tactile_dim;
  Eigen::VectorXd zero_v = Eigen::VectorXd::Zero(n_ov);
  Eigen::VectorXd zero_t = Eigen::VectorXd::Zero(n_ot);
  const bool has_V = flags.obs_V_present && obs_V != nullptr;
  const bool has_T = flags.obs_T_present && obs_T != nullptr;
  Eigen::ArrayXd pres_V = Eigen::ArrayXd::Constant(1, has_V ? 1.0 : 0.0);
  Eigen::ArrayXd pres_T = Eigen::ArrayXd::Constant(1, has_T ? 1.0 : 0.0);

  ad::Var a_prev = g.constant(kActionScale.asDiagonal() * prev.prev_action);
  ad::Var a_cur = scale_action(g, action.vector());
  StepTape out = step(g, prev_tape, g.constant(has_V ? *obs_V : zero_v),
                      g.constant(has_T ? *obs_T : zero_t), pres_V, pres_T, a_prev, a_cur,
                      flags.cm_active);
  return extract_state(out, 0, action.vector());
}

std::vector<FilterState> CmlfModel::filter_rollout(const sim::Trajectory& trajectory,
                                                   bool cm_active) const {
  ad::Graph g;
  Batch batch = Batch::from_trajectories({&trajectory});
  RolloutTape tape = rollout(g, batch, cm_active);
  std::vector<FilterState> states;
  states.reserve(tape.steps.size());
  for (std::size_t t = 0; t < tape.steps.size(); ++t)
    states.push_back(extract_state(tape.steps[t], 0,
                                   trajectory.actions[t].vector()));
  return states;
}

}  // namespace cmlf::model
