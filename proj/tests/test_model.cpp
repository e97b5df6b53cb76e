#include "doctest.h"

#include <cstring>
#include <filesystem>

#include "cmlf/core/rng.hpp"
#include "cmlf/model/checkpoint.hpp"
#include "cmlf/model/filter.hpp"
#include "cmlf/sim/dataset.hpp"
#include "cmlf/train/loss.hpp"

using namespace cmlf;
using namespace cmlf::model;

namespace {

sim::ObsConfig small_obs() {
  sim::ObsConfig obs;
  obs.visual_mode = sim::VisualMode::vector;
  obs.visual_dim = 12;
  obs.tactile_dim = 8;
  return obs;
}

ModelConfig small_config(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.n_z = 5;
  c.n_y = 4;
  c.hidden = 8;
  c.lstm_hidden = 6;
  c.visual_mode = sim::VisualMode::vector;
  c.visual_dim = 12;
  c.tactile_dim = 8;
  c.object_ids = {0, 1, 2};
  return c;
}

sim::Trajectory small_trajectory(int object_pick, std::uint64_t seed, int horizon = 20) {
  auto catalog = sim::build_catalog(sim::CatalogConfig{}, 3);
  auto actions = sim::make_action_sequence(2, 1, horizon);
  return sim::simulate_trajectory(catalog[static_cast<std::size_t>(object_pick)], actions,
                                  small_obs(), seed);
}

bool same_gaussian(const DiagonalGaussian& a, const DiagonalGaussian& b) {
  return a.dim() == b.dim() && (a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0 &&
         (a.log_var - b.log_var).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_CASE("encode_measurement: robustness, purity, clamp discipline") {
  CmlfModel m(small_config(Variant::w_cm), 42);

  Eigen::VectorXd zero_obs = Eigen::VectorXd::Zero(12);
  DiagonalGaussian g = m.encode_measurement(zero_obs, Modality::visual);
  CHECK(g.mean.allFinite());
  CHECK(g.log_var.allFinite());
  CHECK(g.dim() == 5);

  DiagonalGaussian again = m.encode_measurement(zero_obs, Modality::visual);
  CHECK(same_gaussian(g, again));

  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::VectorXd obs = rng.normal_matrix(12, 1) * 3.0;
    DiagonalGaussian enc = m.encode_measurement(obs, Modality::visual);
    CHECK(enc.log_var.minCoeff() >= kLogVarMin);
    CHECK(enc.log_var.maxCoeff() <= kLogVarMax);
    CHECK(enc.mean.allFinite());
  }

  CHECK_THROWS_AS(m.encode_measurement(Eigen::VectorXd::Zero(7), Modality::visual), ContractError);
}

TEST_CASE("transition_z: cross-modal masking is exact") {
  Rng rng(7);
  Eigen::VectorXd z_prev = rng.normal_vector(5);
  Eigen::VectorXd y_V = rng.normal_vector(4);
  Eigen::VectorXd y_V2 = y_V + rng.normal_vector(4);
  Eigen::VectorXd y_T = rng.normal_vector(4);
  sim::Action action;
  action.d = 0.07;

  SUBCASE("wo_cm: tactile transition bitwise invariant to y_V") {
    CmlfModel m(small_config(Variant::wo_cm), 42);
    auto a = m.transition_z(z_prev, y_V, y_T, action, Modality::tactile, false);
    auto b = m.transition_z(z_prev, y_V2, y_T, action, Modality::tactile, false);
    CHECK(same_gaussian(a, b));
    // purity: identical inputs give identical outputs
    auto c = m.transition_z(z_prev, y_V, y_T, action, Modality::tactile, false);
    CHECK(same_gaussian(a, c));
  }

  SUBCASE("w_cm with the gate on: tactile transition responds to y_V") {
    CmlfModel m(small_config(Variant::w_cm), 42);
    auto a = m.transition_z(z_prev, y_V, y_T, action, Modality::tactile, true);
    auto b = m.transition_z(z_prev, y_V2, y_T, action, Modality::tactile, true);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() > 0.0);
    // gate off reduces to the wo_cm computation
    CmlfModel wo(small_config(Variant::wo_cm), 42);
    auto gated = m.transition_z(z_prev, y_V, y_T, action, Modality::tactile, false);
    auto plain = wo.transition_z(z_prev, y_V, y_T, action, Modality::tactile, false);
    CHECK(same_gaussian(gated, plain));
  }
}

TEST_CASE("predict_y: finiteness, statefulness, dimension") {
  ModelConfig c = small_config(Variant::w_cm);
  c.n_y = 16;  // the published latent dimension
  CmlfModel m(c, 11);

  LstmState carry{Eigen::MatrixXd::Zero(6, 1), Eigen::MatrixXd::Zero(6, 1)};
  DiagonalGaussian y0 = DiagonalGaussian::standard(16);
  sim::Action a;

  auto [y1, carry1] = m.predict_y(Eigen::VectorXd::Zero(5), y0, a, carry, Modality::visual);
  CHECK(y1.mean.allFinite());
  CHECK(y1.dim() == 16);

  // carry threading: two chained steps differ from re-running with a fresh carry
  auto [y2_chained, carry2] = m.predict_y(Eigen::VectorXd::Zero(5), y1, a, carry1, Modality::visual);
  auto [y2_fresh, carry3] = m.predict_y(Eigen::VectorXd::Zero(5), y1, a, carry, Modality::visual);
  CHECK((y2_chained.mean - y2_fresh.mean).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("cross_modal_prior: gating contract and robustness") {
  CmlfModel m(small_config(Variant::w_cm), 13);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);

  DiagonalGaussian off = m.cross_modal_prior(y, CmDirection::v2t, false);
  CHECK(off.log_var.minCoeff() == kLogVarFlat);
  CHECK(off.mean.cwiseAbs().maxCoeff() == 0.0);

  DiagonalGaussian on = m.cross_modal_prior(y, CmDirection::v2t, true);
  CHECK(on.mean.allFinite());
  CHECK(on.dim() == 4);

  CmlfModel wo(small_config(Variant::wo_cm), 13);
  DiagonalGaussian disabled = wo.cross_modal_prior(y, CmDirection::v2t, true);
  CHECK(disabled.log_var.minCoeff() == kLogVarFlat);
}

TEST_CASE("decode: shape and purity") {
  CmlfModel m(small_config(Variant::w_cm), 17);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(5, 0.3);
  Eigen::VectorXd rec_v = m.decode(z, Modality::visual);
  Eigen::VectorXd rec_t = m.decode(z, Modality::tactile);
  CHECK(rec_v.size() == 12);
  CHECK(rec_t.size() == 8);
  CHECK((m.decode(z, Modality::visual) - rec_v).norm() == 0.0);
  CHECK_THROWS_AS(m.decode(Eigen::VectorXd::Zero(9), Modality::visual), ContractError);
}

TEST_CASE("filter_step: fusion identity chain and variance contraction") {
  CmlfModel m(small_config(Variant::w_cm), 23);
  FilterState prev = m.initial_state();
  sim::Action action;
  action.d = 0.07;

  SUBCASE("both observations absent, gate off") {
    StepFlags flags;
    flags.obs_V_present = false;
    flags.obs_T_present = false;
    flags.cm_active = false;
    FilterState s = m.filter_step(prev, nullptr, nullptr, action, flags);
    CHECK(same_gaussian(s.z_V, s.z_trans_V));
    CHECK(same_gaussian(s.z_T, s.z_trans_T));
    CHECK(same_gaussian(s.y_V, s.y_pred_V));
    CHECK(same_gaussian(s.y_T, s.y_pred_T));
    CHECK(s.z_meas_V.log_var.minCoeff() == kLogVarFlat);
  }

  SUBCASE("observations present: filtered variance never exceeds the prior's") {
    Rng rng(3);
    Eigen::VectorXd obs_v = rng.normal_vector(12);
    Eigen::VectorXd obs_t = rng.normal_vector(8);
    StepFlags flags;
    flags.cm_active = true;
    FilterState s = m.filter_step(prev, &obs_v, &obs_t, action, flags);
    CHECK((s.z_V.variance().array() <= s.z_trans_V.variance().array() + 1e-15).all());
    CHECK((s.z_T.variance().array() <= s.z_trans_T.variance().array() + 1e-15).all());
    CHECK((s.y_V.variance().array() <= s.y_pred_V.variance().array() + 1e-15).all());
    CHECK((s.y_T.variance().array() <= s.y_pred_T.variance().array() + 1e-15).all());
    // fusion-ordering invariant in precision form
    CHECK((s.y_V.variance().array().inverse() >=
           s.y_pred_V.variance().array().inverse() - 1e-12)
              .all());
  }
}

TEST_CASE("filter_rollout: prefix consistency and single-step equivalence") {
  CmlfModel m(small_config(Variant::w_cm), 29);
  sim::Trajectory traj = small_trajectory(5, 71);

  auto states = m.filter_rollout(traj, true);
  CHECK(states.size() == 20);

  // H=1 rollout equals one filter_step from the initial state
  sim::Trajectory one = traj;
  one.actions.resize(1);
  one.obs_visual = traj.obs_visual.leftCols(1);
  one.obs_tactile = traj.obs_tactile.leftCols(1);
  one.pose_gt = traj.pose_gt.leftCols(1);
  one.visual_present = traj.visual_present.head(1);
  one.tactile_present = traj.tactile_present.head(1);
  auto single = m.filter_rollout(one, true);
  Eigen::VectorXd obs_v = traj.obs_visual.col(0);
  Eigen::VectorXd obs_t = traj.obs_tactile.col(0);
  StepFlags flags;
  flags.cm_active = true;
  FilterState stepped = m.filter_step(m.initial_state(), &obs_v, &obs_t, traj.actions[0], flags);
  CHECK(same_gaussian(single[0].z_V, stepped.z_V));
  CHECK(same_gaussian(single[0].y_T, stepped.y_T));
  CHECK(same_gaussian(single[0].z_V, states[0].z_V));

  // prefix consistency: a 12-step rollout equals the first 12 states
  sim::Trajectory prefix = traj;
  prefix.actions.resize(12);
  prefix.obs_visual = traj.obs_visual.leftCols(12);
  prefix.obs_tactile = traj.obs_tactile.leftCols(12);
  prefix.pose_gt = traj.pose_gt.leftCols(12);
  prefix.visual_present = traj.visual_present.head(12);
  prefix.tactile_present = traj.tactile_present.head(12);
  auto short_states = m.filter_rollout(prefix, true);
  for (int t = 0; t < 12; ++t) {
    CHECK(same_gaussian(short_states[static_cast<std::size_t>(t)].z_V,
                        states[static_cast<std::size_t>(t)].z_V));
    CHECK(same_gaussian(short_states[static_cast<std::size_t>(t)].y_T,
                        states[static_cast<std::size_t>(t)].y_T));
  }
}

TEST_CASE("filter_rollout: all-finite under heavy missing-data stress") {
  CmlfModel m(small_config(Variant::w_cm), 31);
  sim::Trajectory traj = small_trajectory(9, 77, 40);
  sim::PerturbationSpec p;
  p.c = 0.35;
  p.mode = sim::CorruptionMode::missing_flag;
  sim::Trajectory corrupted = sim::perturb(traj, p, 5);
  REQUIRE(!corrupted.visual_present.all());

  auto states = m.filter_rollout(corrupted, true);
  for (const FilterState& s : states) {
    CHECK(s.z_V.mean.allFinite());
    CHECK(s.z_T.mean.allFinite());
    CHECK(s.y_V.mean.allFinite());
    CHECK(s.y_T.mean.allFinite());
    CHECK(s.z_V.log_var.allFinite());
    // fusion ordering holds at every step of the rollout
    CHECK((s.y_V.variance().array() <= s.y_pred_V.variance().array() + 1e-15).all());
    CHECK((s.y_T.variance().array() <= s.y_pred_T.variance().array() + 1e-15).all());
    CHECK((s.z_V.variance().array() <= s.z_trans_V.variance().array() + 1e-15).all());
    CHECK((s.z_T.variance().array() <= s.z_trans_T.variance().array() + 1e-15).all());
  }
}

TEST_CASE("grid-mode ELBO gradients match finite differences") {
  // exercises the convolutional encoder/decoder, layout ops and upsampling
  sim::ObsConfig obs;
  obs.visual_mode = sim::VisualMode::grid;
  obs.grid_side = 8;
  obs.tactile_dim = 4;
  auto catalog = sim::build_catalog(sim::CatalogConfig{}, 3);
  auto actions = sim::make_action_sequence(1, 1, 6);
  sim::Trajectory traj = sim::simulate_trajectory(catalog[0], actions, obs, 5);
  traj.actions.resize(2);
  traj.obs_visual = traj.obs_visual.leftCols(2).eval();
  traj.obs_tactile = traj.obs_tactile.leftCols(2).eval();
  traj.pose_gt = traj.pose_gt.leftCols(2).eval();
  traj.visual_present = traj.visual_present.head(2).eval();
  traj.tactile_present = traj.tactile_present.head(2).eval();
  Batch batch = Batch::from_trajectories({&traj});

  ModelConfig c;
  c.variant = Variant::wo_cm;
  c.n_z = 2;
  c.n_y = 2;
  c.hidden = 3;
  c.lstm_hidden = 3;
  c.conv_channels1 = 2;
  c.conv_channels2 = 2;
  c.visual_mode = sim::VisualMode::grid;
  c.grid_side = 8;
  c.tactile_dim = 4;
  c.object_ids = {0};
  CmlfModel m(c, 7);

  double base;
  {
    ad::Graph g;
    auto lg = cmlf::train::elbo_loss_graph(g, m, batch, 0.5, false, 3);
    base = lg.breakdown.total;
    m.params().zero_grads();
    g.backward(lg.total);
  }
  CHECK(std::isfinite(base));
  auto loss_value = [&]() {
    ad::Graph g;
    return cmlf::train::elbo_loss_graph(g, m, batch, 0.5, false, 3).breakdown.total;
  };
  const double h = 1e-5;
  Rng pick(13);
  int checked = 0;
  for (auto& [name, tensor] : m.params().map()) {
    // spot-check a few entries per tensor; the op set is FD-tested exhaustively
    for (int rep = 0; rep < 3; ++rep) {
      Eigen::Index i = static_cast<Eigen::Index>(pick.uniform_index(
          static_cast<std::uint64_t>(tensor.value.size())));
      double saved = tensor.value.data()[i];
      tensor.value.data()[i] = saved + h;
      double up = loss_value();
      tensor.value.data()[i] = saved - h;
      double down = loss_value();
      tensor.value.data()[i] = saved;
      double fd = (up - down) / (2 * h);
      double analytic = tensor.grad.data()[i];
      CHECK(std::abs(analytic - fd) <
            1e-3 * std::max({1.0, std::abs(fd), std::abs(analytic)}));
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("wo_cm: tactile beliefs bitwise invariant to zeroing the visual stream") {
  CmlfModel m(small_config(Variant::wo_cm), 37);
  sim::Trajectory traj = small_trajectory(3, 55, 30);
  sim::Trajectory blind = traj;
  blind.obs_visual.setZero();

  auto a = m.filter_rollout(traj, false);
  auto b = m.filter_rollout(blind, false);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(same_gaussian(a[t].z_T, b[t].z_T));
    CHECK(same_gaussian(a[t].y_T, b[t].y_T));
    CHECK((a[t].carry_T.h - b[t].carry_T.h).cwiseAbs().maxCoeff() == 0.0);
  }
  // the visual side, of course, changes
  CHECK(!same_gaussian(a.back().z_V, b.back().z_V));
}

TEST_CASE("gating invariant: w_cm with the gate off matches wo_cm bitwise") {
  // identical init seed: shared parameter names draw identical weights
  CmlfModel wcm(small_config(Variant::w_cm), 41);
  CmlfModel wocm(small_config(Variant::wo_cm), 41);
  sim::Trajectory traj = small_trajectory(7, 91, 25);

  auto a = wcm.filter_rollout(traj, false);
  auto b = wocm.filter_rollout(traj, false);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(same_gaussian(a[t].z_V, b[t].z_V));
    CHECK(same_gaussian(a[t].z_T, b[t].z_T));
    CHECK(same_gaussian(a[t].y_V, b[t].y_V));
    CHECK(same_gaussian(a[t].y_T, b[t].y_T));
  }
  // with the gate on they diverge
  auto c = wcm.filter_rollout(traj, true);
  CHECK(!same_gaussian(c.back().y_T, b.back().y_T));
  // wo_cm rollouts never produce a non-flat cross-modal prior
  for (const FilterState& s : b) {
    CHECK(s.cm_prior_V.log_var.minCoeff() == kLogVarFlat);
    CHECK(s.cm_prior_T.log_var.minCoeff() == kLogVarFlat);
  }
}

TEST_CASE("variant structure: baseline and joint share streams") {
  sim::Trajectory traj = small_trajectory(2, 19, 15);

  SUBCASE("joint") {
    CmlfModel m(small_config(Variant::joint), 43);
    auto states = m.filter_rollout(traj, false);
    for (const FilterState& s : states) {
      CHECK(same_gaussian(s.z_V, s.z_T));
      CHECK(same_gaussian(s.y_V, s.y_T));
    }
    CHECK(states.back().z_V.dim() == 5);
  }

  SUBCASE("baseline") {
    CmlfModel m(small_config(Variant::baseline), 43);
    auto states = m.filter_rollout(traj, false);
    for (const FilterState& s : states) {
      CHECK(same_gaussian(s.z_V, s.z_T));
      CHECK(same_gaussian(s.y_V, s.y_T));
      CHECK(s.z_V.dim() == 9);  // n_z + n_y
      CHECK(s.y_V.dim() == 4);
    }
  }
}

TEST_CASE("grid-mode encoder/decoder round shapes") {
  ModelConfig c = small_config(Variant::w_cm);
  c.visual_mode = sim::VisualMode::grid;
  c.grid_side = 8;
  c.conv_channels1 = 3;
  c.conv_channels2 = 4;
  CmlfModel m(c, 47);

  Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(64, -1.0, 1.0);
  DiagonalGaussian enc = m.encode_measurement(obs, Modality::visual);
  CHECK(enc.dim() == 5);
  CHECK(enc.mean.allFinite());

  Eigen::VectorXd rec = m.decode(Eigen::VectorXd::Constant(5, 0.1), Modality::visual);
  CHECK(rec.size() == 64);
  CHECK(rec.allFinite());
}

TEST_CASE("checkpoint: bit-exact round trip") {
  ModelConfig c = small_config(Variant::w_cm);
  CmlfModel m(c, 53);
  sim::Trajectory traj = small_trajectory(4, 61, 10);
  auto before = m.filter_rollout(traj, true);

  auto path = std::filesystem::temp_directory_path() / "cmlf_test_checkpoint.bin";
  CheckpointMeta meta;
  meta.epoch = 7;
  meta.train_seed = 99;
  meta.init_seed = 53;
  meta.note = "test";
  save_checkpoint(m, meta, path);

  LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta.epoch == 7);
  CHECK(loaded.config.variant == Variant::w_cm);
  for (const auto& [name, tensor] : m.params().map()) {
    const auto& other = loaded.model.params().at(name);
    CHECK(std::memcmp(tensor.value.data(), other.value.data(),
                      sizeof(double) * static_cast<std::size_t>(tensor.value.size())) == 0);
  }
  auto after = loaded.model.filter_rollout(traj, true);
  for (std::size_t t = 0; t < before.size(); ++t)
    CHECK(same_gaussian(before[t].z_V, after[t].z_V));
  std::filesystem::remove(path);
}
