#include "doctest.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "cmlf/core/metrics.hpp"
#include "cmlf/sim/dataset.hpp"

using namespace cmlf;
using namespace cmlf::sim;

namespace {

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

ObsConfig vector_obs() {
  ObsConfig obs;
  obs.visual_mode = VisualMode::vector;
  obs.visual_dim = 32;
  return obs;
}

}  // namespace

TEST_CASE("build_catalog: 75 aligned objects with causal pairings") {
  CatalogConfig config;
  auto catalog = build_catalog(config, 7);
  CHECK(catalog.size() == 75);

  Eigen::VectorXd heights(75), masses(75);
  for (int i = 0; i < 75; ++i) {
    const ObjectSpec& o = catalog[static_cast<std::size_t>(i)];
    CHECK(!violates_alignment(o, config));
    CHECK(!o.surprise_flag);
    CHECK(o.stiffness() ==
          config.stiffness_by_shape[static_cast<std::size_t>(o.shape_code())]);
    CHECK(o.friction_coeff() ==
          config.friction_by_texture[static_cast<std::size_t>(o.visual_texture_code())]);
    heights[i] = o.height();
    masses[i] = o.mass();
  }
  // Pearson correlation between height and mass > 0.9
  double hm = heights.mean(), mm = masses.mean();
  double cov = ((heights.array() - hm) * (masses.array() - mm)).mean();
  double corr = cov / (std::sqrt((heights.array() - hm).square().mean()) *
                       std::sqrt((masses.array() - mm).square().mean()));
  CHECK(corr > 0.9);

  // deterministic under seed
  auto again = build_catalog(config, 7);
  for (int i = 0; i < 75; ++i)
    CHECK(again[static_cast<std::size_t>(i)].mass() == catalog[static_cast<std::size_t>(i)].mass());
  auto other_seed = build_catalog(config, 8);
  bool any_diff = false;
  for (int i = 0; i < 75; ++i)
    any_diff = any_diff ||
               other_seed[static_cast<std::size_t>(i)].mass() != catalog[static_cast<std::size_t>(i)].mass();
  CHECK(any_diff);
}

TEST_CASE("build_catalog: single-cell config and empty config") {
  CatalogConfig tiny;
  tiny.heights = {0.15};
  tiny.stiffness_by_shape = {9.0};
  tiny.friction_by_texture = {0.35};
  tiny.base_mass_by_height = {0.6};
  auto catalog = build_catalog(tiny, 1);
  CHECK(catalog.size() == 1);
  CHECK(!violates_alignment(catalog[0], tiny));

  CatalogConfig empty;
  empty.heights.clear();
  CHECK_THROWS_AS(build_catalog(empty, 1), ConfigError);
}

TEST_CASE("surprise catalog: six objects, each violating a pairing") {
  CatalogConfig config;
  auto surprise = build_surprise_catalog(config, 7);
  CHECK(surprise.size() == 6);
  for (const ObjectSpec& o : surprise) {
    CHECK(o.surprise_flag);
    CHECK(violates_alignment(o, config));
  }
  // stiffer cylinder / softer hexagonal prism
  CHECK(surprise[0].shape_code() == 0);
  CHECK(surprise[0].stiffness() == config.stiffness_by_shape.back());
  CHECK(surprise[1].shape_code() == 4);
  CHECK(surprise[1].stiffness() == config.stiffness_by_shape.front());
  // low-friction dark / high-friction light
  CHECK(surprise[2].visual_texture_code() == 4);
  CHECK(surprise[2].friction_coeff() == config.friction_by_texture.front());
  CHECK(surprise[3].visual_texture_code() == 0);
  CHECK(surprise[3].friction_coeff() == config.friction_by_texture.back());
  // short-heavy / tall-light
  CHECK(surprise[4].height() == config.heights.front());
  CHECK(surprise[4].mass() >= config.base_mass_by_height.back());
  CHECK(surprise[5].height() == config.heights.back());
  CHECK(surprise[5].mass() <= config.base_mass_by_height.front());
}

TEST_CASE("desk subsample covers every property value") {
  auto full = build_catalog(CatalogConfig{}, 3);
  auto desk = desk_subsample(full);
  CHECK(desk.size() == 12);
  std::set<int> shapes, textures;
  std::set<double> heights;
  std::set<int> indices;
  for (const ObjectSpec& o : desk) {
    shapes.insert(o.shape_code());
    textures.insert(o.visual_texture_code());
    heights.insert(o.height());
    indices.insert(o.object_index);
  }
  CHECK(shapes.size() == 5);
  CHECK(textures.size() == 5);
  CHECK(heights.size() == 3);
  CHECK(indices.size() == 12);
}

TEST_CASE("make_action_sequence: phase gating and grip monotonicity") {
  auto actions = make_action_sequence(0, 0, 90);
  CHECK(actions.size() == 90);
  for (const Action& a : actions) {
    if (a.phase != Phase::lift) CHECK(a.v_z == 0.0);
    if (a.phase != Phase::rotate) CHECK(a.v_beta == 0.0);
    CHECK(std::abs(a.v_z) <= kSpeedMax);
    CHECK(std::abs(a.v_beta) <= kOmegaMax);
    CHECK(a.d >= 0.0);
  }

  // 4x4 grid gives 16 distinct sequences
  std::set<std::string> signatures;
  for (int g = 0; g < 4; ++g)
    for (int s = 0; s < 4; ++s) {
      std::string sig;
      for (const Action& a : make_action_sequence(g, s, 90))
        sig += std::to_string(a.d) + "," + std::to_string(a.v_z) + "," + std::to_string(a.v_beta) + ";";
      signatures.insert(sig);
    }
  CHECK(signatures.size() == 16);

  // higher grip level -> strictly smaller commanded d during grasp
  auto soft = make_action_sequence(0, 1, 90);
  auto hard = make_action_sequence(3, 1, 90);
  int grasp_steps = 0;
  for (std::size_t i = 0; i < soft.size(); ++i) {
    if (soft[i].phase == Phase::grasp) {
      CHECK(hard[i].d < soft[i].d);
      ++grasp_steps;
    }
  }
  CHECK(grasp_steps > 0);

  CHECK_THROWS_AS(make_action_sequence(0, 0, 4), ConfigError);
  CHECK_THROWS_AS(make_action_sequence(5, 0, 90), ConfigError);
}

TEST_CASE("simulate_trajectory: determinism and kinematics") {
  auto catalog = build_catalog(CatalogConfig{}, 11);
  const ObjectSpec& obj = catalog[20];
  auto actions = make_action_sequence(2, 1, 90);
  ObsConfig obs = vector_obs();

  Trajectory a = simulate_trajectory(obj, actions, obs, 5);
  Trajectory b = simulate_trajectory(obj, actions, obs, 5);
  CHECK(bitwise_equal(a.obs_visual, b.obs_visual));
  CHECK(bitwise_equal(a.obs_tactile, b.obs_tactile));
  CHECK(bitwise_equal(a.pose_gt, b.pose_gt));

  Trajectory c = simulate_trajectory(obj, actions, obs, 6);
  CHECK(!bitwise_equal(a.obs_visual, c.obs_visual));

  CHECK(a.obs_visual.allFinite());
  CHECK(a.obs_tactile.allFinite());

  // zero-velocity actions: pose constant throughout
  std::vector<Action> still = actions;
  for (Action& act : still) {
    act.v_z = 0.0;
    act.v_beta = 0.0;
  }
  Trajectory d = simulate_trajectory(obj, still, obs, 5);
  for (int t = 1; t < d.horizon(); ++t) CHECK((d.pose_gt.col(t) - d.pose_gt.col(0)).norm() == 0.0);

  // lift raises z, rotation accumulates about y
  int last = a.horizon() - 1;
  CHECK(a.pose_gt(2, last) > a.pose_gt(2, 0));
  CHECK(a.pose_gt(4, last) > 0.0);
}

TEST_CASE("simulate_trajectory: stiffness contrast confined to contact phases") {
  CatalogConfig config;
  auto actions = make_action_sequence(3, 1, 90);
  ObsConfig obs = vector_obs();

  ObjectSpec soft, stiff;
  soft.object_index = 0;
  soft.props.shape_code = 2;
  soft.props.height = 0.15;
  soft.props.visual_texture_code = 2;
  soft.props.stiffness = 3.0;
  soft.props.friction_coeff = 0.35;
  soft.props.mass = 0.6;
  stiff = soft;
  stiff.props.stiffness = 25.0;

  Trajectory ts = simulate_trajectory(soft, actions, obs, 9);
  Trajectory tf = simulate_trajectory(stiff, actions, obs, 9);

  int first_grasp = 0;
  while (actions[static_cast<std::size_t>(first_grasp)].phase == Phase::palpate) ++first_grasp;

  // pre-grasp frames identical (bitwise: same seed, no contact yet)
  for (int t = 0; t < first_grasp; ++t) {
    CHECK((ts.obs_visual.col(t) - tf.obs_visual.col(t)).norm() == 0.0);
    CHECK((ts.obs_tactile.col(t) - tf.obs_tactile.col(t)).norm() == 0.0);
  }

  // grasp phase: tactile and rendered deformation differ
  double tactile_diff = 0.0, visual_diff = 0.0;
  for (int t = first_grasp; t < ts.horizon(); ++t) {
    if (actions[static_cast<std::size_t>(t)].phase == Phase::grasp) {
      tactile_diff += (ts.obs_tactile.col(t) - tf.obs_tactile.col(t)).norm();
      visual_diff += (ts.obs_visual.col(t) - tf.obs_visual.col(t)).norm();
    }
  }
  CHECK(tactile_diff > 1e-3);
  CHECK(visual_diff > 1e-3);
}

TEST_CASE("simulate_trajectory: tactile invariant to visual texture before lift") {
  CatalogConfig config;
  auto aligned = build_catalog(config, 13);
  // same shape/height, different texture (and thus friction)
  const ObjectSpec& a = aligned[0];
  ObjectSpec b = a;
  b.props.visual_texture_code = 4;
  b.props.friction_coeff = config.friction_by_texture.back();

  auto actions = make_action_sequence(1, 2, 90);
  ObsConfig obs = vector_obs();
  Trajectory ta = simulate_trajectory(a, actions, obs, 21);
  Trajectory tb = simulate_trajectory(b, actions, obs, 21);

  for (int t = 0; t < ta.horizon(); ++t) {
    if (actions[static_cast<std::size_t>(t)].phase == Phase::palpate ||
        actions[static_cast<std::size_t>(t)].phase == Phase::grasp) {
      CHECK((ta.obs_tactile.col(t) - tb.obs_tactile.col(t)).norm() == 0.0);
    }
  }
  // ...but the visual stream differs immediately
  CHECK((ta.obs_visual.col(0) - tb.obs_visual.col(0)).norm() > 1e-6);
}

TEST_CASE("grid renderer: shapes render distinctly and deform under grasp") {
  ObsConfig obs;  // default grid mode
  auto actions = make_action_sequence(3, 0, 90);
  CatalogConfig config;
  auto catalog = build_catalog(config, 2);
  Trajectory cube = simulate_trajectory(catalog[2 * 15], actions, obs, 3);   // shape 2
  Trajectory cyl = simulate_trajectory(catalog[0], actions, obs, 3);         // shape 0
  CHECK(cube.obs_visual.rows() == 32 * 32);
  CHECK((cube.obs_visual.col(0) - cyl.obs_visual.col(0)).norm() > 1e-3);

  // grasp squashes the rendered silhouette: image changes between
  // pre-grasp and post-grasp even though the pose is unchanged until lift
  int pre = 0, post = 0;
  for (int t = 0; t < cube.horizon(); ++t) {
    if (actions[static_cast<std::size_t>(t)].phase == Phase::palpate) pre = t;
    if (actions[static_cast<std::size_t>(t)].phase == Phase::grasp) post = t;
  }
  CHECK((cube.obs_visual.col(post) - cube.obs_visual.col(pre)).norm() > 1e-3);
}

TEST_CASE("perturb: identity at sigma=0, c=0 and exact statistics otherwise") {
  auto catalog = build_catalog(CatalogConfig{}, 5);
  auto actions = make_action_sequence(1, 1, 90);
  ObsConfig obs = vector_obs();
  obs.sensor_noise = 0.0;
  Trajectory clean = simulate_trajectory(catalog[7], actions, obs, 17);

  SUBCASE("identity") {
    Trajectory same = perturb(clean, PerturbationSpec{}, 99);
    CHECK(bitwise_equal(same.obs_visual, clean.obs_visual));
    CHECK(bitwise_equal(same.obs_tactile, clean.obs_tactile));
    CHECK((same.visual_present == clean.visual_present).all());
  }

  SUBCASE("noise std within 2% of sigma") {
    PerturbationSpec p;
    p.sigma = 0.2;
    double sum2 = 0.0;
    long n = 0;
    for (int rep = 0; rep < 30; ++rep) {
      Trajectory noisy = perturb(clean, p, static_cast<std::uint64_t>(rep));
      sum2 += (noisy.obs_visual - clean.obs_visual).array().square().sum();
      sum2 += (noisy.obs_tactile - clean.obs_tactile).array().square().sum();
      n += clean.obs_visual.size() + clean.obs_tactile.size();
    }
    CHECK(n >= 100000);
    double std_hat = std::sqrt(sum2 / static_cast<double>(n));
    CHECK(std::abs(std_hat - 0.2) < 0.004);
  }

  SUBCASE("dropout rate within binomial CI at c=0.35") {
    PerturbationSpec p;
    p.c = 0.35;
    p.mode = CorruptionMode::missing_flag;
    long dropped = 0, total = 0;
    for (int rep = 0; rep < 200; ++rep) {
      Trajectory corrupted = perturb(clean, p, static_cast<std::uint64_t>(1000 + rep));
      for (int t = 0; t < corrupted.horizon(); ++t) {
        dropped += corrupted.visual_present[t] ? 0 : 1;
        dropped += corrupted.tactile_present[t] ? 0 : 1;
        total += 2;
      }
    }
    double rate = static_cast<double>(dropped) / static_cast<double>(total);
    double sigma3 = 3.0 * std::sqrt(0.35 * 0.65 / static_cast<double>(total));
    CHECK(std::abs(rate - 0.35) < sigma3);
  }

  SUBCASE("zero_fill keeps frames present, missing_flag marks them") {
    PerturbationSpec pz;
    pz.c = 0.5;
    Trajectory z = perturb(clean, pz, 7);
    CHECK(z.visual_present.all());
    int zero_cols = 0;
    for (int t = 0; t < z.horizon(); ++t)
      if (z.obs_visual.col(t).norm() == 0.0) ++zero_cols;
    CHECK(zero_cols > 10);

    PerturbationSpec pm = pz;
    pm.mode = CorruptionMode::missing_flag;
    Trajectory m = perturb(clean, pm, 7);
    CHECK(!m.visual_present.all());
  }

  SUBCASE("ground truth and actions untouched") {
    PerturbationSpec p;
    p.sigma = 0.4;
    p.c = 0.35;
    Trajectory noisy = perturb(clean, p, 5);
    CHECK(bitwise_equal(noisy.pose_gt, clean.pose_gt));
    CHECK(noisy.actions.size() == clean.actions.size());
    for (std::size_t i = 0; i < clean.actions.size(); ++i)
      CHECK(noisy.actions[i].d == clean.actions[i].d);
  }
}

TEST_CASE("dataset: generation counts, splits, and round trip") {
  DatasetConfig config = desk_config(31);
  Dataset ds = generate_dataset(config);
  CHECK(ds.catalog.size() == 12);
  CHECK(ds.trajectories.size() == 96);  // 12 objects x 4 configs x 2 repeats
  CHECK(ds.splits.train.size() + ds.splits.val.size() + ds.splits.test.size() == 96);
  CHECK(ds.splits.val.size() == 12);
  CHECK(ds.splits.test.size() == 12);

  // every object appears in the training split (hierarchical prior coverage)
  std::set<int> train_objects;
  for (int idx : ds.splits.train)
    train_objects.insert(ds.trajectory(idx).object.object_index);
  CHECK(train_objects.size() == 12);

  auto dir = std::filesystem::temp_directory_path() / "cmlf_test_dataset";
  std::filesystem::remove_all(dir);
  export_dataset(ds, dir);
  Dataset loaded = load_dataset(dir);
  CHECK(loaded.trajectories.size() == ds.trajectories.size());
  CHECK(loaded.splits.train == ds.splits.train);
  CHECK(loaded.splits.val == ds.splits.val);
  CHECK(loaded.splits.test == ds.splits.test);
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& a = ds.trajectories[i];
    const Trajectory& b = loaded.trajectories[i];
    CHECK(bitwise_equal(a.obs_visual, b.obs_visual));
    CHECK(bitwise_equal(a.obs_tactile, b.obs_tactile));
    CHECK(bitwise_equal(a.pose_gt, b.pose_gt));
    CHECK(a.object.object_index == b.object.object_index);
    CHECK(a.object.mass() == b.object.mass());
    CHECK(a.seed == b.seed);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset: full catalog with the 4x4 grid yields 3600 trajectories") {
  DatasetConfig config;
  config.object_set = ObjectSet::aligned_full;  // 75 objects
  config.interaction_configs.clear();           // full 4x4 grid
  config.repeats = 3;
  config.horizon = 6;  // count structure only; keep simulation cheap
  config.obs.visual_mode = VisualMode::vector;
  config.obs.visual_dim = 4;
  config.obs.tactile_dim = 4;
  config.seed = 9;
  Dataset ds = generate_dataset(config);
  CHECK(ds.catalog.size() == 75);
  CHECK(ds.config.effective_configs().size() == 16);
  CHECK(ds.trajectories.size() == 3600);
}

TEST_CASE("dataset: surprise set is evaluation-only") {
  Dataset ds = generate_dataset(desk_surprise_config(31));
  CHECK(ds.catalog.size() == 6);
  CHECK(ds.trajectories.size() == 48);
  CHECK(ds.splits.train.empty());
  CHECK(ds.splits.val.empty());
  CHECK(ds.splits.test.size() == 48);
}

TEST_CASE("dataset: corrupt manifest errors name the missing field") {
  Dataset ds = generate_dataset(desk_surprise_config(31));
  auto dir = std::filesystem::temp_directory_path() / "cmlf_test_manifest";
  std::filesystem::remove_all(dir);
  export_dataset(ds, dir);

  // strip a field from the manifest
  std::ifstream in(dir / "manifest.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  auto pos = text.find("\"horizon\"");
  REQUIRE(pos != std::string::npos);
  auto end = text.find(',', pos);
  text.erase(pos, end - pos + 1);
  std::ofstream out(dir / "manifest.json");
  out << text;
  out.close();

  try {
    load_dataset(dir);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("horizon") != std::string::npos);
  }
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(load_dataset("/nonexistent/path"), IoError);
}
