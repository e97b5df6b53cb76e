#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "cmlf/core/rng.hpp"
#include "cmlf/eval/evaluate.hpp"
#include "cmlf/eval/report.hpp"

using namespace cmlf;
using namespace cmlf::eval;

TEST_CASE("student_t_cdf: closed-form checks") {
  // dof 1 is the Cauchy distribution: F(t) = 1/2 + atan(t)/pi
  CHECK(student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5));
  // dof 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2))
  CHECK(student_t_cdf(1.0, 2.0) == doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-10));
  // symmetry
  CHECK(student_t_cdf(-1.7, 7.0) == doctest::Approx(1.0 - student_t_cdf(1.7, 7.0)).epsilon(1e-12));
  // converges to the normal for large dof
  CHECK(student_t_cdf(1.959963985, 100000.0) == doctest::Approx(0.975).epsilon(1e-4));
}

TEST_CASE("paired_t_test: fixtures") {
  SUBCASE("identical columns give p = 1") {
    Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    TestResult r = paired_t_test(a, a);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("constant shift with tiny noise is overwhelming evidence") {
    Rng rng(5);
    Eigen::VectorXd a(20), b(20);
    for (int i = 0; i < 20; ++i) {
      a[i] = rng.normal();
      b[i] = a[i] + 1.0 + 1e-4 * rng.normal();
    }
    TestResult r = paired_t_test(a, b);
    CHECK(r.p_value < 1e-6);
    // one-sided directions
    CHECK(paired_t_test(a, b, Alternative::less).p_value < 1e-6);
    CHECK(paired_t_test(a, b, Alternative::greater).p_value > 0.999);
  }
  SUBCASE("unequal pairing is a contract violation") {
    CHECK_THROWS_AS(paired_t_test(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(6)),
                    ContractError);
  }
}

TEST_CASE("holm_bonferroni: hand-computed step-down and properties") {
  auto adjusted = holm_bonferroni({0.01, 0.02, 0.04});
  CHECK(adjusted[0] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(adjusted[1] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(adjusted[2] == doctest::Approx(0.04).epsilon(1e-12));

  Rng rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t m = 1 + rng.uniform_index(8);
    std::vector<double> raw;
    for (std::size_t i = 0; i < m; ++i) raw.push_back(rng.uniform());
    auto adj = holm_bonferroni(raw);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(adj[i] >= raw[i]);
      CHECK(adj[i] <= 1.0);
    }
    // monotone in raw-p rank order
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return raw[i] < raw[j]; });
    for (std::size_t k = 1; k < m; ++k) CHECK(adj[order[k]] >= adj[order[k - 1]] - 1e-15);
  }

  CHECK(std::string(significance_stars(0.0005)) == "***");
  CHECK(std::string(significance_stars(0.005)) == "**");
  CHECK(std::string(significance_stars(0.03)) == "*");
  CHECK(std::string(significance_stars(0.2)) == "ns");
}

TEST_CASE("KernelRidge: recovers a smooth map and honors the ridge") {
  Rng rng(17);
  const int n = 120, d = 4;
  Eigen::MatrixXd X(n, d);
  Eigen::MatrixXd Y(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    Y(i, 0) = 2.0 * X(i, 0) - X(i, 1);      // linear map
    Y(i, 1) = 0.5 * X(i, 2) + 0.3 * X(i, 3);
  }

  KernelRidge krr;
  KernelRidge::Options options;
  options.seed = 3;
  krr.fit(X.topRows(100), Y.topRows(100), options);
  CHECK(krr.fitted());

  // held-out R^2 > 0.99 on the linear fixture
  Eigen::MatrixXd pred = krr.predict(X.bottomRows(20));
  double ss_res = (pred - Y.bottomRows(20)).squaredNorm();
  double ss_tot = (Y.bottomRows(20).rowwise() - Y.topRows(100).colwise().mean()).squaredNorm();
  CHECK(1.0 - ss_res / ss_tot > 0.99);

  // training residual is never exactly zero for ridge > 0
  Eigen::MatrixXd train_pred = krr.predict(X.topRows(100));
  CHECK((train_pred - Y.topRows(100)).norm() > 0.0);
  CHECK(krr.ridge() > 0.0);

  CHECK_THROWS_AS(krr.predict(Eigen::MatrixXd::Zero(3, d + 1)), ContractError);
  KernelRidge tiny;
  CHECK_THROWS_AS(tiny.fit(Eigen::MatrixXd::Zero(5, 2), Eigen::MatrixXd::Zero(5, 1), options),
                  ContractError);
}

TEST_CASE("LogisticClassifier: separable data and chance level") {
  Rng rng(23);
  SUBCASE("separable clusters are classified") {
    const int per_class = 30;
    Eigen::MatrixXd X(3 * per_class, 2);
    std::vector<int> labels;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < per_class; ++i) {
        int row = c * per_class + i;
        X(row, 0) = 3.0 * c + 0.3 * rng.normal();
        X(row, 1) = -2.0 * c + 0.3 * rng.normal();
        labels.push_back(c);
      }
    LogisticClassifier clf;
    clf.fit(X, labels, 3);
    CHECK(clf.accuracy(X, labels) > 0.95);
  }

  SUBCASE("random-noise features score near chance under CV") {
    const int n_classes = 4, per_class = 20;
    Eigen::MatrixXd X(n_classes * per_class, 6);
    std::vector<int> labels;
    std::vector<std::int64_t> keys;
    for (int c = 0; c < n_classes; ++c)
      for (int i = 0; i < per_class; ++i) {
        int row = c * per_class + i;
        for (int j = 0; j < 6; ++j) X(row, j) = rng.normal();
        labels.push_back(c);
        keys.push_back(row);
      }
    CvAccuracy acc = cross_validated_accuracy(X, labels, n_classes, 5, 7, keys);
    double chance = 1.0 / n_classes;
    double sigma3 = 3.0 * std::sqrt(chance * (1 - chance) / (n_classes * per_class));
    CHECK(std::abs(acc.mean - chance) < sigma3 + 0.05);
  }

  SUBCASE("fold assignment invariant to row permutation") {
    const int n_classes = 3, per_class = 10;
    Eigen::MatrixXd X(n_classes * per_class, 3);
    std::vector<int> labels;
    std::vector<std::int64_t> keys;
    for (int c = 0; c < n_classes; ++c)
      for (int i = 0; i < per_class; ++i) {
        int row = c * per_class + i;
        X(row, 0) = c + 0.2 * rng.normal();
        X(row, 1) = rng.normal();
        X(row, 2) = -c + 0.2 * rng.normal();
        labels.push_back(c);
        keys.push_back(1000 * c + i);  // stable identity
      }
    CvAccuracy base = cross_validated_accuracy(X, labels, n_classes, 5, 11, keys);

    // reverse the row order; stable keys keep the fold structure
    Eigen::MatrixXd Xr = X.colwise().reverse();
    std::vector<int> labels_r(labels.rbegin(), labels.rend());
    std::vector<std::int64_t> keys_r(keys.rbegin(), keys.rend());
    CvAccuracy permuted = cross_validated_accuracy(Xr, labels_r, n_classes, 5, 11, keys_r);
    CHECK(base.mean == doctest::Approx(permuted.mean).epsilon(1e-12));
  }

  SUBCASE("a class with too few samples is a stratification error") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(8, 2);
    std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1};  // class 1 has 3 < 5
    std::vector<std::int64_t> keys{0, 1, 2, 3, 4, 5, 6, 7};
    CHECK_THROWS_AS(cross_validated_accuracy(X, labels, 2, 5, 3, keys), ContractError);
  }
}

TEST_CASE("paired_tests: family handling") {
  Rng rng(31);
  Eigen::VectorXd base(12);
  for (int i = 0; i < 12; ++i) base[i] = rng.normal();
  std::vector<MethodMetrics> family{
      {"m1", base},
      {"m2", base.array() + 0.8 + 0.01 * rng.normal()},
      {"m3", base},
  };
  auto comparisons = paired_tests(family);
  CHECK(comparisons.size() == 3);
  for (const Comparison& cmp : comparisons) {
    CHECK(cmp.adjusted_p >= cmp.raw_p - 1e-15);
    if (cmp.method_a == "m1" && cmp.method_b == "m3") CHECK(cmp.stars == "ns");
  }

  std::vector<MethodMetrics> bad{{"a", Eigen::VectorXd::Zero(5)}, {"b", Eigen::VectorXd::Zero(7)}};
  CHECK_THROWS_AS(paired_tests(bad), ContractError);
}

namespace {

// A miniature trained-free fixture: leak ground truth into fake latents
// so the alignment can be validated against a known linear map.
struct LeakFixture {
  sim::Dataset dataset;
  std::vector<LatentTrack> tracks;
};

}  // namespace

TEST_CASE("alignment machinery: leaked-latent fixture reaches R^2 > 0.99 and NMSE ~ 0") {
  // build a small dataset: latents are the ground truth plus tiny noise
  sim::DatasetConfig config;
  config.object_set = sim::ObjectSet::aligned_desk;
  config.obs.visual_mode = sim::VisualMode::vector;
  config.obs.visual_dim = 8;
  config.obs.tactile_dim = 8;
  config.interaction_configs = {{0, 0}, {2, 2}};
  config.repeats = 2;
  config.horizon = 20;
  config.seed = 4;
  sim::Dataset ds = sim::generate_dataset(config);

  Rng rng(41);
  const int n_y = 5;
  auto leak_tracks = [&](const std::vector<int>& indices) {
    std::vector<LatentTrack> tracks;
    for (int idx : indices) {
      const sim::Trajectory& t = ds.trajectory(idx);
      LatentTrack track;
      track.trajectory_index = idx;
      track.y_V.resize(n_y, t.horizon());
      track.y_T.resize(n_y, t.horizon());
      track.z_V.resize(n_y, t.horizon());
      for (int step = 0; step < t.horizon(); ++step) {
        Eigen::Vector3d ext = t.object.props.extrinsic();
        Eigen::Vector3d intr = t.object.props.intrinsic();
        track.y_V.col(step) << ext, 0.5 * ext[0] + 0.001 * rng.normal(), 0.001 * rng.normal();
        track.y_T.col(step) << intr, 0.2 * intr[2] + 0.001 * rng.normal(), 0.001 * rng.normal();
        track.z_V.col(step) << t.pose_gt.col(step).head(3),
            t.pose_gt.col(step).tail(3).sum() + 0.001 * rng.normal(), 0.001 * rng.normal();
      }
      tracks.push_back(std::move(track));
    }
    return tracks;
  };

  auto val_tracks = leak_tracks(ds.splits.val);
  const auto window = property_fit_window(20);
  CHECK(window.size() == 2);  // final 10% of 20 steps
  CHECK(window.front() == 18);

  Eigen::MatrixXd X_vy(val_tracks.size() * window.size(), n_y), Y_ext(X_vy.rows(), 3);
  Eigen::MatrixXd X_ty = X_vy, Y_int = Y_ext;
  Eigen::Index row = 0;
  for (const auto& track : val_tracks) {
    const sim::ObjectSpec& obj = ds.trajectory(track.trajectory_index).object;
    for (int t : window) {
      X_vy.row(row) = track.y_V.col(t).transpose();
      X_ty.row(row) = track.y_T.col(t).transpose();
      Y_ext.row(row) = obj.props.extrinsic().transpose();
      Y_int.row(row) = obj.props.intrinsic().transpose();
      ++row;
    }
  }
  AlignmentModel alignment;
  KernelRidge::Options options;
  options.seed = 9;
  alignment.f_V_y.fit(X_vy, Y_ext, options);
  alignment.f_T_y.fit(X_ty, Y_int, options);
  // pose regressor on full duration
  Eigen::MatrixXd X_vz(val_tracks.size() * 20, n_y), Y_pose(X_vz.rows(), 6);
  row = 0;
  for (const auto& track : val_tracks) {
    const sim::Trajectory& traj = ds.trajectory(track.trajectory_index);
    for (int t = 0; t < 20; ++t) {
      X_vz.row(row) = track.z_V.col(t).transpose();
      Y_pose.row(row) = traj.pose_gt.col(t).transpose();
      ++row;
    }
  }
  alignment.f_V_z.fit(X_vz, Y_pose, options);
  alignment.fitted = true;

  // held-out R^2 of the extrinsic regressor on test-split leaked latents
  auto test_tracks = leak_tracks(ds.splits.test);
  Eigen::MatrixXd X_test(test_tracks.size(), n_y), Y_test(test_tracks.size(), 3);
  for (std::size_t i = 0; i < test_tracks.size(); ++i) {
    X_test.row(static_cast<Eigen::Index>(i)) = test_tracks[i].y_V.col(19).transpose();
    Y_test.row(static_cast<Eigen::Index>(i)) =
        ds.trajectory(test_tracks[i].trajectory_index).object.props.extrinsic().transpose();
  }
  Eigen::MatrixXd pred = alignment.f_V_y.predict(X_test);
  double ss_res = (pred - Y_test).squaredNorm();
  double ss_tot = (Y_test.rowwise() - Y_ext.colwise().mean()).squaredNorm();
  CHECK(1.0 - ss_res / ss_tot > 0.99);
}

TEST_CASE("report: JSON serialization and figure files") {
  EvalReport report;
  report.variant = "w_cm";
  report.seed = 7;
  report.aligned.curves = Eigen::MatrixXd::Constant(kNumProperties, 10, 0.5);
  report.aligned.time_avg_mean = Eigen::VectorXd::Constant(kNumProperties, 0.5);
  report.aligned.time_avg_std = Eigen::VectorXd::Constant(kNumProperties, 0.1);
  report.aligned.per_trajectory = Eigen::MatrixXd::Constant(4, kNumProperties, 0.5);
  report.aligned.normalizers = Eigen::VectorXd::Ones(kNumProperties);
  report.classification["y_V"] = CvAccuracy{0.8, 0.05, {0.8, 0.8, 0.8, 0.75, 0.85}};
  PerturbationCell cell;
  cell.sigma = 0.2;
  cell.nmse_per_property = Eigen::VectorXd::Constant(kNumProperties, 0.6);
  report.perturbation.push_back(cell);
  Comparison cmp;
  cmp.method_a = "w_cm";
  cmp.method_b = "wo_cm";
  cmp.raw_p = 0.01;
  cmp.adjusted_p = 0.02;
  cmp.stars = "*";
  report.tests.push_back(cmp);

  auto dir = std::filesystem::temp_directory_path() / "cmlf_test_report";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  report.write_json(dir / "report.json");
  write_report_figures(report, dir);

  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "nmse_over_time.svg"));
  CHECK(std::filesystem::exists(dir / "classification.svg"));
  CHECK(std::filesystem::exists(dir / "perturbation_grid.svg"));
  CHECK(std::filesystem::file_size(dir / "nmse_over_time.svg") > 500);

  std::string text = report.to_json_string();
  CHECK(text.find("\"adjusted_p\": 0.02") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("perturbation_sweep: nominal cell is bitwise unperturbed and input is untouched") {
  sim::DatasetConfig config;
  config.object_set = sim::ObjectSet::aligned_desk;
  config.obs.visual_mode = sim::VisualMode::vector;
  config.obs.visual_dim = 8;
  config.obs.tactile_dim = 8;
  config.interaction_configs = {{1, 1}, {3, 2}};
  config.repeats = 2;
  config.horizon = 15;
  config.seed = 6;
  sim::Dataset ds = sim::generate_dataset(config);

  model::ModelConfig mc;
  mc.variant = model::Variant::wo_cm;
  mc.n_z = 4;
  mc.n_y = 4;
  mc.hidden = 8;
  mc.lstm_hidden = 6;
  mc.visual_mode = sim::VisualMode::vector;
  mc.visual_dim = 8;
  mc.tactile_dim = 8;
  mc.object_ids = {0, 1};
  model::CmlfModel m(mc, 3);

  AlignmentModel alignment = fit_alignment(m, ds, 5);
  CHECK(alignment.fitted);

  Eigen::MatrixXd obs_before = ds.trajectory(ds.splits.test[0]).obs_visual;
  auto cells = perturbation_sweep(m, alignment, ds, ds.splits.test, 11,
                                  {{0.0, 0.0}, {0.2, 0.0}});
  REQUIRE(cells.size() == 2);

  // dataset not mutated by the sweep
  CHECK((ds.trajectory(ds.splits.test[0]).obs_visual - obs_before).norm() == 0.0);

  // nominal cell equals a direct evaluation bitwise
  NmseCurves direct = property_nmse_curves(m, alignment, ds, ds.splits.test);
  CHECK((cells[0].nmse_per_property - direct.time_avg_mean).cwiseAbs().maxCoeff() == 0.0);
  // noise strictly changes something
  CHECK((cells[1].nmse_per_property - cells[0].nmse_per_property).cwiseAbs().maxCoeff() > 0.0);
}
