#include "cmlf/cli/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>

#include "json.hpp"

#include "cmlf/core/rng.hpp"
#include "cmlf/eval/figures.hpp"
#include "cmlf/version.hpp"

namespace cmlf::cli {

using nlohmann::json;
using model::Variant;

namespace {

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["data_seed"] = c.data_seed;
  j["full_catalog"] = c.full_catalog;
  j["horizon"] = c.horizon;
  j["repeats"] = c.repeats;
  j["visual_mode"] = static_cast<int>(c.visual_mode);
  j["visual_dim"] = c.visual_dim;
  j["grid_side"] = c.grid_side;
  j["tactile_dim"] = c.tactile_dim;
  j["n_z"] = c.n_z;
  j["n_y"] = c.n_y;
  j["hidden"] = c.hidden;
  j["lstm_hidden"] = c.lstm_hidden;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["anneal_fraction"] = c.anneal_fraction;
  j["beta_max"] = c.beta_max;
  j["cm_late_fraction"] = c.cm_late_fraction;
  j["cm_early_fraction"] = c.cm_early_fraction;
  j["train_seed"] = c.train_seed;
  j["band_scale"] = c.band_scale;
  j["figures"] = c.figures;
  j["with_early"] = c.with_early;
  return j;
}

template <typename T>
void read_field(const json& j, const char* name, T& out) {
  if (j.contains(name)) out = j.at(name).get<T>();
}

}  // namespace

std::string ExperimentConfig::to_json_string() const { return config_to_json(*this).dump(2); }

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed experiment config: ") + e.what());
  }
  ExperimentConfig c;
  read_field(j, "data_seed", c.data_seed);
  read_field(j, "full_catalog", c.full_catalog);
  read_field(j, "horizon", c.horizon);
  read_field(j, "repeats", c.repeats);
  int mode = static_cast<int>(c.visual_mode);
  read_field(j, "visual_mode", mode);
  c.visual_mode = static_cast<sim::VisualMode>(mode);
  read_field(j, "visual_dim", c.visual_dim);
  read_field(j, "grid_side", c.grid_side);
  read_field(j, "tactile_dim", c.tactile_dim);
  read_field(j, "n_z", c.n_z);
  read_field(j, "n_y", c.n_y);
  read_field(j, "hidden", c.hidden);
  read_field(j, "lstm_hidden", c.lstm_hidden);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "anneal_fraction", c.anneal_fraction);
  read_field(j, "beta_max", c.beta_max);
  read_field(j, "cm_late_fraction", c.cm_late_fraction);
  read_field(j, "cm_early_fraction", c.cm_early_fraction);
  read_field(j, "train_seed", c.train_seed);
  read_field(j, "band_scale", c.band_scale);
  read_field(j, "figures", c.figures);
  read_field(j, "with_early", c.with_early);
  return c;
}

RunLock::RunLock(const std::filesystem::path& run_dir) : lock_path_(run_dir / ".lock") {
  std::filesystem::create_directories(run_dir);
  int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw IoError("run directory is locked by another invocation: " + lock_path_.string());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(lock_path_, ec);
}

void prepare_run_dir(const std::filesystem::path& dir, bool overwrite) {
  if (std::filesystem::exists(dir) && !std::filesystem::is_empty(dir)) {
    if (!overwrite)
      throw ConfigError("output directory exists and is not empty (use --overwrite): " +
                        dir.string());
  }
  std::filesystem::create_directories(dir);
}

sim::DatasetConfig dataset_config_from(const ExperimentConfig& config, bool surprise) {
  sim::DatasetConfig ds;
  ds.object_set = surprise ? sim::ObjectSet::surprise
                           : (config.full_catalog ? sim::ObjectSet::aligned_full
                                                  : sim::ObjectSet::aligned_desk);
  ds.obs.visual_mode = config.visual_mode;
  ds.obs.visual_dim = config.visual_dim;
  ds.obs.grid_side = config.grid_side;
  ds.obs.tactile_dim = config.tactile_dim;
  if (!config.full_catalog) ds.interaction_configs = {{0, 0}, {1, 2}, {2, 1}, {3, 3}};
  ds.repeats = config.repeats;
  ds.horizon = config.horizon;
  ds.seed = config.data_seed;
  return ds;
}

model::ModelConfig model_config_from(const ExperimentConfig& config, Variant variant) {
  model::ModelConfig mc;
  mc.variant = variant;
  mc.n_z = config.n_z;
  mc.n_y = config.n_y;
  mc.hidden = config.hidden;
  mc.lstm_hidden = config.lstm_hidden;
  mc.visual_mode = config.visual_mode;
  mc.grid_side = config.grid_side;
  mc.visual_dim = config.visual_dim;
  mc.tactile_dim = config.tactile_dim;
  return mc;
}

train::TrainConfig train_config_from(const ExperimentConfig& config, Variant variant,
                                     double cm_fraction, std::uint64_t seed) {
  train::TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch_size;
  tc.anneal_fraction = config.anneal_fraction;
  tc.cm_activation_fraction = cm_fraction;
  tc.seed = seed;
  tc.variant = variant;
  tc.beta_max = config.beta_max;
  return tc;
}

void run_generate_data(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       bool surprise_set) {
  sim::Dataset dataset = sim::generate_dataset(dataset_config_from(config, surprise_set));
  sim::export_dataset(dataset, out_dir);
}

train::TrainResult run_train(const ExperimentConfig& config, const sim::Dataset& dataset,
                             Variant variant, double cm_fraction, std::uint64_t seed,
                             const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  train::TrainConfig tc = train_config_from(config, variant, cm_fraction, seed);
  model::ModelConfig mc = model_config_from(config, variant);
  train::TrainResult result =
      train::train(mc, tc, dataset, run_dir / "metrics.jsonl");

  model::CheckpointMeta meta;
  meta.train_seed = seed;
  meta.init_seed = derive_seed(seed, "init_root");
  meta.epoch = tc.epochs - 1;
  meta.note = result.aborted ? result.abort_reason : "final";
  save_checkpoint(result.model, meta, run_dir / "final.ckpt");
  meta.epoch = result.best_epoch;
  meta.note = "best-validation";
  save_checkpoint(result.best_model, meta, run_dir / "best.ckpt");
  return result;
}

void run_infer(const model::CmlfModel& model, const sim::Dataset& dataset,
               const std::vector<int>& indices, const sim::PerturbationSpec& perturbation,
               std::uint64_t perturb_seed, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const bool perturbed = perturbation.sigma != 0.0 || perturbation.c != 0.0;
  sim::Dataset working = dataset;
  if (perturbed) {
    for (int idx : indices)
      working.trajectories[static_cast<std::size_t>(idx)] =
          sim::perturb(dataset.trajectory(idx), perturbation, derive_seed(perturb_seed, "infer", idx));
  }
  auto tracks =
      eval::collect_latents(model, working, indices, eval::eval_cm_active(model.variant()));

  json manifest;
  manifest["version"] = version();
  manifest["variant"] = model::variant_name(model.variant());
  manifest["n_y"] = model.config().n_y;
  manifest["n_z"] = model.z_dim();
  manifest["perturbation"] = {{"sigma", perturbation.sigma},
                              {"c", perturbation.c},
                              {"mode", static_cast<int>(perturbation.mode)}};
  json entries = json::array();
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const eval::LatentTrack& track = tracks[i];
    char name[32];
    std::snprintf(name, sizeof(name), "latents_%05zu.bin", i);
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw IoError("cannot write latent archive: " + (out_dir / name).string());
    auto dump = [&out](const Eigen::MatrixXd& m) {
      std::uint32_t dims[2] = {static_cast<std::uint32_t>(m.rows()),
                               static_cast<std::uint32_t>(m.cols())};
      out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
    };
    dump(track.y_V);
    dump(track.y_T);
    dump(track.z_V);
    entries.push_back({{"file", name}, {"trajectory_index", track.trajectory_index}});
  }
  manifest["tracks"] = entries;
  std::ofstream mout(out_dir / "rollouts.json");
  mout << manifest.dump(2) << "\n";
}

eval::EvalReport run_evaluate(const model::CmlfModel& model, const sim::Dataset& aligned,
                              const sim::Dataset* surprise, std::uint64_t seed,
                              const std::filesystem::path& out_dir, bool figures,
                              double band_scale) {
  if (model.config().visual_size() != aligned.config.obs.visual_size() ||
      model.config().tactile_dim != aligned.config.obs.tactile_dim)
    throw ContractError(
        "run_evaluate: checkpoint observation dims do not match the dataset config");
  std::filesystem::create_directories(out_dir);

  eval::EvalReport report;
  report.variant = model::variant_name(model.variant());
  report.seed = seed;

  eval::AlignmentModel alignment = eval::fit_alignment(model, aligned, seed);
  report.aligned = eval::property_nmse_curves(model, alignment, aligned, aligned.splits.test);
  if (surprise != nullptr) {
    // aligned-set normalizers, so surprise curves compare on a common scale
    report.surprise = eval::property_nmse_curves(model, alignment, *surprise,
                                                 surprise->splits.test,
                                                 &report.aligned.normalizers);
  }
  for (eval::FeatureSet features :
       {eval::FeatureSet::y_V, eval::FeatureSet::y_T, eval::FeatureSet::both}) {
    std::vector<int> all;
    for (int i = 0; i < static_cast<int>(aligned.trajectories.size()); ++i) all.push_back(i);
    report.classification[eval::feature_set_name(features)] =
        eval::classify_latents(model, aligned, all, features, derive_seed(seed, "classify"));
  }
  report.perturbation =
      eval::perturbation_sweep(model, alignment, aligned, aligned.splits.test,
                               derive_seed(seed, "sweep"));

  report.write_json(out_dir / "report.json");
  if (figures) eval::write_report_figures(report, out_dir, band_scale);
  return report;
}

void evaluate_checkpoints(const std::vector<std::string>& checkpoint_paths,
                          const sim::Dataset& aligned, const sim::Dataset* surprise,
                          const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  if (checkpoint_paths.empty()) throw ConfigError("evaluate: no checkpoints given");
  if (checkpoint_paths.size() == 1) {
    auto loaded = model::load_checkpoint(checkpoint_paths.front());
    run_evaluate(loaded.model, aligned, surprise, config.train_seed, out_dir, config.figures,
                 config.band_scale);
    return;
  }
  std::vector<eval::EvalReport> reports;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < checkpoint_paths.size(); ++i) {
    auto loaded = model::load_checkpoint(checkpoint_paths[i]);
    std::string name =
        std::string(model::variant_name(loaded.config.variant)) + "_" + std::to_string(i);
    names.push_back(name);
    reports.push_back(run_evaluate(loaded.model, aligned, surprise, config.train_seed,
                                   out_dir / name, config.figures, config.band_scale));
  }
  json comparison;
  for (int p : eval::kIntrinsicProps) {
    std::vector<eval::MethodMetrics> family;
    for (std::size_t i = 0; i < reports.size(); ++i)
      family.push_back({names[i], reports[i].aligned.per_trajectory.col(p)});
    json family_json = json::array();
    for (const eval::Comparison& cmp : eval::paired_tests(family))
      family_json.push_back({{"a", cmp.method_a},
                             {"b", cmp.method_b},
                             {"raw_p", cmp.raw_p},
                             {"adjusted_p", cmp.adjusted_p},
                             {"stars", cmp.stars}});
    comparison["tests"][eval::property_names()[static_cast<std::size_t>(p)]] = family_json;
  }
  std::ofstream out(out_dir / "comparison.json");
  if (!out) throw IoError("cannot write comparison: " + (out_dir / "comparison.json").string());
  out << comparison.dump(2) << "\n";
}

ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& run_dir) {
  RunLock lock(run_dir);

  {
    std::ofstream replay(run_dir / "replay.json");
    json j = json::parse(config.to_json_string());
    j["cmlf_version"] = version();
    replay << j.dump(2) << "\n";
  }

  run_generate_data(config, run_dir / "data_aligned", false);
  run_generate_data(config, run_dir / "data_surprise", true);
  sim::Dataset aligned = sim::load_dataset(run_dir / "data_aligned");
  sim::Dataset surprise = sim::load_dataset(run_dir / "data_surprise");

  struct Job {
    std::string name;
    Variant variant;
    double cm_fraction;
  };
  std::vector<Job> jobs{{"baseline", Variant::baseline, 0.25},
                        {"joint", Variant::joint, 0.25},
                        {"wo_cm", Variant::wo_cm, 0.25},
                        {"w_cm", Variant::w_cm, config.cm_late_fraction}};
  if (config.with_early) jobs.push_back({"w_cm_early", Variant::w_cm, config.cm_early_fraction});

  ExperimentOutcome outcome;
  for (const Job& job : jobs) {
    auto model_dir = run_dir / ("model_" + job.name);
    train::TrainResult trained =
        run_train(config, aligned, job.variant, job.cm_fraction, config.train_seed, model_dir);
    eval::EvalReport report =
        run_evaluate(trained.best_model, aligned, &surprise, config.train_seed,
                     run_dir / ("eval_" + job.name), config.figures, config.band_scale);
    report.variant = job.name;
    outcome.reports.emplace(job.name, std::move(report));
  }

  // comparison: intrinsic-property NMSE per trajectory per method, one
  // paired family per property across the structured variants
  const std::vector<std::string> compared{"joint", "wo_cm", "w_cm"};
  json comparison;
  for (int p : eval::kIntrinsicProps) {
    std::vector<eval::MethodMetrics> family;
    for (const std::string& name : compared) {
      const eval::EvalReport& report = outcome.reports.at(name);
      family.push_back({name, report.aligned.per_trajectory.col(p)});
    }
    auto tests = eval::paired_tests(family);
    json family_json = json::array();
    for (const eval::Comparison& cmp : tests) {
      family_json.push_back({{"a", cmp.method_a},
                             {"b", cmp.method_b},
                             {"raw_p", cmp.raw_p},
                             {"adjusted_p", cmp.adjusted_p},
                             {"stars", cmp.stars}});
      outcome.intrinsic_tests.push_back(cmp);
    }
    comparison["tests"][eval::property_names()[static_cast<std::size_t>(p)]] = family_json;
  }
  for (const auto& [name, report] : outcome.reports) {
    comparison["time_avg_nmse"][name] = json::array();
    for (Eigen::Index p = 0; p < report.aligned.time_avg_mean.size(); ++p)
      comparison["time_avg_nmse"][name].push_back(report.aligned.time_avg_mean[p]);
  }
  std::ofstream out(run_dir / "comparison.json");
  out << comparison.dump(2) << "\n";

  if (config.figures) {
    // combined intrinsic-NMSE curves across variants (aligned and surprise)
    std::vector<eval::LineSeries> aligned_series, surprise_series;
    for (const auto& [name, report] : outcome.reports) {
      aligned_series.push_back({name, report.aligned.mean_curve(eval::kIntrinsicProps), {}});
      if (report.surprise.has_value())
        surprise_series.push_back({name, report.surprise->mean_curve(eval::kIntrinsicProps), {}});
    }
    eval::write_line_chart(run_dir / "comparison_intrinsic_nmse.svg",
                           "Intrinsic-property NMSE over time (aligned set)", "time step", "NMSE",
                           aligned_series);
    if (!surprise_series.empty())
      eval::write_line_chart(run_dir / "comparison_intrinsic_nmse_surprise.svg",
                             "Intrinsic-property NMSE over time (surprise set)", "time step",
                             "NMSE", surprise_series);
    std::vector<std::string> variant_names;
    std::vector<eval::BarGroup> groups{{"y_V", {}, {}}, {"y_T", {}, {}}, {"both", {}, {}}};
    for (const auto& [name, report] : outcome.reports) {
      variant_names.push_back(name);
      for (auto& group : groups) {
        const eval::CvAccuracy& acc = report.classification.at(group.label);
        group.values.push_back(acc.mean);
        group.errors.push_back(acc.stddev);
      }
    }
    eval::write_bar_chart(run_dir / "comparison_classification.svg",
                          "Object classification accuracy by latent feature set", variant_names,
                          groups, "accuracy");

    // aligned vs surprise mean intrinsic error per variant
    std::vector<eval::BarGroup> set_groups;
    for (const auto& [name, report] : outcome.reports) {
      if (!report.surprise.has_value()) continue;
      eval::BarGroup g{name, {}, {}};
      double aligned_mean = 0.0, aligned_std = 0.0, surprise_mean = 0.0, surprise_std = 0.0;
      for (int p : eval::kIntrinsicProps) {
        aligned_mean += report.aligned.time_avg_mean[p] / 3.0;
        aligned_std += report.aligned.time_avg_std[p] / 3.0;
        surprise_mean += report.surprise->time_avg_mean[p] / 3.0;
        surprise_std += report.surprise->time_avg_std[p] / 3.0;
      }
      g.values = {aligned_mean, surprise_mean};
      g.errors = {aligned_std, surprise_std};
      set_groups.push_back(g);
    }
    if (!set_groups.empty())
      eval::write_bar_chart(run_dir / "comparison_surprise_error.svg",
                            "Intrinsic NMSE: aligned vs surprise objects",
                            {"aligned", "surprise"}, set_groups, "NMSE");

    // delayed cross-modal activation: late vs early on the surprise set
    if (config.with_early && outcome.reports.count("w_cm") && outcome.reports.count("w_cm_early")) {
      std::vector<eval::BarGroup> timing;
      for (const char* name : {"w_cm", "w_cm_early"}) {
        const eval::EvalReport& report = outcome.reports.at(name);
        if (!report.surprise.has_value()) continue;
        eval::BarGroup g{std::string(name) == "w_cm" ? "late (25%)" : "early (10%)", {}, {}};
        double mean = 0.0, stddev = 0.0;
        for (int p : eval::kIntrinsicProps) {
          mean += report.surprise->time_avg_mean[p] / 3.0;
          stddev += report.surprise->time_avg_std[p] / 3.0;
        }
        g.values = {mean};
        g.errors = {stddev};
        timing.push_back(g);
      }
      if (timing.size() == 2)
        eval::write_bar_chart(run_dir / "comparison_activation_timing.svg",
                              "Cross-modal activation timing (surprise-set intrinsic NMSE)",
                              {"intrinsic NMSE"}, timing, "NMSE");
    }
  }
  return outcome;
}

}  // namespace cmlf::cli
