// End-to-end pipeline orchestration shared by the command-line tool and
// the acceptance suite: dataset generation, per-variant training,
// rollout archives, evaluation reports and the multi-variant comparison.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmlf/eval/report.hpp"
#include "cmlf/model/checkpoint.hpp"
#include "cmlf/train/trainer.hpp"

namespace cmlf::cli {

struct ExperimentConfig {
  // dataset
  std::uint64_t data_seed = 7;
  bool full_catalog = false;  // false: 12-object desk profile
  int horizon = 90;
  int repeats = 2;
  sim::VisualMode visual_mode = sim::VisualMode::vector;
  int visual_dim = 32;
  int grid_side = 32;
  int tactile_dim = 64;

  // model (desk-scale defaults; library defaults are n_z=32, hidden=64)
  int n_z = 16;
  int n_y = 16;
  int hidden = 32;
  int lstm_hidden = 24;

  // training
  double learning_rate = 1e-4;  // desk-scale; the full-scale default is 1e-5
  int epochs = 250;
  int batch_size = 32;
  double anneal_fraction = 0.3;
  double beta_max = 0.2;  // desk-scale ceiling; TrainConfig defaults to 1.0
  double cm_late_fraction = 0.25;
  double cm_early_fraction = 0.10;
  std::uint64_t train_seed = 1;

  // evaluation
  double band_scale = 1.0;  // 0.1 reproduces the paper's figure shading
  bool figures = true;
  bool with_early = true;  // also train the early-activation w_cm

  std::string to_json_string() const;
  static ExperimentConfig from_json_file(const std::filesystem::path& path);
};

/// RAII lock file on a run directory; a second lock attempt throws.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

/// Refuses to reuse a non-empty directory unless overwrite is set.
void prepare_run_dir(const std::filesystem::path& dir, bool overwrite);

sim::DatasetConfig dataset_config_from(const ExperimentConfig& config, bool surprise);
model::ModelConfig model_config_from(const ExperimentConfig& config, model::Variant variant);
train::TrainConfig train_config_from(const ExperimentConfig& config, model::Variant variant,
                                     double cm_fraction, std::uint64_t seed);

/// Generates and exports the aligned (and optionally surprise) datasets.
void run_generate_data(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       bool surprise_set);

/// Trains one variant on an exported dataset; writes checkpoint(s) and
/// the metric log into the run directory.
train::TrainResult run_train(const ExperimentConfig& config, const sim::Dataset& dataset,
                             model::Variant variant, double cm_fraction, std::uint64_t seed,
                             const std::filesystem::path& run_dir);

/// Filtered-belief archive for every trajectory of a split.
void run_infer(const model::CmlfModel& model, const sim::Dataset& dataset,
               const std::vector<int>& indices, const sim::PerturbationSpec& perturbation,
               std::uint64_t perturb_seed, const std::filesystem::path& out_dir);

/// Full single-model evaluation: alignment, NMSE curves (aligned +
/// optional surprise on the aligned normalizers), classification and the
/// perturbation sweep.
eval::EvalReport run_evaluate(const model::CmlfModel& model, const sim::Dataset& aligned,
                              const sim::Dataset* surprise, std::uint64_t seed,
                              const std::filesystem::path& out_dir, bool figures,
                              double band_scale);

/// Evaluates one or more checkpoints against the same datasets. A single
/// checkpoint writes its report into out_dir; several write one report
/// per model plus a pairwise paired-test table over the intrinsic
/// properties (comparison.json).
void evaluate_checkpoints(const std::vector<std::string>& checkpoint_paths,
                          const sim::Dataset& aligned, const sim::Dataset* surprise,
                          const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct ExperimentOutcome {
  std::map<std::string, eval::EvalReport> reports;  // per trained model
  std::vector<eval::Comparison> intrinsic_tests;    // w_cm vs wo_cm vs joint
};

/// The whole pipeline: data, all four variants (plus the early-activation
/// w_cm), per-model evaluation and the comparison report, all under
/// run_dir with a replay manifest.
ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& run_dir);

}  // namespace cmlf::cli
