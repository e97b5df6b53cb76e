// cmlf: generate synthetic visuo-tactile datasets, train the latent
// filter variants, run filtered inference, and evaluate.
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cmlf/cli/experiment.hpp"
#include "cmlf/version.hpp"

namespace {

using namespace cmlf;

constexpr int kExitOk = 0;
constexpr int kExitContract = 1;
constexpr int kExitUsage = 2;

std::filesystem::path resolve_out(const std::string& out) {
  std::filesystem::path path(out);
  if (path.is_absolute()) return path;
  const char* root = std::getenv("CMLF_RUN_ROOT");
  return root != nullptr ? std::filesystem::path(root) / path : path;
}

void add_config_flags(CLI::App* cmd, cli::ExperimentConfig& config) {
  cmd->add_option("--data-seed", config.data_seed, "dataset generation seed");
  cmd->add_flag("--full-catalog", config.full_catalog,
                "75-object catalog instead of the 12-object desk profile");
  cmd->add_option("--horizon", config.horizon, "steps per trajectory");
  cmd->add_option("--repeats", config.repeats, "repeats per interaction configuration");
  cmd->add_option("--visual-dim", config.visual_dim, "vector-mode visual dimension");
  cmd->add_option("--grid-side", config.grid_side, "grid-mode image side");
  cmd->add_option("--tactile-dim", config.tactile_dim, "tactile vector dimension");
  cmd->add_flag_callback(
      "--grid-visual", [&config]() { config.visual_mode = sim::VisualMode::grid; },
      "render grid images instead of feature vectors");
  cmd->add_option("--n-z", config.n_z, "directly observable latent dimension");
  cmd->add_option("--n-y", config.n_y, "indirectly observable latent dimension");
  cmd->add_option("--hidden", config.hidden, "MLP trunk width");
  cmd->add_option("--lstm-hidden", config.lstm_hidden, "recurrent width");
  cmd->add_option("--lr", config.learning_rate, "Adam learning rate");
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--batch-size", config.batch_size, "trajectories per batch");
  cmd->add_option("--anneal-fraction", config.anneal_fraction, "KL annealing ramp fraction");
  cmd->add_option("--beta-max", config.beta_max, "KL weight ceiling");
  cmd->add_option("--cm-late", config.cm_late_fraction, "late cross-modal activation fraction");
  cmd->add_option("--cm-early", config.cm_early_fraction, "early cross-modal activation fraction");
  cmd->add_option("--train-seed", config.train_seed, "training seed");
  cmd->add_option("--band-scale", config.band_scale,
                  "shaded-band scale in figures (0.1 matches the paper-style shading)");
  cmd->add_flag("--no-figures", "skip figure emission");
  cmd->add_flag("--no-early", "skip the early-activation w_cm run");
}

void apply_negative_flags(CLI::App* cmd, cli::ExperimentConfig& config) {
  if (cmd->count("--no-figures") > 0) config.figures = false;
  if (cmd->count("--no-early") > 0) config.with_early = false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmlf: cross-modal latent filtering over synthetic visuo-tactile interactions"};
  app.set_version_flag("--version", cmlf::version());
  app.require_subcommand(1);

  cli::ExperimentConfig config;
  std::string out, data_dir, surprise_dir, checkpoint_path, variant_name = "w_cm", split = "test";
  std::vector<std::string> checkpoint_paths;
  std::string config_file;
  bool overwrite = false, surprise_set = false;
  double cm_fraction = -1.0;
  sim::PerturbationSpec perturbation;
  int mode_flag = 0;

  auto* generate = app.add_subcommand("generate-data", "simulate and export a dataset");
  generate->add_option("--out", out, "output dataset directory")->required();
  generate->add_flag("--surprise", surprise_set, "generate the surprise object set");
  generate->add_flag("--overwrite", overwrite, "allow reuse of a non-empty directory");
  add_config_flags(generate, config);

  auto* train_cmd = app.add_subcommand("train", "train one variant on an exported dataset");
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--variant", variant_name, "baseline | joint | wo_cm | w_cm");
  train_cmd->add_option("--out", out, "run directory")->required();
  train_cmd->add_option("--cm-fraction", cm_fraction, "cross-modal activation fraction override");
  train_cmd->add_flag("--overwrite", overwrite, "allow reuse of a non-empty directory");
  add_config_flags(train_cmd, config);

  auto* infer = app.add_subcommand("infer", "write filtered-belief archives for a split");
  infer->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
  infer->add_option("--data", data_dir, "dataset directory")->required();
  infer->add_option("--out", out, "output directory")->required();
  infer->add_option("--split", split, "train | val | test | all");
  infer->add_option("--sigma", perturbation.sigma, "evaluation-time noise std");
  infer->add_option("--dropout", perturbation.c, "evaluation-time dropout probability");
  infer->add_option("--missing", mode_flag, "1: mark dropped frames missing instead of zeroing");
  infer->add_flag("--overwrite", overwrite, "allow reuse of a non-empty directory");

  auto* evaluate = app.add_subcommand("evaluate", "full evaluation report for checkpoint(s)");
  evaluate->add_option("--checkpoint", checkpoint_paths,
                       "trained checkpoint(s); several produce a pairwise comparison")
      ->required();
  evaluate->add_option("--data", data_dir, "aligned dataset directory")->required();
  evaluate->add_option("--surprise-data", surprise_dir, "optional surprise dataset directory");
  evaluate->add_option("--out", out, "output directory")->required();
  evaluate->add_flag("--overwrite", overwrite, "allow reuse of a non-empty directory");
  add_config_flags(evaluate, config);

  auto* experiment = app.add_subcommand(
      "experiment", "full pipeline: data, all variants, evaluation, comparison report");
  experiment->add_option("--out", out, "run directory")->required();
  experiment->add_option("--config", config_file, "experiment config JSON (flags override)");
  experiment->add_flag("--overwrite", overwrite, "allow reuse of a non-empty directory");
  add_config_flags(experiment, config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed()) {
      apply_negative_flags(generate, config);
      auto dir = resolve_out(out);
      cli::prepare_run_dir(dir, overwrite);
      cli::run_generate_data(config, dir, surprise_set);
      std::cout << "dataset written to " << dir << "\n";
    } else if (train_cmd->parsed()) {
      apply_negative_flags(train_cmd, config);
      if (!std::filesystem::exists(std::filesystem::path(data_dir) / "manifest.json")) {
        std::cerr << "usage error: dataset not found at " << data_dir << "\n";
        return kExitUsage;
      }
      auto dir = resolve_out(out);
      cli::prepare_run_dir(dir, overwrite);
      cli::RunLock lock(dir);
      sim::Dataset dataset = sim::load_dataset(data_dir);
      model::Variant variant = model::variant_from_name(variant_name);
      double fraction = cm_fraction > 0.0 ? cm_fraction : config.cm_late_fraction;
      auto result = cli::run_train(config, dataset, variant, fraction, config.train_seed, dir);
      if (result.aborted) {
        std::cerr << "training aborted: " << result.abort_reason << "\n";
        return kExitContract;
      }
      std::cout << "checkpoints written to " << dir << " (best epoch " << result.best_epoch
                << ")\n";
    } else if (infer->parsed()) {
      if (!std::filesystem::exists(checkpoint_path)) {
        std::cerr << "usage error: checkpoint not found at " << checkpoint_path << "\n";
        return kExitUsage;
      }
      if (!std::filesystem::exists(std::filesystem::path(data_dir) / "manifest.json")) {
        std::cerr << "usage error: dataset not found at " << data_dir << "\n";
        return kExitUsage;
      }
      auto dir = resolve_out(out);
      cli::prepare_run_dir(dir, overwrite);
      auto loaded = model::load_checkpoint(checkpoint_path);
      sim::Dataset dataset = sim::load_dataset(data_dir);
      std::vector<int> indices;
      if (split == "train")
        indices = dataset.splits.train;
      else if (split == "val")
        indices = dataset.splits.val;
      else if (split == "test")
        indices = dataset.splits.test;
      else
        for (int i = 0; i < static_cast<int>(dataset.trajectories.size()); ++i)
          indices.push_back(i);
      perturbation.mode =
          mode_flag != 0 ? sim::CorruptionMode::missing_flag : sim::CorruptionMode::zero_fill;
      cli::run_infer(loaded.model, dataset, indices, perturbation, config.data_seed, dir);
      std::cout << "rollout archive written to " << dir << "\n";
    } else if (evaluate->parsed()) {
      apply_negative_flags(evaluate, config);
      for (const std::string& path : checkpoint_paths) {
        if (!std::filesystem::exists(path)) {
          std::cerr << "usage error: checkpoint not found at " << path << "\n";
          return kExitUsage;
        }
      }
      if (!std::filesystem::exists(std::filesystem::path(data_dir) / "manifest.json")) {
        std::cerr << "usage error: dataset not found at " << data_dir << "\n";
        return kExitUsage;
      }
      auto dir = resolve_out(out);
      cli::prepare_run_dir(dir, overwrite);
      sim::Dataset aligned = sim::load_dataset(data_dir);
      std::optional<sim::Dataset> surprise;
      if (!surprise_dir.empty()) surprise = sim::load_dataset(surprise_dir);
      cli::evaluate_checkpoints(checkpoint_paths, aligned, surprise ? &*surprise : nullptr,
                                config, dir);
      std::cout << "report written to " << dir << "\n";
    } else if (experiment->parsed()) {
      if (!config_file.empty()) {
        cli::ExperimentConfig merged = cli::ExperimentConfig::from_json_file(config_file);
        if (experiment->count("--data-seed")) merged.data_seed = config.data_seed;
        if (experiment->count("--train-seed")) merged.train_seed = config.train_seed;
        if (experiment->count("--epochs")) merged.epochs = config.epochs;
        if (experiment->count("--lr")) merged.learning_rate = config.learning_rate;
        if (experiment->count("--horizon")) merged.horizon = config.horizon;
        if (experiment->count("--batch-size")) merged.batch_size = config.batch_size;
        config = merged;
      }
      apply_negative_flags(experiment, config);
      auto dir = resolve_out(out);
      cli::prepare_run_dir(dir, overwrite);
      cli::run_experiment(config, dir);
      std::cout << "experiment complete: " << dir << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kExitContract;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitOk;
}
