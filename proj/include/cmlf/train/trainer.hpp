// Reproducible training loop: seeded shuffling, KL annealing, delayed
// cross-modal activation, gradient clipping, best-validation tracking
// and an append-only metric log.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmlf/model/checkpoint.hpp"
#include "cmlf/sim/dataset.hpp"
#include "cmlf/train/loss.hpp"
#include "cmlf/train/schedule.hpp"

namespace cmlf::train {

struct MetricRow {
  int epoch = 0;
  std::string split;  // "train" or "val"
  LossBreakdown loss;
  double beta = 0.0;
  bool cm_active = false;
};

std::string metric_row_json(const MetricRow& row);

struct TrainResult {
  model::CmlfModel model;       // final weights (last good on divergence)
  model::CmlfModel best_model;  // best validation total
  int best_epoch = -1;
  std::vector<MetricRow> log;
  bool aborted = false;
  std::string abort_reason;
};

/// Splits come from the dataset; validation never touches the test split.
/// Deterministic per (config.seed): data order, init, and noise streams
/// are all derived from it. If model_config.object_ids is empty it is
/// filled with the training split's object indices.
TrainResult train(model::ModelConfig model_config, const TrainConfig& config,
                  const sim::Dataset& dataset,
                  const std::filesystem::path& metric_log_path = {});

}  // namespace cmlf::train
