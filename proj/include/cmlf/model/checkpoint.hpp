// Versioned checkpoint files: model config + variant + training metadata
// + named parameter tensors, reloadable bit-exactly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cmlf/model/filter.hpp"

namespace cmlf::model {

struct CheckpointMeta {
  int epoch = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t init_seed = 0;
  double best_val_total = 0.0;
  std::string note;
};

void save_checkpoint(const CmlfModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  ModelConfig config;
  CheckpointMeta meta;
  CmlfModel model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmlf::model
