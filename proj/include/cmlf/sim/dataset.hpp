// Dataset generation, manifest + binary export, and lossless reload.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cmlf/sim/perturb.hpp"
#include "cmlf/sim/simulate.hpp"

namespace cmlf::sim {

struct SplitAssignment {
  std::vector<int> train, val, test;  // trajectory indices
};

enum class ObjectSet { aligned_full, aligned_desk, surprise };

struct DatasetConfig {
  CatalogConfig catalog;
  ObsConfig obs;
  ObjectSet object_set = ObjectSet::aligned_full;
  // (grip_level, speed_level) pairs; empty selects the full 4x4 grid.
  std::vector<std::pair<int, int>> interaction_configs;
  int repeats = 3;
  int horizon = 90;
  std::uint64_t seed = 0;

  std::vector<std::pair<int, int>> effective_configs() const;
};

struct Dataset {
  DatasetConfig config;
  std::vector<ObjectSpec> catalog;  // the objects actually simulated
  std::vector<Trajectory> trajectories;
  SplitAssignment splits;

  const Trajectory& trajectory(int idx) const {
    return trajectories[static_cast<std::size_t>(idx)];
  }
};

/// Simulates all object x interaction-config x repeat trajectories and
/// assigns 80/10/10 train/val/test splits stratified by object (surprise
/// sets are evaluation-only: everything lands in test).
Dataset generate_dataset(const DatasetConfig& config);

/// Writes manifest.json plus one binary observation file per trajectory.
void export_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Lossless inverse of export_dataset; errors name the missing field.
Dataset load_dataset(const std::filesystem::path& dir);

/// Desk-scale profile: 12 aligned objects, 4 interaction configs,
/// 2 repeats, H = 90, vector observations.
DatasetConfig desk_config(std::uint64_t seed);

/// Same profile over the 6 surprise objects.
DatasetConfig desk_surprise_config(std::uint64_t seed);

}  // namespace cmlf::sim
