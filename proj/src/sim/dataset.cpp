#include "cmlf/sim/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"

#include "cmlf/core/rng.hpp"

namespace cmlf::sim {

using nlohmann::json;

namespace {

constexpr std::uint32_t kTrajectoryMagic = 0x52544d43;  // "CMTR"
constexpr int kFormatVersion = 1;

json require(const json& j, const std::string& field, const std::string& context) {
  if (!j.contains(field)) throw IoError(context + ": missing field '" + field + "'");
  return j.at(field);
}

json object_to_json(const ObjectSpec& o) {
  return json{{"object_index", o.object_index},
              {"shape_code", o.props.shape_code},
              {"height", o.props.height},
              {"visual_texture_code", o.props.visual_texture_code},
              {"stiffness", o.props.stiffness},
              {"mass", o.props.mass},
              {"friction_coeff", o.props.friction_coeff},
              {"surprise_flag", o.surprise_flag}};
}

ObjectSpec object_from_json(const json& j) {
  ObjectSpec o;
  o.object_index = require(j, "object_index", "catalog entry").get<int>();
  o.props.shape_code = require(j, "shape_code", "catalog entry").get<int>();
  o.props.height = require(j, "height", "catalog entry").get<double>();
  o.props.visual_texture_code = require(j, "visual_texture_code", "catalog entry").get<int>();
  o.props.stiffness = require(j, "stiffness", "catalog entry").get<double>();
  o.props.mass = require(j, "mass", "catalog entry").get<double>();
  o.props.friction_coeff = require(j, "friction_coeff", "catalog entry").get<double>();
  o.surprise_flag = require(j, "surprise_flag", "catalog entry").get<bool>();
  return o;
}

void write_doubles(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, std::size_t n, const std::string& file) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("trajectory file truncated: " + file);
}

void write_trajectory_file(const Trajectory& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open trajectory file for writing: " + path.string());
  const std::uint32_t header[4] = {kTrajectoryMagic, static_cast<std::uint32_t>(t.horizon()),
                                   static_cast<std::uint32_t>(t.obs_visual.rows()),
                                   static_cast<std::uint32_t>(t.obs_tactile.rows())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (const Action& a : t.actions) {
    double row[4] = {a.d, a.v_z, a.v_beta, static_cast<double>(a.phase)};
    write_doubles(out, row, 4);
  }
  write_doubles(out, t.obs_visual.data(), static_cast<std::size_t>(t.obs_visual.size()));
  write_doubles(out, t.obs_tactile.data(), static_cast<std::size_t>(t.obs_tactile.size()));
  write_doubles(out, t.pose_gt.data(), static_cast<std::size_t>(t.pose_gt.size()));
  for (int i = 0; i < t.horizon(); ++i) {
    unsigned char present[2] = {t.visual_present[i] ? static_cast<unsigned char>(1)
                                                    : static_cast<unsigned char>(0),
                                t.tactile_present[i] ? static_cast<unsigned char>(1)
                                                     : static_cast<unsigned char>(0)};
    out.write(reinterpret_cast<const char*>(present), 2);
  }
  if (!out) throw IoError("failed writing trajectory file: " + path.string());
}

Trajectory read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trajectory file: " + path.string());
  std::uint32_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || header[0] != kTrajectoryMagic)
    throw IoError("bad trajectory file header: " + path.string());
  const int horizon = static_cast<int>(header[1]);
  const int n_ov = static_cast<int>(header[2]);
  const int n_ot = static_cast<int>(header[3]);

  Trajectory t;
  t.actions.resize(static_cast<std::size_t>(horizon));
  for (Action& a : t.actions) {
    double row[4];
    read_doubles(in, row, 4, path.string());
    a.d = row[0];
    a.v_z = row[1];
    a.v_beta = row[2];
    a.phase = static_cast<Phase>(static_cast<int>(row[3]));
  }
  t.obs_visual.resize(n_ov, horizon);
  t.obs_tactile.resize(n_ot, horizon);
  t.pose_gt.resize(6, horizon);
  read_doubles(in, t.obs_visual.data(), static_cast<std::size_t>(t.obs_visual.size()), path.string());
  read_doubles(in, t.obs_tactile.data(), static_cast<std::size_t>(t.obs_tactile.size()),
               path.string());
  read_doubles(in, t.pose_gt.data(), static_cast<std::size_t>(t.pose_gt.size()), path.string());
  t.visual_present.resize(horizon);
  t.tactile_present.resize(horizon);
  for (int i = 0; i < horizon; ++i) {
    unsigned char present[2];
    in.read(reinterpret_cast<char*>(present), 2);
    if (!in) throw IoError("trajectory file truncated: " + path.string());
    t.visual_present[i] = present[0] != 0;
    t.tactile_present[i] = present[1] != 0;
  }
  return t;
}

SplitAssignment assign_splits(const std::vector<Trajectory>& trajectories, std::uint64_t seed,
                              bool all_test) {
  SplitAssignment splits;
  if (all_test) {
    for (int i = 0; i < static_cast<int>(trajectories.size()); ++i) splits.test.push_back(i);
    return splits;
  }
  std::map<int, std::vector<int>> by_object;
  for (int i = 0; i < static_cast<int>(trajectories.size()); ++i)
    by_object[trajectories[static_cast<std::size_t>(i)].object.object_index].push_back(i);
  for (auto& [object_index, indices] : by_object) {
    Rng rng(derive_seed(seed, "split", object_index));
    rng.shuffle(indices);
    int n = static_cast<int>(indices.size());
    int n_val = std::max(1, static_cast<int>(0.1 * n + 0.5));
    int n_test = std::max(1, static_cast<int>(0.1 * n + 0.5));
    if (n_val + n_test >= n) {
      n_val = std::max(0, n / 3);
      n_test = std::max(0, n / 3);
    }
    for (int k = 0; k < n; ++k) {
      if (k < n_val)
        splits.val.push_back(indices[static_cast<std::size_t>(k)]);
      else if (k < n_val + n_test)
        splits.test.push_back(indices[static_cast<std::size_t>(k)]);
      else
        splits.train.push_back(indices[static_cast<std::size_t>(k)]);
    }
  }
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.val.begin(), splits.val.end());
  std::sort(splits.test.begin(), splits.test.end());
  return splits;
}

std::string split_name(const SplitAssignment& splits, int idx) {
  if (std::binary_search(splits.train.begin(), splits.train.end(), idx)) return "train";
  if (std::binary_search(splits.val.begin(), splits.val.end(), idx)) return "val";
  return "test";
}

}  // namespace

std::vector<std::pair<int, int>> DatasetConfig::effective_configs() const {
  if (!interaction_configs.empty()) return interaction_configs;
  std::vector<std::pair<int, int>> grid;
  for (int g = 0; g < 4; ++g)
    for (int s = 0; s < 4; ++s) grid.emplace_back(g, s);
  return grid;
}

Dataset generate_dataset(const DatasetConfig& config) {
  Dataset ds;
  ds.config = config;
  switch (config.object_set) {
    case ObjectSet::aligned_full:
      ds.catalog = build_catalog(config.catalog, config.seed);
      break;
    case ObjectSet::aligned_desk:
      ds.catalog = desk_subsample(build_catalog(config.catalog, config.seed));
      break;
    case ObjectSet::surprise:
      ds.catalog = build_surprise_catalog(config.catalog, config.seed);
      break;
  }
  const auto configs = config.effective_configs();
  ds.trajectories.reserve(ds.catalog.size() * configs.size() *
                          static_cast<std::size_t>(config.repeats));
  for (const ObjectSpec& obj : ds.catalog) {
    for (int c = 0; c < static_cast<int>(configs.size()); ++c) {
      auto [grip, speed] = configs[static_cast<std::size_t>(c)];
      auto actions = make_action_sequence(grip, speed, config.horizon);
      for (int r = 0; r < config.repeats; ++r) {
        std::uint64_t child = derive_seed(config.seed, "traj", obj.object_index, c, r);
        Trajectory t = simulate_trajectory(obj, actions, config.obs, child);
        t.config_index = c;
        t.repeat = r;
        ds.trajectories.push_back(std::move(t));
      }
    }
  }
  ds.splits = assign_splits(ds.trajectories, config.seed, config.object_set == ObjectSet::surprise);
  return ds;
}

void export_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["seed"] = dataset.config.seed;
  manifest["horizon"] = dataset.config.horizon;
  manifest["repeats"] = dataset.config.repeats;
  manifest["object_set"] = static_cast<int>(dataset.config.object_set);
  manifest["obs"] = {{"visual_mode", static_cast<int>(dataset.config.obs.visual_mode)},
                     {"grid_side", dataset.config.obs.grid_side},
                     {"visual_dim", dataset.config.obs.visual_dim},
                     {"tactile_dim", dataset.config.obs.tactile_dim},
                     {"sensor_noise", dataset.config.obs.sensor_noise},
                     {"frame_hz", dataset.config.obs.frame_hz}};
  manifest["catalog_config"] = {{"heights", dataset.config.catalog.heights},
                                {"stiffness_by_shape", dataset.config.catalog.stiffness_by_shape},
                                {"friction_by_texture", dataset.config.catalog.friction_by_texture},
                                {"base_mass_by_height", dataset.config.catalog.base_mass_by_height},
                                {"mass_jitter", dataset.config.catalog.mass_jitter}};
  json configs = json::array();
  for (auto [g, s] : dataset.config.effective_configs()) configs.push_back({g, s});
  manifest["interaction_configs"] = configs;
  json catalog = json::array();
  for (const ObjectSpec& o : dataset.catalog) catalog.push_back(object_to_json(o));
  manifest["catalog"] = catalog;

  json trajectories = json::array();
  for (int i = 0; i < static_cast<int>(dataset.trajectories.size()); ++i) {
    const Trajectory& t = dataset.trajectories[static_cast<std::size_t>(i)];
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%05d.bin", i);
    write_trajectory_file(t, dir / name);
    trajectories.push_back({{"file", name},
                            {"object_index", t.object.object_index},
                            {"config_index", t.config_index},
                            {"repeat", t.repeat},
                            {"seed", t.seed},
                            {"split", split_name(dataset.splits, i)}});
  }
  manifest["trajectories"] = trajectories;

  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open manifest: " + (dir / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }

  Dataset ds;
  int version = require(manifest, "format_version", "manifest").get<int>();
  if (version != kFormatVersion)
    throw IoError("manifest format_version " + std::to_string(version) + " unsupported");
  ds.config.seed = require(manifest, "seed", "manifest").get<std::uint64_t>();
  ds.config.horizon = require(manifest, "horizon", "manifest").get<int>();
  ds.config.repeats = require(manifest, "repeats", "manifest").get<int>();
  ds.config.object_set =
      static_cast<ObjectSet>(require(manifest, "object_set", "manifest").get<int>());
  json obs = require(manifest, "obs", "manifest");
  ds.config.obs.visual_mode =
      static_cast<VisualMode>(require(obs, "visual_mode", "manifest.obs").get<int>());
  ds.config.obs.grid_side = require(obs, "grid_side", "manifest.obs").get<int>();
  ds.config.obs.visual_dim = require(obs, "visual_dim", "manifest.obs").get<int>();
  ds.config.obs.tactile_dim = require(obs, "tactile_dim", "manifest.obs").get<int>();
  ds.config.obs.sensor_noise = require(obs, "sensor_noise", "manifest.obs").get<double>();
  ds.config.obs.frame_hz = require(obs, "frame_hz", "manifest.obs").get<double>();
  json cc = require(manifest, "catalog_config", "manifest");
  ds.config.catalog.heights = require(cc, "heights", "catalog_config").get<std::vector<double>>();
  ds.config.catalog.stiffness_by_shape =
      require(cc, "stiffness_by_shape", "catalog_config").get<std::vector<double>>();
  ds.config.catalog.friction_by_texture =
      require(cc, "friction_by_texture", "catalog_config").get<std::vector<double>>();
  ds.config.catalog.base_mass_by_height =
      require(cc, "base_mass_by_height", "catalog_config").get<std::vector<double>>();
  ds.config.catalog.mass_jitter = require(cc, "mass_jitter", "catalog_config").get<double>();
  for (const json& pair : require(manifest, "interaction_configs", "manifest"))
    ds.config.interaction_configs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());

  std::map<int, ObjectSpec> objects;
  for (const json& entry : require(manifest, "catalog", "manifest")) {
    ObjectSpec o = object_from_json(entry);
    objects[o.object_index] = o;
    ds.catalog.push_back(o);
  }

  int idx = 0;
  for (const json& entry : require(manifest, "trajectories", "manifest")) {
    std::string file = require(entry, "file", "trajectory entry").get<std::string>();
    Trajectory t = read_trajectory_file(dir / file);
    int object_index = require(entry, "object_index", "trajectory entry").get<int>();
    auto found = objects.find(object_index);
    if (found == objects.end())
      throw IoError("trajectory references unknown object_index " + std::to_string(object_index));
    t.object = found->second;
    t.config_index = require(entry, "config_index", "trajectory entry").get<int>();
    t.repeat = require(entry, "repeat", "trajectory entry").get<int>();
    t.seed = require(entry, "seed", "trajectory entry").get<std::uint64_t>();
    std::string split = require(entry, "split", "trajectory entry").get<std::string>();
    if (split == "train")
      ds.splits.train.push_back(idx);
    else if (split == "val")
      ds.splits.val.push_back(idx);
    else if (split == "test")
      ds.splits.test.push_back(idx);
    else
      throw IoError("trajectory entry: unknown split '" + split + "'");
    ds.trajectories.push_back(std::move(t));
    ++idx;
  }
  return ds;
}

DatasetConfig desk_config(std::uint64_t seed) {
  DatasetConfig config;
  config.object_set = ObjectSet::aligned_desk;
  config.obs.visual_mode = VisualMode::vector;
  config.obs.visual_dim = 32;
  config.obs.tactile_dim = 64;
  config.interaction_configs = {{0, 0}, {1, 2}, {2, 1}, {3, 3}};
  config.repeats = 2;
  config.horizon = 90;
  config.seed = seed;
  return config;
}

DatasetConfig desk_surprise_config(std::uint64_t seed) {
  DatasetConfig config = desk_config(seed);
  config.object_set = ObjectSet::surprise;
  return config;
}

}  // namespace cmlf::sim
