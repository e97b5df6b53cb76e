#include "cmlf/model/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

namespace cmlf::model {

using nlohmann::json;

namespace {
constexpr std::uint32_t kCheckpointMagic = 0x464c4d43;  // "CMLF"
constexpr std::uint32_t kCheckpointVersion = 1;

json require(const json& j, const std::string& field) {
  if (!j.contains(field)) throw IoError("checkpoint header: missing field '" + field + "'");
  return j.at(field);
}
}  // namespace

void save_checkpoint(const CmlfModel& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());

  const ModelConfig& c = model.config();
  json header;
  header["variant"] = variant_name(c.variant);
  header["n_z"] = c.n_z;
  header["n_y"] = c.n_y;
  header["hidden"] = c.hidden;
  header["lstm_hidden"] = c.lstm_hidden;
  header["conv_channels1"] = c.conv_channels1;
  header["conv_channels2"] = c.conv_channels2;
  header["visual_mode"] = static_cast<int>(c.visual_mode);
  header["grid_side"] = c.grid_side;
  header["visual_dim"] = c.visual_dim;
  header["tactile_dim"] = c.tactile_dim;
  header["object_ids"] = c.object_ids;
  header["epoch"] = meta.epoch;
  header["train_seed"] = meta.train_seed;
  header["init_seed"] = meta.init_seed;
  header["best_val_total"] = meta.best_val_total;
  header["note"] = meta.note;
  std::string header_text = header.dump();

  std::uint32_t prefix[3] = {kCheckpointMagic, kCheckpointVersion,
                             static_cast<std::uint32_t>(header_text.size())};
  out.write(reinterpret_cast<const char*>(prefix), sizeof(prefix));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  const auto& params = model.params().map();
  std::uint32_t count = static_cast<std::uint32_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, tensor] : params) {
    std::uint32_t sizes[3] = {static_cast<std::uint32_t>(name.size()),
                              static_cast<std::uint32_t>(tensor.value.rows()),
                              static_cast<std::uint32_t>(tensor.value.cols())};
    out.write(reinterpret_cast<const char*>(sizes), sizeof(sizes));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.write(reinterpret_cast<const char*>(tensor.value.data()),
              static_cast<std::streamsize>(sizeof(double) * tensor.value.size()));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::uint32_t prefix[3];
  in.read(reinterpret_cast<char*>(prefix), sizeof(prefix));
  if (!in || prefix[0] != kCheckpointMagic) throw IoError("bad checkpoint magic: " + path.string());
  if (prefix[1] != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(prefix[1]));
  std::string header_text(prefix[2], '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }

  ModelConfig config;
  config.variant = variant_from_name(require(header, "variant").get<std::string>());
  config.n_z = require(header, "n_z").get<int>();
  config.n_y = require(header, "n_y").get<int>();
  config.hidden = require(header, "hidden").get<int>();
  config.lstm_hidden = require(header, "lstm_hidden").get<int>();
  config.conv_channels1 = require(header, "conv_channels1").get<int>();
  config.conv_channels2 = require(header, "conv_channels2").get<int>();
  config.visual_mode = static_cast<sim::VisualMode>(require(header, "visual_mode").get<int>());
  config.grid_side = require(header, "grid_side").get<int>();
  config.visual_dim = require(header, "visual_dim").get<int>();
  config.tactile_dim = require(header, "tactile_dim").get<int>();
  config.object_ids = require(header, "object_ids").get<std::vector<int>>();

  CheckpointMeta meta;
  meta.epoch = require(header, "epoch").get<int>();
  meta.train_seed = require(header, "train_seed").get<std::uint64_t>();
  meta.init_seed = require(header, "init_seed").get<std::uint64_t>();
  meta.best_val_total = require(header, "best_val_total").get<double>();
  meta.note = require(header, "note").get<std::string>();

  CmlfModel model(config, meta.init_seed);

  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t sizes[3];
    in.read(reinterpret_cast<char*>(sizes), sizeof(sizes));
    if (!in) throw IoError("checkpoint truncated: " + path.string());
    std::string name(sizes[0], '\0');
    in.read(name.data(), sizes[0]);
    if (!model.params().contains(name))
      throw IoError("checkpoint parameter '" + name + "' not in model");
    ad::Tensor& tensor = model.params().at(name);
    if (tensor.value.rows() != static_cast<Eigen::Index>(sizes[1]) ||
        tensor.value.cols() != static_cast<Eigen::Index>(sizes[2]))
      throw IoError("checkpoint parameter '" + name + "' has mismatched shape");
    in.read(reinterpret_cast<char*>(tensor.value.data()),
            static_cast<std::streamsize>(sizeof(double) * tensor.value.size()));
    if (!in) throw IoError("checkpoint truncated: " + path.string());
  }
  return LoadedCheckpoint{config, meta, std::move(model)};
}

}  // namespace cmlf::model
