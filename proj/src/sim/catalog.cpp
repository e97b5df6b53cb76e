#include "cmlf/sim/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmlf/core/rng.hpp"

namespace cmlf::sim {

void PropertyVector::validate() const {
  if (shape_code < 0 || shape_code > 4 || visual_texture_code < 0 || visual_texture_code > 4)
    throw ContractError("PropertyVector: shape/texture code outside 0..4");
  if (!(stiffness > 0.0)) throw ContractError("PropertyVector: stiffness must be > 0");
  if (!(mass > 0.0)) throw ContractError("PropertyVector: mass must be > 0");
  if (!(friction_coeff > 0.0 && friction_coeff < 2.0))
    throw ContractError("PropertyVector: friction_coeff outside (0, 2)");
}

namespace {

void check_config(const CatalogConfig& c) {
  if (c.heights.empty() || c.stiffness_by_shape.empty() || c.friction_by_texture.empty())
    throw ConfigError("catalog config: empty property value set");
  if (c.base_mass_by_height.size() != c.heights.size())
    throw ConfigError("catalog config: base_mass_by_height must match heights");
}

double jittered_mass(const CatalogConfig& c, int height_idx, Rng& rng) {
  return c.base_mass_by_height[static_cast<std::size_t>(height_idx)] +
         rng.uniform(-c.mass_jitter, c.mass_jitter);
}

}  // namespace

std::vector<ObjectSpec> build_catalog(const CatalogConfig& config, std::uint64_t seed) {
  check_config(config);
  std::vector<ObjectSpec> catalog;
  catalog.reserve(static_cast<std::size_t>(config.n_shapes()) * config.n_heights() *
                  config.n_textures());
  int index = 0;
  for (int shape = 0; shape < config.n_shapes(); ++shape) {
    for (int h = 0; h < config.n_heights(); ++h) {
      for (int tex = 0; tex < config.n_textures(); ++tex) {
        Rng rng(derive_seed(seed, "catalog", index));
        ObjectSpec obj;
        obj.object_index = index++;
        obj.props.shape_code = shape;
        obj.props.height = config.heights[static_cast<std::size_t>(h)];
        obj.props.visual_texture_code = tex;
        obj.props.stiffness = config.stiffness_by_shape[static_cast<std::size_t>(shape)];
        obj.props.friction_coeff = config.friction_by_texture[static_cast<std::size_t>(tex)];
        obj.props.mass = jittered_mass(config, h, rng);
        obj.props.validate();
        catalog.push_back(obj);
      }
    }
  }
  return catalog;
}

std::vector<ObjectSpec> build_surprise_catalog(const CatalogConfig& config, std::uint64_t seed) {
  check_config(config);
  const int last_shape = config.n_shapes() - 1;
  const int last_tex = config.n_textures() - 1;
  const int last_height = config.n_heights() - 1;
  const int mid_height = config.n_heights() / 2;
  const int mid_tex = config.n_textures() / 2;
  const int mid_shape = config.n_shapes() / 2;

  struct Pick {
    int shape, height_idx, tex;
  };
  // Shape/texture/height assignments; the violated property is overridden below.
  const Pick picks[6] = {
      {0, mid_height, mid_tex},          // stiffer cylinder
      {last_shape, mid_height, mid_tex},  // softer hexagonal prism
      {mid_shape, mid_height, last_tex},  // low-friction dark texture
      {mid_shape, mid_height, 0},         // high-friction light texture
      {1, 0, 1},                          // short but heavy
      {3, last_height, 3},                // tall but light
  };

  std::vector<ObjectSpec> catalog;
  for (int i = 0; i < 6; ++i) {
    Rng rng(derive_seed(seed, "surprise", i));
    const Pick& p = picks[i];
    ObjectSpec obj;
    obj.object_index = 10000 + i;  // never seen during training
    obj.surprise_flag = true;
    obj.props.shape_code = p.shape;
    obj.props.height = config.heights[static_cast<std::size_t>(p.height_idx)];
    obj.props.visual_texture_code = p.tex;
    obj.props.stiffness = config.stiffness_by_shape[static_cast<std::size_t>(p.shape)];
    obj.props.friction_coeff = config.friction_by_texture[static_cast<std::size_t>(p.tex)];
    obj.props.mass = jittered_mass(config, p.height_idx, rng);
    switch (i) {
      case 0: obj.props.stiffness = config.stiffness_by_shape.back(); break;
      case 1: obj.props.stiffness = config.stiffness_by_shape.front(); break;
      case 2: obj.props.friction_coeff = config.friction_by_texture.front(); break;
      case 3: obj.props.friction_coeff = config.friction_by_texture.back(); break;
      case 4:
        obj.props.mass = config.base_mass_by_height.back() + rng.uniform(0.0, config.mass_jitter);
        break;
      case 5:
        obj.props.mass = config.base_mass_by_height.front() - rng.uniform(0.0, config.mass_jitter);
        break;
    }
    obj.props.validate();
    if (!violates_alignment(obj, config))
      throw ConfigError("surprise object " + std::to_string(i) + " does not violate any pairing");
    catalog.push_back(obj);
  }
  return catalog;
}

bool violates_alignment(const ObjectSpec& object, const CatalogConfig& config) {
  const PropertyVector& p = object.props;
  if (p.stiffness != config.stiffness_by_shape[static_cast<std::size_t>(p.shape_code)]) return true;
  if (p.friction_coeff != config.friction_by_texture[static_cast<std::size_t>(p.visual_texture_code)])
    return true;
  auto h = std::find(config.heights.begin(), config.heights.end(), p.height);
  if (h == config.heights.end()) return true;
  double base = config.base_mass_by_height[static_cast<std::size_t>(h - config.heights.begin())];
  return std::abs(p.mass - base) > config.mass_jitter + 1e-12;
}

std::vector<ObjectSpec> desk_subsample(const std::vector<ObjectSpec>& aligned, int count) {
  if (count >= static_cast<int>(aligned.size())) return aligned;

  std::vector<double> heights;
  for (const ObjectSpec& o : aligned) heights.push_back(o.props.height);
  std::sort(heights.begin(), heights.end());
  heights.erase(std::unique(heights.begin(), heights.end()), heights.end());

  // Hand-picked (shape, height index, texture) triples covering every
  // value of each property for the default 5x3x5 catalog.
  static const int triples[12][3] = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 0, 3},
                                     {4, 1, 4}, {0, 2, 1}, {1, 0, 2}, {2, 1, 3},
                                     {3, 2, 4}, {4, 0, 0}, {0, 1, 3}, {2, 0, 4}};
  std::vector<ObjectSpec> picked;
  if (count == 12) {
    for (const auto& t : triples) {
      if (t[1] >= static_cast<int>(heights.size())) continue;
      double target_height = heights[static_cast<std::size_t>(t[1])];
      for (const ObjectSpec& obj : aligned) {
        if (obj.props.shape_code == t[0] && obj.props.visual_texture_code == t[2] &&
            obj.props.height == target_height) {
          picked.push_back(obj);
          break;
        }
      }
    }
    if (static_cast<int>(picked.size()) == count) return picked;
    picked.clear();
  }
  // Fallback for non-default catalogs: evenly spaced indices.
  for (int i = 0; i < count; ++i)
    picked.push_back(aligned[static_cast<std::size_t>(i) * aligned.size() /
                             static_cast<std::size_t>(count)]);
  return picked;
}

}  // namespace cmlf::sim
