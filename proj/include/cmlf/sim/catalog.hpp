// Synthetic object catalog with causally paired extrinsic and intrinsic
// properties, plus the surprise set that deliberately inverts those
// pairings.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf::sim {

/// Ground-truth properties of one object. Extrinsic: shape_code, height,
/// visual_texture_code. Intrinsic: stiffness, mass, friction_coeff.
struct PropertyVector {
  int shape_code = 0;           // 0..4: cylinder, ellipsoid, cube, cuboid, hexagonal prism
  double height = 0.15;         // m
  int visual_texture_code = 0;  // 0..4, light to dark
  double stiffness = 9.0;       // kPa
  double mass = 0.6;            // kg
  double friction_coeff = 0.35;

  Eigen::Vector3d extrinsic() const {
    return {static_cast<double>(shape_code), height, static_cast<double>(visual_texture_code)};
  }
  Eigen::Vector3d intrinsic() const { return {stiffness, mass, friction_coeff}; }

  void validate() const;
};

struct ObjectSpec {
  int object_index = 0;  // hierarchical-prior index
  PropertyVector props;
  bool surprise_flag = false;

  int shape_code() const { return props.shape_code; }
  double height() const { return props.height; }
  int visual_texture_code() const { return props.visual_texture_code; }
  double stiffness() const { return props.stiffness; }
  double mass() const { return props.mass; }
  double friction_coeff() const { return props.friction_coeff; }
};

/// Property value sets and causal pairings of the aligned catalog:
/// stiffness is paired with shape, friction with visual texture, and
/// mass tracks height within +/- mass_jitter.
struct CatalogConfig {
  std::vector<double> heights{0.12, 0.15, 0.175};
  std::vector<double> stiffness_by_shape{3.0, 9.0, 15.0, 20.0, 25.0};
  std::vector<double> friction_by_texture{0.1, 0.15, 0.35, 0.47, 0.8};
  std::vector<double> base_mass_by_height{0.4, 0.6, 0.8};
  double mass_jitter = 0.1;  // kg, uniform

  int n_shapes() const { return static_cast<int>(stiffness_by_shape.size()); }
  int n_heights() const { return static_cast<int>(heights.size()); }
  int n_textures() const { return static_cast<int>(friction_by_texture.size()); }
};

/// Full aligned catalog: shapes x heights x textures objects with the
/// causal pairings enforced; deterministic under seed.
std::vector<ObjectSpec> build_catalog(const CatalogConfig& config, std::uint64_t seed);

/// Six surprise objects, each violating at least one aligned pairing:
/// stiffer cylinder, softer hexagonal prism, low-friction dark texture,
/// high-friction light texture, short-heavy, tall-light.
std::vector<ObjectSpec> build_surprise_catalog(const CatalogConfig& config, std::uint64_t seed);

/// True when the object breaks any aligned pairing.
bool violates_alignment(const ObjectSpec& object, const CatalogConfig& config);

/// Deterministic 12-object subsample of the aligned catalog covering
/// every shape, height and texture value (the desk-scale profile).
std::vector<ObjectSpec> desk_subsample(const std::vector<ObjectSpec>& aligned, int count = 12);

}  // namespace cmlf::sim
