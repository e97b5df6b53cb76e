#include "cmlf/sim/simulate.hpp"

#include <cmath>

#include "cmlf/core/rng.hpp"

namespace cmlf::sim {

namespace {

// Contact model constants (synthetic units chosen for O(1) channels).
constexpr double kStiffnessScale = 40.0;  // kPa -> contact stiffness
constexpr double kForceLimit = 6.0;       // position-based force control saturation
constexpr double kHoldForce = 0.3;        // minimum normal force to hold the object
constexpr double kGripGain = 2.5;         // finger-pair friction leverage
constexpr double kGravity = 9.81;

constexpr double kForceNorm = 6.0;
constexpr double kShearNorm = 15.0;
constexpr double kVibNorm = 0.7;

// Fixed render basis seed: the rendering function is part of the sensor
// model, shared by every trajectory.
constexpr std::uint64_t kRenderSeed = 0x52454e44;

constexpr double kShapeAspect[5] = {0.80, 0.90, 1.00, 1.10, 1.05};

double luminance(int texture_code) { return 0.9 - 0.18 * texture_code; }

struct RenderState {
  double width;      // apparent (possibly squashed) width, m
  double height;     // apparent height, m
  double deform;     // visible squash, m
};

RenderState render_state(const ObjectSpec& spec, const ContactState& contact) {
  RenderState r;
  r.deform = contact.penetration;
  double aspect = kShapeAspect[spec.shape_code()];
  r.width = aspect * kGraspWidth * (1.0 - 0.9 * r.deform / kGraspWidth);
  r.height = spec.height() * (1.0 + 0.3 * r.deform / kGraspWidth);
  return r;
}

Eigen::VectorXd visual_features(const ObjectSpec& spec, const RenderState& render,
                                const Eigen::Matrix<double, 6, 1>& pose, double finger_d) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(20);
  f[spec.shape_code()] = 1.0;
  f[5] = (spec.height() - 0.10) * 10.0;
  f[6 + spec.visual_texture_code()] = 1.0;
  f[11] = luminance(spec.visual_texture_code());
  f[12] = render.width / kGraspWidth;
  f[13] = render.height / 0.15;
  f[14] = pose[0] * 10.0;
  f[15] = pose[1] * 10.0;
  f[16] = pose[2] * 5.0;
  f[17] = pose[4];            // rotation about y
  f[18] = pose[5];            // initial yaw
  f[19] = finger_d / kFingerOpen;
  return f;
}

// Fixed random projection mixing the feature core into the observation
// vector; regenerated identically from kRenderSeed.
struct VectorRenderer {
  Eigen::MatrixXd mix;
  Eigen::VectorXd bias;

  explicit VectorRenderer(int dim) {
    Rng rng(derive_seed(kRenderSeed, "mix", dim));
    mix = rng.normal_matrix(dim, 20) * (1.4 / std::sqrt(20.0));
    bias = 0.1 * rng.normal_vector(dim);
  }

  Eigen::VectorXd render(const Eigen::VectorXd& features) const {
    return 0.9 * (mix * features + bias).array().tanh();
  }
};

struct GridRenderer {
  int side;

  explicit GridRenderer(int side_in) : side(side_in) {}

  Eigen::VectorXd render(const ObjectSpec& spec, const RenderState& rs,
                         const Eigen::Matrix<double, 6, 1>& pose) const {
    // Side view: world window x in [-0.25, 0.25], z in [0, 0.5].
    Eigen::VectorXd img(side * side);
    double beta = pose[4];
    double a = 0.5 * rs.width * (std::abs(std::cos(beta)) + 0.35 * std::abs(std::sin(beta)));
    double b = 0.5 * rs.height;
    double cx = pose[0];
    double cz = pose[2];
    double lum = luminance(spec.visual_texture_code());
    double n_exp = (spec.shape_code() == 2 || spec.shape_code() == 3) ? 8.0
                   : (spec.shape_code() == 4)                         ? 4.0
                                                                      : 2.0;
    double tex_freq = 2.0 + 3.0 * spec.visual_texture_code();
    for (int py = 0; py < side; ++py) {
      double z = 0.5 * (py + 0.5) / side;
      for (int px = 0; px < side; ++px) {
        double x = -0.25 + 0.5 * (px + 0.5) / side;
        double u = (x - cx) / a;
        double v = (z - cz) / b;
        double r = std::pow(std::abs(u), n_exp) + std::pow(std::abs(v), n_exp);
        double inside = 1.0 / (1.0 + std::exp((r - 1.0) / 0.08));
        double texture = 1.0 + 0.25 * std::cos(tex_freq * 3.1 * u) * std::cos(tex_freq * 2.3 * v);
        img[py * side + px] = inside * lum * texture;
      }
    }
    return img;
  }
};

}  // namespace

ContactState contact_state(const ObjectSpec& spec, const Action& action, bool lifted) {
  ContactState c;
  const double k = spec.stiffness() * kStiffnessScale;
  const double max_pen = kForceLimit / k;  // position-based force control stalls here
  c.penetration = std::max(0.0, std::min(kGraspWidth - action.d, max_pen));
  c.normal_force = k * c.penetration;
  c.held = c.normal_force > kHoldForce;
  c.tangential_load = (lifted && c.held) ? spec.mass() * kGravity : 0.0;
  c.slipping = c.tangential_load > spec.friction_coeff() * c.normal_force * kGripGain;
  return c;
}

Trajectory simulate_trajectory(const ObjectSpec& spec, const std::vector<Action>& actions,
                               const ObsConfig& obs, std::uint64_t seed) {
  spec.props.validate();
  const int horizon = static_cast<int>(actions.size());
  if (horizon < 1) throw ConfigError("simulate_trajectory: empty action sequence");
  for (const Action& a : actions) {
    if (!(a.d >= 0.0) || std::abs(a.v_z) > kSpeedMax + 1e-12 ||
        std::abs(a.v_beta) > kOmegaMax + 1e-12)
      throw ContractError("simulate_trajectory: action outside velocity bounds");
  }

  const double dt = 1.0 / obs.frame_hz;
  Rng place_rng(derive_seed(seed, "placement"));
  const double x0 = place_rng.uniform(-0.02, 0.02);
  const double y0 = place_rng.uniform(-0.02, 0.02);
  const double yaw0 = place_rng.uniform(-0.3, 0.3);

  Rng vis_rng(derive_seed(seed, "vis"));
  Rng tac_rng(derive_seed(seed, "tac"));

  Trajectory traj;
  traj.object = spec;
  traj.actions = actions;
  traj.seed = seed;
  traj.obs_visual.resize(obs.visual_size(), horizon);
  traj.obs_tactile.resize(obs.tactile_dim, horizon);
  traj.pose_gt.resize(6, horizon);
  traj.visual_present = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(horizon, true);
  traj.tactile_present = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(horizon, true);

  const VectorRenderer vector_renderer(obs.visual_mode == VisualMode::vector ? obs.visual_dim : 1);
  const GridRenderer grid_renderer(obs.grid_side);

  const int taps = obs.tactile_dim / 4;
  if (taps < 1 || obs.tactile_dim % 4 != 0)
    throw ConfigError("tactile_dim must be a positive multiple of 4");
  Eigen::MatrixXd tap_profile(4, taps);
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < taps; ++k) {
      double center = taps * (0.2 + 0.2 * c);
      double w = (k - center) / (0.22 * taps);
      tap_profile(c, k) = 0.45 + 0.55 * std::exp(-w * w);
    }

  double z_lift = 0.0;
  double beta = 0.0;
  bool lifted = false;
  for (int t = 0; t < horizon; ++t) {
    const Action& a = actions[static_cast<std::size_t>(t)];
    z_lift += a.v_z * dt;
    beta += a.v_beta * dt;
    if (z_lift > 1e-9) lifted = true;

    Eigen::Matrix<double, 6, 1> pose;
    pose << x0, y0, spec.height() / 2.0 + z_lift, 0.0, beta, yaw0;
    traj.pose_gt.col(t) = pose;

    ContactState contact = contact_state(spec, a, lifted);
    RenderState render = render_state(spec, contact);

    // Tactile frame: 4 channels spread over taps.
    double t_sec = t * dt;
    double rho = spec.friction_coeff() * contact.normal_force * kGripGain /
                 std::max(contact.tangential_load, 0.1);
    double shear = contact.tangential_load * (1.0 + 0.6 / (1.0 + rho));
    double vib = (a.phase == Phase::rotate)
                     ? std::abs(a.v_beta) * (1.5 * spec.friction_coeff() + 1.0 * spec.mass()) *
                           (1.0 + 0.1 * std::sin(2.0 * 3.141592653589793 * 1.3 * t_sec))
                     : 0.0;
    double channels[4] = {contact.normal_force / kForceNorm, shear / kShearNorm,
                          contact.slipping ? 1.0 : 0.0, vib / kVibNorm};
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < taps; ++k)
        traj.obs_tactile(c * taps + k, t) =
            channels[c] * tap_profile(c, k) + obs.sensor_noise * tac_rng.normal();

    // Visual frame.
    if (obs.visual_mode == VisualMode::vector) {
      traj.obs_visual.col(t) = vector_renderer.render(visual_features(spec, render, pose, a.d));
    } else {
      traj.obs_visual.col(t) = grid_renderer.render(spec, render, pose);
    }
    for (int i = 0; i < traj.obs_visual.rows(); ++i)
      traj.obs_visual(i, t) += obs.sensor_noise * vis_rng.normal();
  }
  return traj;
}

}  // namespace cmlf::sim
