#include "legmpc/simworld.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace legmpc {

double yaw_of(const StateVector& s) { return std::atan2(s[kSinYaw], s[kCosYaw]); }

bool WorldState::finite() const {
  for (double v : {x, y, yaw, v_body, omega_z, roll, pitch, roll_rate, pitch_rate, leg_phase_l,
                   leg_phase_r, leg_vel_l, leg_vel_r, battery_v, t}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string to_string(ActionAbstraction a) {
  return a == ActionAbstraction::kVelocitySetpoint ? "velocity" : "pwm";
}

ActionAbstraction parse_abstraction(const std::string& name) {
  if (name == "velocity") return ActionAbstraction::kVelocitySetpoint;
  if (name == "pwm") return ActionAbstraction::kDirectPwm;
  throw ConfigError("unknown action abstraction '" + name + "' (expected velocity|pwm)");
}

void TerrainParams::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (name.empty()) throw ConfigError("terrain without a name");
  if (!in_unit(traction_fwd) || !in_unit(traction_turn)) {
    throw ConfigError("terrain '" + name + "': traction must be in (0, 1]");
  }
  if (!(slip_sigma >= 0.0)) throw ConfigError("terrain '" + name + "': slip_sigma < 0");
  if (!(roll_freq > 0.0)) throw ConfigError("terrain '" + name + "': roll_freq must be > 0");
  for (const auto& c : palette) {
    for (double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("terrain '" + name + "': palette outside [0,1]");
    }
  }
}

void RobotParams::validate() const {
  if (!(leg_radius > 0 && k_turn > 0 && leg_tau > 0 && pwm_gain > 0 && v_nominal > 0)) {
    throw ConfigError("robot: physical constants must be positive");
  }
  if (!(omega_max > omega_min)) throw ConfigError("robot: omega_max must exceed omega_min");
  if (!(control_dt > 0) || substeps < 1) throw ConfigError("robot: bad control timing");
  if (!(noise_tick > 0)) throw ConfigError("robot: noise_tick must be > 0");
}

bool action_valid(const Action& a, const RobotParams& robot) {
  if (!std::isfinite(a.left) || !std::isfinite(a.right)) return false;
  if (a.abstraction == ActionAbstraction::kVelocitySetpoint) {
    return a.left >= robot.omega_min && a.left <= robot.omega_max &&
           a.right >= robot.omega_min && a.right <= robot.omega_max;
  }
  return std::abs(a.left) <= 1.0 && std::abs(a.right) <= 1.0;
}

namespace {

double oscillation_level(double mean_leg_speed, const RobotParams& robot) {
  return std::tanh(std::abs(mean_leg_speed) / robot.oscillation_speed);
}

}  // namespace

WorldState step(const WorldState& ws, const Action& a, const TerrainParams& terrain,
                const RobotParams& robot, double dt, Rng& rng) {
  if (!ws.finite()) throw Error("step: non-finite world state at t=" + std::to_string(ws.t));
  if (!(dt > 0.0)) throw Error("step: dt must be positive");
  if (!action_valid(a, robot)) throw Error("step: action outside its valid range");

  WorldState next = ws;

  // Leg velocity targets.
  double target_l = a.left;
  double target_r = a.right;
  if (a.abstraction == ActionAbstraction::kDirectPwm) {
    const double supply = ws.battery_v / robot.v_nominal;
    target_l = a.left * robot.pwm_gain * supply * (1.0 + robot.pwm_kappa * std::sin(ws.leg_phase_l));
    target_r = a.right * robot.pwm_gain * supply * (1.0 + robot.pwm_kappa * std::sin(ws.leg_phase_r));
  }
  const double alpha = std::min(1.0, dt / robot.leg_tau);
  next.leg_vel_l = ws.leg_vel_l + alpha * (target_l - ws.leg_vel_l);
  next.leg_vel_r = ws.leg_vel_r + alpha * (target_r - ws.leg_vel_r);
  next.leg_phase_l = wrap_to_2pi(ws.leg_phase_l + next.leg_vel_l * dt);
  next.leg_phase_r = wrap_to_2pi(ws.leg_phase_r + next.leg_vel_r * dt);

  const double mean_leg = 0.5 * (next.leg_vel_l + next.leg_vel_r);
  next.v_body = terrain.traction_fwd * robot.leg_radius * mean_leg;

  // Yaw rate: differential steering, roll-coupled disturbance, speed drift.
  const double roll_phase = std::sin(kTwoPi * terrain.roll_freq * ws.t);
  next.omega_z = terrain.traction_turn * robot.k_turn * (next.leg_vel_r - next.leg_vel_l) +
                 terrain.roll_gain * roll_phase * next.v_body + terrain.yaw_drift * next.v_body;
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  const double slip = terrain.slip_sigma * std::sqrt(dt / robot.noise_tick) * unit_normal(rng);

  next.x = ws.x + next.v_body * std::cos(ws.yaw) * dt;
  next.y = ws.y + next.v_body * std::sin(ws.yaw) * dt;
  next.yaw = wrap_to_pi(ws.yaw + next.omega_z * dt + slip);
  // The gyro sees the total rotation, slip included.
  next.omega_z += slip / dt;

  next.t = ws.t + dt;
  const double level = oscillation_level(mean_leg, robot);
  next.roll = wrap_to_pi(robot.roll_amp * level * std::sin(kTwoPi * terrain.roll_freq * next.t));
  next.pitch = wrap_to_pi(robot.pitch_amp * level * std::sin(next.leg_phase_l + next.leg_phase_r));
  next.roll_rate = (next.roll - ws.roll) / dt;
  next.pitch_rate = (next.pitch - ws.pitch) / dt;

  next.battery_v = std::max(robot.battery_min, ws.battery_v - robot.battery_decay * dt);
  next.battery_v = std::min(next.battery_v, ws.battery_v);
  return next;
}

WorldState step_control(const WorldState& ws, const Action& a, const TerrainParams& terrain,
                        const RobotParams& robot, Rng& rng) {
  const double dt = robot.control_dt / robot.substeps;
  WorldState cur = ws;
  for (int i = 0; i < robot.substeps; ++i) cur = step(cur, a, terrain, robot, dt, rng);
  return cur;
}

StateVector observe(const WorldState& ws, const RobotParams& robot) {
  if (!ws.finite()) throw Error("observe: non-finite world state");
  StateVector s{};
  s[kX] = ws.x;
  s[kY] = ws.y;
  s[kZ] = 0.0;
  s[kVx] = ws.v_body * std::cos(ws.yaw);
  s[kVy] = ws.v_body * std::sin(ws.yaw);
  s[kVz] = 0.0;
  s[kCosRoll] = std::cos(ws.roll);
  s[kSinRoll] = std::sin(ws.roll);
  s[kCosPitch] = std::cos(ws.pitch);
  s[kSinPitch] = std::sin(ws.pitch);
  s[kCosYaw] = std::cos(ws.yaw);
  s[kSinYaw] = std::sin(ws.yaw);
  s[kOmegaX] = ws.roll_rate;
  s[kOmegaY] = ws.pitch_rate;
  s[kOmegaZ] = ws.omega_z;
  s[kCosLegL] = std::cos(ws.leg_phase_l);
  s[kSinLegL] = std::sin(ws.leg_phase_l);
  s[kCosLegR] = std::cos(ws.leg_phase_r);
  s[kSinLegR] = std::sin(ws.leg_phase_r);
  s[kLegVelL] = ws.leg_vel_l;
  s[kLegVelR] = ws.leg_vel_r;
  s[kBemfL] = robot.bemf_k * ws.leg_vel_l;
  s[kBemfR] = robot.bemf_k * ws.leg_vel_r;
  s[kBattery] = ws.battery_v;
  return s;
}

namespace {

// Lattice hash in [0, 1).
double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy, std::uint64_t channel) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL) ^
                          mix64(static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL + channel));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Bilinear value noise on a lattice with `cell` texels per lattice step.
double value_noise(std::uint64_t seed, std::int64_t px, std::int64_t py, std::int64_t cell,
                   std::uint64_t channel) {
  auto floor_div = [](std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  };
  const std::int64_t gx = floor_div(px, cell);
  const std::int64_t gy = floor_div(py, cell);
  const double fx = static_cast<double>(px - gx * cell) / static_cast<double>(cell);
  const double fy = static_cast<double>(py - gy * cell) / static_cast<double>(cell);
  const double v00 = lattice(seed, gx, gy, channel);
  const double v10 = lattice(seed, gx + 1, gy, channel);
  const double v01 = lattice(seed, gx, gy + 1, channel);
  const double v11 = lattice(seed, gx + 1, gy + 1, channel);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

}  // namespace

ImagePatch render_patch(const TerrainParams& terrain, const WorldState& ws, int size) {
  if (size < 4) throw Error("render_patch: size must be >= 4");
  ImagePatch patch;
  patch.width = size;
  patch.height = size;
  patch.pixels.resize(static_cast<std::size_t>(size) * size * ImagePatch::kChannels);

  // One texel per centimetre, patch centred on the quantized position.
  const auto cx = static_cast<std::int64_t>(std::llround(ws.x * 100.0));
  const auto cy = static_cast<std::int64_t>(std::llround(ws.y * 100.0));
  const std::int64_t half = size / 2;
  const auto& pal = terrain.palette;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const std::int64_t px = cx + c - half;
      const std::int64_t py = cy + (size - 1 - r) - half;
      // Two coarse blend fields select among the palette colours, a fine one
      // adds grain.
      const double w1 = value_noise(terrain.texture_seed, px, py, 6, 1);
      const double w2 = value_noise(terrain.texture_seed, px, py, 3, 2);
      const double grain = lattice(terrain.texture_seed, px, py, 3) - 0.5;
      const double b0 = (1.0 - w1) * (1.0 - w2);
      const double b1 = w1 * (1.0 - w2);
      const double b2 = w2;
      for (int ch = 0; ch < 3; ++ch) {
        double v = b0 * pal[0][ch] + b1 * pal[1][ch] + b2 * pal[2][ch] + 0.08 * grain;
        patch.pixels[(static_cast<std::size_t>(r) * size + c) * 3 + ch] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return patch;
}

void Waypoints::validate() const {
  if (points.size() < 2) throw Error("waypoints: need at least two points");
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double dx = points[i + 1].x - points[i].x;
    const double dy = points[i + 1].y - points[i].y;
    if (!(std::hypot(dx, dy) > 1e-9)) {
      throw Error("waypoints: consecutive points " + std::to_string(i) + " and " +
                  std::to_string(i + 1) + " coincide");
    }
  }
}

PathKind parse_path_kind(const std::string& name) {
  if (name == "straight") return PathKind::kStraight;
  if (name == "left") return PathKind::kLeft;
  if (name == "right") return PathKind::kRight;
  if (name == "zigzag") return PathKind::kZigzag;
  throw ConfigError("unknown path kind '" + name + "' (expected straight|left|right|zigzag)");
}

std::string to_string(PathKind kind) {
  switch (kind) {
    case PathKind::kStraight: return "straight";
    case PathKind::kLeft: return "left";
    case PathKind::kRight: return "right";
    case PathKind::kZigzag: return "zigzag";
  }
  return "?";
}

Waypoints make_path(PathKind kind, double scale) {
  if (!(scale > 0.0)) throw Error("make_path: scale must be positive");
  Waypoints w;
  switch (kind) {
    case PathKind::kStraight:
      w.points = {{0, 0}, {scale, 0}};
      break;
    case PathKind::kLeft:
      w.points = {{0, 0}, {scale, 0}, {scale, scale}};
      break;
    case PathKind::kRight:
      w.points = {{0, 0}, {scale, 0}, {scale, -scale}};
      break;
    case PathKind::kZigzag: {
      // Four legs at +-30 degrees about +x, each scale/2 long.
      const double leg = 0.5 * scale;
      const double dx = leg * std::cos(kPi / 6);
      const double dy = leg * std::sin(kPi / 6);
      w.points.push_back({0, 0});
      for (int i = 0; i < 4; ++i) {
        const Point2 last = w.points.back();
        w.points.push_back({last.x + dx, last.y + (i % 2 == 0 ? dy : -dy)});
      }
      break;
    }
  }
  return w;
}

}  // namespace legmpc
