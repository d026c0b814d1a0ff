#ifndef LEGMPC_SIMWORLD_H_
#define LEGMPC_SIMWORLD_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "legmpc/common.h"

namespace legmpc {

// Layout of the 24-element observation vector.
enum StateIndex : int {
  kX = 0, kY, kZ,
  kVx, kVy, kVz,
  kCosRoll, kSinRoll, kCosPitch, kSinPitch, kCosYaw, kSinYaw,
  kOmegaX, kOmegaY, kOmegaZ,
  kCosLegL, kSinLegL, kCosLegR, kSinLegR,
  kLegVelL, kLegVelR,
  kBemfL, kBemfR,
  kBattery,
  kStateDim
};
inline constexpr int kActionDim = 2;

// (cos, sin) index pairs in the observation vector.
inline constexpr std::array<std::array<int, 2>, 5> kAnglePairs = {{
    {kCosRoll, kSinRoll},
    {kCosPitch, kSinPitch},
    {kCosYaw, kSinYaw},
    {kCosLegL, kSinLegL},
    {kCosLegR, kSinLegR},
}};

using StateVector = std::array<double, kStateDim>;

double yaw_of(const StateVector& s);

// Hidden ground truth of the simulator. Units: m, rad, s, V.
struct WorldState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;        // (-pi, pi], CCW positive
  double v_body = 0.0;     // body-forward speed
  double omega_z = 0.0;    // measured yaw rate, slip included
  double roll = 0.0;
  double pitch = 0.0;
  double roll_rate = 0.0;
  double pitch_rate = 0.0;
  double leg_phase_l = 0.0;  // [0, 2pi)
  double leg_phase_r = 0.0;
  double leg_vel_l = 0.0;    // realized, rad/s
  double leg_vel_r = 0.0;
  double battery_v = 4.0;
  double t = 0.0;

  bool finite() const;
};

enum class ActionAbstraction : std::uint32_t { kVelocitySetpoint = 0, kDirectPwm = 1 };

std::string to_string(ActionAbstraction a);
ActionAbstraction parse_abstraction(const std::string& name);

struct Action {
  double left = 0.0;
  double right = 0.0;
  ActionAbstraction abstraction = ActionAbstraction::kVelocitySetpoint;

  bool operator==(const Action&) const = default;
};

struct TerrainParams {
  std::string name;
  double traction_fwd = 1.0;   // (0, 1]
  double traction_turn = 1.0;  // (0, 1]
  double slip_sigma = 0.0;     // yaw noise std per 10 ms tick, rad
  double roll_gain = 0.0;      // roll-oscillation to yaw-rate coupling, 1/m
  double roll_freq = 3.0;      // Hz
  double yaw_drift = 0.0;      // speed-proportional yaw-rate bias, rad/m
  std::uint64_t texture_seed = 0;
  std::array<std::array<double, 3>, 3> palette{};  // RGB in [0,1]

  void validate() const;
};

// Physical constants of the simulated robot. None of these are known for the
// real platform; see config/default.json.
struct RobotParams {
  double leg_radius = 0.006;      // forward travel per leg radian, m/rad
  double k_turn = 0.08;           // yaw rate per unit leg-speed difference
  double leg_tau = 0.04;          // first-order leg lag, s
  double omega_min = 0.0;         // velocity setpoint bounds, rad/s
  double omega_max = 60.0;
  double pwm_gain = 80.0;         // leg speed per unit PWM at nominal voltage
  double v_nominal = 3.7;
  double pwm_kappa = 0.2;         // leg-phase modulation of the PWM gain
  double battery_start = 4.0;
  double battery_decay = 0.002;   // V/s
  double battery_min = 3.0;
  double roll_amp = 0.15;         // rad at full oscillation
  double pitch_amp = 0.05;
  double oscillation_speed = 40.0;  // leg speed scale of the oscillation, rad/s
  double bemf_k = 0.01;           // V per rad/s
  double control_dt = 0.1;
  int substeps = 10;              // Euler sub-steps per control step
  double noise_tick = 0.01;       // slip_sigma reference interval, s

  void validate() const;
};

// Advances the ground truth by dt under a constant action.
WorldState step(const WorldState& ws, const Action& a, const TerrainParams& terrain,
                const RobotParams& robot, double dt, Rng& rng);

// Runs robot.substeps Euler steps covering one control interval.
WorldState step_control(const WorldState& ws, const Action& a, const TerrainParams& terrain,
                        const RobotParams& robot, Rng& rng);

StateVector observe(const WorldState& ws, const RobotParams& robot);

// True when the command is inside the range of its abstraction.
bool action_valid(const Action& a, const RobotParams& robot);

struct ImagePatch {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // row-major RGB, values in [0,1]

  static constexpr int kChannels = 3;
};

// Procedural top-down texture under the robot. Deterministic in
// (texture_seed, position quantized to 1 cm).
ImagePatch render_patch(const TerrainParams& terrain, const WorldState& ws, int size);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Waypoints {
  std::vector<Point2> points;

  void validate() const;
};

enum class PathKind { kStraight, kLeft, kRight, kZigzag };

PathKind parse_path_kind(const std::string& name);
std::string to_string(PathKind kind);

Waypoints make_path(PathKind kind, double scale);

}  // namespace legmpc

#endif  // LEGMPC_SIMWORLD_H_
