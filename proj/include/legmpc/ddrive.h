#ifndef LEGMPC_DDRIVE_H_
#define LEGMPC_DDRIVE_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "legmpc/simworld.h"

namespace legmpc {

enum class Side { kLeft, kRight, kOn };

// Projection of a point onto the closest waypoint segment.
struct SegmentProjection {
  std::size_t segment = 0;  // index i of [w_i, w_{i+1}]
  double line_angle = 0.0;  // atan2 of the segment direction
  double distance = 0.0;    // to the segment, endpoints clamped
  Side side = Side::kOn;
  double param = 0.0;       // projection parameter, [0, 1] except past the final waypoint
  double arc = 0.0;         // arc-length coordinate of the projection
};

// Closest segment to p. Ties go to the later segment. The final segment is
// treated as a ray, so points beyond the last waypoint project onto its line.
SegmentProjection closest_segment(Point2 p, const Waypoints& w);

struct DdParams {
  double f1 = 2.0;         // rad/m
  double f2 = 8.0;         // leg rad/s per rad of heading error
  double omega_nom = 20.0; // rad/s

  void validate() const;
};

struct LegSetpoints {
  double left = 0.0;
  double right = 0.0;
};

// Heading error: wrapped difference between the desired heading (line angle
// corrected by the perpendicular offset) and the current yaw.
double dd_heading_error(const StateVector& s, const Waypoints& w, const DdParams& params);

// Setpoints before actuator clamping; left + right == 2 * omega_nom.
LegSetpoints dd_setpoints_unclamped(const StateVector& s, const Waypoints& w,
                                    const DdParams& params);

LegSetpoints dd_control(const StateVector& s, const Waypoints& w, const DdParams& params,
                        const RobotParams& robot);

struct PidGains {
  double kp = 0.05;
  double ki = 1.0;
  double kd = 0.0;
  double integral_limit = 1.0;
  int rate_hz = 1000;

  void validate() const;
};

struct PidState {
  PidGains gains;
  double integral = 0.0;
  double prev_error = 0.0;
  bool primed = false;  // prev_error valid
};

struct PidOutput {
  double pwm = 0.0;
  PidState state;
};

// Discrete PID with output clamped to [-1, 1]. The integral does not
// accumulate while the output is saturated in the direction of the error.
PidOutput pid_update(const PidState& st, double setpoint, double measured, double dt);

// Emulates the on-board low-level layer: velocity setpoints are tracked by a
// PID per side at gains.rate_hz, PWM commands are applied directly.
class LegFirmware {
 public:
  LegFirmware(const RobotParams& robot, const PidGains& gains);

  WorldState execute(const WorldState& ws, const Action& a, const TerrainParams& terrain,
                     Rng& rng);
  void reset();

 private:
  RobotParams robot_;
  PidState left_;
  PidState right_;
};

// Closed-loop record. states has one more entry than actions.
struct Trajectory {
  std::vector<StateVector> states;
  std::vector<WorldState> world;
  std::vector<Action> actions;
  std::vector<double> step_costs;
  double cost = 0.0;
};

struct CostWeights;

struct DdRolloutConfig {
  RobotParams robot;
  PidGains pid;
  DdParams params;
  double duration = 6.0;  // s
  std::uint64_t seed = 0;
};

WorldState start_state(const RobotParams& robot);

Trajectory dd_rollout(const DdRolloutConfig& cfg, const TerrainParams& terrain,
                      const Waypoints& path, const CostWeights& weights);

}  // namespace legmpc

#endif  // LEGMPC_DDRIVE_H_
