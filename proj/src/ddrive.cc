#include "legmpc/ddrive.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "legmpc/mpc.h"

namespace legmpc {

SegmentProjection closest_segment(Point2 p, const Waypoints& w) {
  SegmentProjection best;
  double best_dist = std::numeric_limits<double>::infinity();
  double arc_start = 0.0;
  for (std::size_t i = 0; i + 1 < w.points.size(); ++i) {
    const Point2 a = w.points[i];
    const Point2 b = w.points[i + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    const double rx = p.x - a.x;
    const double ry = p.y - a.y;
    // The final segment continues as a ray so tracking holds its line past the end.
    const bool last = i + 2 == w.points.size();
    const double raw = (rx * dx + ry * dy) / (len * len);
    const double param = last ? std::max(raw, 0.0) : std::clamp(raw, 0.0, 1.0);
    const double dist = std::hypot(p.x - (a.x + param * dx), p.y - (a.y + param * dy));
    if (dist <= best_dist) {
      best_dist = dist;
      best.segment = i;
      best.line_angle = std::atan2(dy, dx);
      best.distance = dist;
      best.param = param;
      best.arc = arc_start + param * len;
      const double cross = dx * ry - dy * rx;
      best.side = cross > 0.0 ? Side::kLeft : (cross < 0.0 ? Side::kRight : Side::kOn);
    }
    arc_start += len;
  }
  return best;
}

void DdParams::validate() const {
  if (!(f1 > 0 && f2 > 0 && omega_nom > 0)) {
    throw ConfigError("dd: f1, f2 and omega_nom must be positive");
  }
}

double dd_heading_error(const StateVector& s, const Waypoints& w, const DdParams& params) {
  const SegmentProjection seg = closest_segment({s[kX], s[kY]}, w);
  const double offset = params.f1 * seg.distance;
  const double desired = seg.side == Side::kRight ? seg.line_angle + offset
                                                  : seg.line_angle - offset;
  return wrap_to_pi(desired - yaw_of(s));
}

LegSetpoints dd_setpoints_unclamped(const StateVector& s, const Waypoints& w,
                                    const DdParams& params) {
  const double delta = dd_heading_error(s, w, params);
  return {params.omega_nom - delta * params.f2, params.omega_nom + delta * params.f2};
}

LegSetpoints dd_control(const StateVector& s, const Waypoints& w, const DdParams& params,
                        const RobotParams& robot) {
  LegSetpoints out = dd_setpoints_unclamped(s, w, params);
  out.left = std::clamp(out.left, robot.omega_min, robot.omega_max);
  out.right = std::clamp(out.right, robot.omega_min, robot.omega_max);
  return out;
}

void PidGains::validate() const {
  if (!(kp >= 0 && ki >= 0 && kd >= 0)) throw ConfigError("pid: gains must be non-negative");
  if (!(integral_limit > 0)) throw ConfigError("pid: integral_limit must be positive");
  if (rate_hz < 1) throw ConfigError("pid: rate_hz must be >= 1");
}

PidOutput pid_update(const PidState& st, double setpoint, double measured, double dt) {
  if (!(dt > 0.0)) throw Error("pid_update: dt must be positive");
  const PidGains& g = st.gains;
  const double e = setpoint - measured;
  const double deriv = st.primed ? (e - st.prev_error) / dt : 0.0;

  PidOutput out;
  out.state = st;
  const double integral =
      std::clamp(st.integral + e * dt, -g.integral_limit, g.integral_limit);
  const double raw = g.kp * e + g.ki * integral + g.kd * deriv;
  if ((raw > 1.0 && e > 0.0) || (raw < -1.0 && e < 0.0)) {
    // Saturated in the direction of the error: hold the integral.
    out.pwm = std::clamp(g.kp * e + g.ki * st.integral + g.kd * deriv, -1.0, 1.0);
  } else {
    out.state.integral = integral;
    out.pwm = std::clamp(raw, -1.0, 1.0);
  }
  out.state.prev_error = e;
  out.state.primed = true;
  return out;
}

LegFirmware::LegFirmware(const RobotParams& robot, const PidGains& gains) : robot_(robot) {
  left_.gains = gains;
  right_.gains = gains;
}

void LegFirmware::reset() {
  left_ = PidState{left_.gains};
  right_ = PidState{right_.gains};
}

WorldState LegFirmware::execute(const WorldState& ws, const Action& a,
                                 const TerrainParams& terrain, Rng& rng) {
  if (a.abstraction == ActionAbstraction::kDirectPwm) {
    return step_control(ws, a, terrain, robot_, rng);
  }
  if (!action_valid(a, robot_)) throw Error("firmware: velocity setpoint out of range");
  const int ticks = std::max(
      1, static_cast<int>(std::lround(robot_.control_dt * left_.gains.rate_hz)));
  const double dt = robot_.control_dt / ticks;
  WorldState cur = ws;
  for (int i = 0; i < ticks; ++i) {
    const PidOutput l = pid_update(left_, a.left, cur.leg_vel_l, dt);
    const PidOutput r = pid_update(right_, a.right, cur.leg_vel_r, dt);
    left_ = l.state;
    right_ = r.state;
    cur = step(cur, Action{l.pwm, r.pwm, ActionAbstraction::kDirectPwm}, terrain, robot_, dt,
               rng);
  }
  return cur;
}

WorldState start_state(const RobotParams& robot) {
  WorldState ws;
  ws.battery_v = robot.battery_start;
  return ws;
}

Trajectory dd_rollout(const DdRolloutConfig& cfg, const TerrainParams& terrain,
                      const Waypoints& path, const CostWeights& weights) {
  cfg.params.validate();
  path.validate();
  const int steps = static_cast<int>(std::floor(cfg.duration / cfg.robot.control_dt + 1e-9));
  Trajectory traj;
  if (steps <= 0) return traj;

  Rng rng(substream_seed(cfg.seed, 0));
  LegFirmware firmware(cfg.robot, cfg.pid);
  WorldState ws = start_state(cfg.robot);
  traj.world.push_back(ws);
  traj.states.push_back(observe(ws, cfg.robot));
  for (int t = 0; t < steps; ++t) {
    const LegSetpoints sp = dd_control(traj.states.back(), path, cfg.params, cfg.robot);
    const Action a{sp.left, sp.right, ActionAbstraction::kVelocitySetpoint};
    ws = firmware.execute(ws, a, terrain, rng);
    traj.actions.push_back(a);
    traj.world.push_back(ws);
    traj.states.push_back(observe(ws, cfg.robot));
  }
  traj.step_costs = path_step_costs(traj.states, path, weights);
  for (double c : traj.step_costs) traj.cost += c;
  return traj;
}

}  // namespace legmpc
