#include "legmpc/config.h"

#include <cstdio>
#include <fstream>

namespace legmpc {

namespace {

using nlohmann::json;

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

TerrainParams parse_terrain(const json& j) {
  TerrainParams t;
  t.name = j.at("name").get<std::string>();
  get_if(j, "traction_fwd", t.traction_fwd);
  get_if(j, "traction_turn", t.traction_turn);
  get_if(j, "slip_sigma", t.slip_sigma);
  get_if(j, "roll_gain", t.roll_gain);
  get_if(j, "roll_freq", t.roll_freq);
  get_if(j, "yaw_drift", t.yaw_drift);
  get_if(j, "texture_seed", t.texture_seed);
  if (j.contains("palette")) {
    const auto& p = j.at("palette");
    if (p.size() != 3) throw ConfigError("terrain '" + t.name + "': palette needs 3 colours");
    for (int c = 0; c < 3; ++c) {
      if (p[c].size() != 3) throw ConfigError("terrain '" + t.name + "': colour needs 3 channels");
      for (int ch = 0; ch < 3; ++ch) t.palette[c][ch] = p[c][ch].get<double>();
    }
  }
  t.validate();
  return t;
}

void parse_robot(const json& j, RobotParams& r) {
  get_if(j, "leg_radius", r.leg_radius);
  get_if(j, "k_turn", r.k_turn);
  get_if(j, "leg_tau", r.leg_tau);
  get_if(j, "omega_min", r.omega_min);
  get_if(j, "omega_max", r.omega_max);
  get_if(j, "pwm_gain", r.pwm_gain);
  get_if(j, "v_nominal", r.v_nominal);
  get_if(j, "pwm_kappa", r.pwm_kappa);
  get_if(j, "battery_start", r.battery_start);
  get_if(j, "battery_decay", r.battery_decay);
  get_if(j, "battery_min", r.battery_min);
  get_if(j, "roll_amp", r.roll_amp);
  get_if(j, "pitch_amp", r.pitch_amp);
  get_if(j, "oscillation_speed", r.oscillation_speed);
  get_if(j, "bemf_k", r.bemf_k);
  get_if(j, "control_dt", r.control_dt);
  get_if(j, "substeps", r.substeps);
  get_if(j, "noise_tick", r.noise_tick);
  r.validate();
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

}  // namespace

const TerrainParams& Config::terrain(const std::string& name) const {
  return terrains[static_cast<std::size_t>(terrain_index(name))];
}

int Config::terrain_index(const std::string& name) const {
  for (std::size_t i = 0; i < terrains.size(); ++i) {
    if (terrains[i].name == name) return static_cast<int>(i);
  }
  throw ConfigError("unknown terrain '" + name + "' (presets: " + terrain_names() + ")");
}

std::string Config::terrain_names() const {
  std::string out;
  for (const auto& t : terrains) out += (out.empty() ? "" : "|") + t.name;
  return out;
}

ActionBox Config::action_box() const {
  if (abstraction == ActionAbstraction::kDirectPwm) return {pwm_lo, pwm_hi, abstraction};
  return {robot.omega_min, robot.omega_max, abstraction};
}

Architecture Config::architecture(ModelVariant variant) const {
  Architecture a = is_conditioned(variant) ? conditioned : plain;
  a.variant = variant;
  if (variant == ModelVariant::kOneHot) a.embed_dim = static_cast<int>(terrains.size());
  if (variant == ModelVariant::kEmbedding) a.embed_dim = features.embed_dim;
  if (variant == ModelVariant::kPlain) a.embed_dim = 0;
  return a;
}

Config parse_config(const json& j) {
  Config c;
  try {
    if (j.value("version", 0) != 1) throw ConfigError("config: unsupported or missing version");
    if (j.contains("robot")) parse_robot(j.at("robot"), c.robot);
    if (!j.contains("terrains") || j.at("terrains").empty()) {
      throw ConfigError("config: at least one terrain preset is required");
    }
    for (const auto& t : j.at("terrains")) c.terrains.push_back(parse_terrain(t));
    for (std::size_t a = 0; a < c.terrains.size(); ++a) {
      for (std::size_t b = a + 1; b < c.terrains.size(); ++b) {
        if (c.terrains[a].name == c.terrains[b].name) {
          throw ConfigError("config: duplicate terrain '" + c.terrains[a].name + "'");
        }
      }
    }

    if (j.contains("pid")) {
      const auto& p = j.at("pid");
      get_if(p, "kp", c.pid.kp);
      get_if(p, "ki", c.pid.ki);
      get_if(p, "kd", c.pid.kd);
      get_if(p, "integral_limit", c.pid.integral_limit);
      get_if(p, "rate_hz", c.pid.rate_hz);
    }
    c.pid.validate();
    if (j.contains("dd")) {
      const auto& d = j.at("dd");
      get_if(d, "f1", c.dd.f1);
      get_if(d, "f2", c.dd.f2);
      get_if(d, "omega_nom", c.dd.omega_nom);
    }
    c.dd.validate();

    if (j.contains("action")) {
      const auto& a = j.at("action");
      if (a.contains("abstraction")) c.abstraction = parse_abstraction(a.at("abstraction"));
      get_if(a, "pwm_lo", c.pwm_lo);
      get_if(a, "pwm_hi", c.pwm_hi);
      if (!(c.pwm_lo >= -1.0 && c.pwm_hi <= 1.0 && c.pwm_hi > c.pwm_lo)) {
        throw ConfigError("config: pwm range must lie in [-1, 1]");
      }
    }
    if (j.contains("mpc")) {
      const auto& m = j.at("mpc");
      get_if(m, "candidates", c.mpc.candidates);
      get_if(m, "horizon", c.mpc.horizon);
      get_if(m, "parallel", c.mpc.parallel);
      get_if(m, "f_p", c.mpc.weights.perpendicular);
      get_if(m, "f_f", c.mpc.weights.forward);
      get_if(m, "f_h", c.mpc.weights.heading);
    }
    c.mpc.dt = c.robot.control_dt;
    c.mpc.box = c.action_box();
    c.mpc.validate();

    if (j.contains("data")) {
      const auto& d = j.at("data");
      get_if(d, "rollouts", c.rollouts);
      get_if(d, "steps", c.steps);
      get_if(d, "arena_half_width", c.start.arena_half_width);
      get_if(d, "battery_lo", c.start.battery_lo);
      get_if(d, "battery_hi", c.start.battery_hi);
    }
    if (c.rollouts < 1 || c.steps < 1) throw ConfigError("config: data sizes must be >= 1");

    if (j.contains("model")) {
      const auto& m = j.at("model");
      get_if(m, "hidden", c.plain.hidden);
      get_if(m, "fusion_width", c.conditioned.fusion_width);
      get_if(m, "post_fusion", c.conditioned.post_fusion);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      get_if(t, "epochs", c.train.epochs);
      get_if(t, "lr", c.train.lr);
      get_if(t, "batch_size", c.train.batch_size);
      get_if(t, "val_fraction", c.train.val_fraction);
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      get_if(f, "embed_dim", c.features.embed_dim);
      get_if(f, "patch_size", c.features.patch_size);
      get_if(f, "projection_seed", c.features.projection_seed);
    }
    if (c.features.embed_dim < 1 || c.features.patch_size < 4) {
      throw ConfigError("config: embed_dim must be >= 1 and patch_size >= 4");
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      get_if(e, "seeds", c.eval.n_seeds);
      get_if(e, "duration", c.eval.duration);
      get_if(e, "path_scale", c.eval.path_scale);
      get_if(e, "speeds", c.eval.speeds);
      get_if(e, "speed_terrain", c.eval.speed_terrain);
      get_if(e, "speed_band", c.eval.speed_band);
    }
    if (c.eval.n_seeds < 1 || !(c.eval.duration >= 0.0) || !(c.eval.path_scale > 0.0)) {
      throw ConfigError("config: bad eval settings");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.raw = j;
  c.hash = hex32(crc32(j.dump()));
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

std::string default_config_path() { return LEGMPC_DEFAULT_CONFIG; }

}  // namespace legmpc
