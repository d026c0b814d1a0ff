#ifndef LEGMPC_CONFIG_H_
#define LEGMPC_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "legmpc/datapipe.h"
#include "legmpc/ddrive.h"
#include "legmpc/dynmodel.h"
#include "legmpc/mpc.h"
#include "legmpc/simworld.h"

namespace legmpc {

struct FeatureConfig {
  int embed_dim = 32;
  int patch_size = 8;
  std::uint64_t projection_seed = 7;
};

struct EvalConfig {
  int n_seeds = 10;
  double duration = 5.0;    // s per evaluation rollout
  double path_scale = 1.0;  // m
  std::vector<double> speeds;  // nominal leg speeds for the speed sweep
  std::string speed_terrain = "styrofoam";
  double speed_band = 0.5;  // MPC box = omega_nom * [1 - band, 1 + band]
};

// Everything a run depends on, parsed from one JSON file.
struct Config {
  RobotParams robot;
  std::vector<TerrainParams> terrains;
  PidGains pid;
  DdParams dd;
  MpcConfig mpc;
  ActionAbstraction abstraction = ActionAbstraction::kVelocitySetpoint;
  double pwm_lo = 0.0;
  double pwm_hi = 1.0;
  StartDistribution start;
  int rollouts = 200;
  int steps = 50;
  Architecture plain;
  Architecture conditioned;  // variant/embed_dim filled in per use
  TrainConfig train;
  FeatureConfig features;
  EvalConfig eval;

  nlohmann::json raw;
  std::string hash;  // hex CRC32 of the canonical JSON

  const TerrainParams& terrain(const std::string& name) const;
  int terrain_index(const std::string& name) const;
  std::string terrain_names() const;  // "a|b|c"
  ActionBox action_box() const;       // full actuator box for the abstraction
  Architecture architecture(ModelVariant variant) const;
};

Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

// Path of the default config shipped with the repository.
std::string default_config_path();

}  // namespace legmpc

#endif  // LEGMPC_CONFIG_H_
