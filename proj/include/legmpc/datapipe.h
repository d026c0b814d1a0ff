#ifndef LEGMPC_DATAPIPE_H_
#define LEGMPC_DATAPIPE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "legmpc/ddrive.h"
#include "legmpc/dynmodel.h"
#include "legmpc/features.h"
#include "legmpc/mpc.h"
#include "legmpc/simworld.h"

namespace legmpc {

// One random-action episode on a single terrain.
struct Rollout {
  std::uint32_t id = 0;
  std::string terrain;
  std::uint32_t terrain_index = 0;
  std::vector<StateVector> states;  // T + 1
  std::vector<Action> actions;      // T
  Eigen::VectorXd embedding;        // from the start-of-rollout patch
  std::uint64_t seed = 0;
};

// Bounds of the randomized start state.
struct StartDistribution {
  double arena_half_width = 1.0;  // x, y uniform in [-w, w]
  double battery_lo = 3.8;
  double battery_hi = 4.1;
};

struct CollectConfig {
  RobotParams robot;
  PidGains pid;
  ActionBox box;  // random actions are uniform in this box
  StartDistribution start;
  int n_rollouts = 200;
  int steps = 50;  // transitions per rollout
  int patch_size = 8;
  std::uint64_t seed = 0;
};

// Rollout i uses substream (seed, i) and is independent of the others, so
// rollouts are collected in parallel.
std::vector<Rollout> collect(const CollectConfig& cfg, const TerrainParams& terrain,
                             std::uint32_t terrain_index, const ProjectionMatrix* projection);

struct RolloutInfo {
  std::uint32_t terrain_index = 0;
  std::vector<float> embedding;
  std::vector<float> last_state;  // final state, so reassembly is exact

  bool operator==(const RolloutInfo&) const = default;
};

// Training pairs stored at file precision (f32). Pair p belongs to rollout
// rollout_of[p]; pairs of a rollout are contiguous and in time order.
struct Dataset {
  int state_dim = kStateDim;
  int action_dim = kActionDim;
  int embed_dim = 0;
  std::vector<float> inputs;   // size() x (state_dim + action_dim)
  std::vector<float> targets;  // size() x state_dim
  std::vector<std::uint32_t> rollout_of;
  std::vector<RolloutInfo> rollouts;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return rollout_of.size(); }
  int input_dim() const { return state_dim + action_dim; }
  bool operator==(const Dataset&) const = default;
};

Dataset slice(const std::vector<Rollout>& rollouts);

// Inverse of slice: the state sequence of every rollout, rounded to f32.
std::vector<std::vector<StateVector>> reassemble(const Dataset& data);

// Rollout-level split; every pair of a rollout lands on the same side.
std::pair<Dataset, Dataset> split(const Dataset& data, double ratio, std::uint64_t seed);

// Concatenates datasets, renumbering rollouts.
Dataset merge(const std::vector<Dataset>& parts);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

std::uint32_t dataset_hash(const Dataset& data);

// Seconds of robot time represented by the data.
double collection_seconds(const Dataset& data, double control_dt);

// Training columns for a model variant. OneHot models get one_hot(terrain
// index, n_terrains); Embedding models get the stored embedding, or
// override[rollout] when a precomputed table is supplied.
TrainingSet to_training_set(const Dataset& data, ModelVariant variant, int n_terrains,
                            const std::vector<Embedding>* override_table = nullptr);

}  // namespace legmpc

#endif  // LEGMPC_DATAPIPE_H_
