#ifndef LEGMPC_MPC_H_
#define LEGMPC_MPC_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "legmpc/ddrive.h"
#include "legmpc/dynmodel.h"
#include "legmpc/simworld.h"

namespace legmpc {

struct CostWeights {
  double perpendicular = 50.0;  // f_p
  double forward = 10.0;        // f_f
  double heading = 5.0;         // f_h
};

struct ActionBox {
  double lo = 0.0;
  double hi = 60.0;
  ActionAbstraction abstraction = ActionAbstraction::kVelocitySetpoint;
};

struct MpcConfig {
  int candidates = 500;  // K
  int horizon = 4;       // H
  double dt = 0.1;
  CostWeights weights;
  ActionBox box;
  bool parallel = true;

  void validate() const;
};

struct PathGeometry {
  double perpendicular = 0.0;  // p >= 0
  double heading = 0.0;        // h in [0, pi]
  double forward = 0.0;        // f, signed progress since prev_arc
  double arc = 0.0;            // arc coordinate of the projection
};

PathGeometry path_geometry(const StateVector& s, const Waypoints& w, double prev_arc);

// Arc-length coordinate of the projection of s onto the path.
double path_arc(const StateVector& s, const Waypoints& w);

// f_p * p + f_h * h - f_f * f
double step_cost(const PathGeometry& g, const CostWeights& weights);

// Per-step costs of a realized trajectory: entry t scores states[t + 1] with
// progress measured from states[t].
std::vector<double> path_step_costs(std::span<const StateVector> states, const Waypoints& w,
                                    const CostWeights& weights);
double path_cost(std::span<const StateVector> states, const Waypoints& w,
                 const CostWeights& weights);

// K x H candidate action sequences, row-major by candidate.
struct CandidateSet {
  int count = 0;
  int horizon = 0;
  std::vector<Action> actions;

  std::span<const Action> sequence(int i) const {
    return {actions.data() + static_cast<std::size_t>(i) * horizon,
            static_cast<std::size_t>(horizon)};
  }
};

// Candidate i is drawn from substream (step_seed, i).
CandidateSet sample_sequences(std::uint64_t step_seed, const MpcConfig& cfg);

struct SequenceEval {
  double cost = 0.0;
  bool valid = true;  // false: non-finite prediction, cost = +inf
  std::vector<StateVector> predicted;
};

SequenceEval evaluate_sequence(const Predictor& model, const StateVector& s0,
                               std::span<const Action> seq, const Waypoints& w,
                               const MpcConfig& cfg, bool keep_states = true);

enum class ExecPolicy { kSerial, kParallel };

struct PlanResult {
  Action action;
  int best_index = -1;
  double best_cost = 0.0;
  int disqualified = 0;
  std::vector<double> costs;  // per candidate
};

// Scores every candidate and picks the lowest cost, ties to the lowest index.
// The serial path is the reference; the OpenMP path must agree bit for bit.
// Throws PlanningError when every candidate is disqualified.
PlanResult plan(const Predictor& model, const StateVector& s, const Waypoints& w,
                const MpcConfig& cfg, const CandidateSet& candidates, ExecPolicy policy);

class PlanningError : public Error {
 public:
  using Error::Error;
};

PlanResult mpc_step(const Predictor& model, const StateVector& s, const Waypoints& w,
                    const MpcConfig& cfg, std::uint64_t step_seed);

// Produces the terrain vector for a conditioned model from the start state.
using EmbeddingProvider = std::function<Eigen::VectorXd(const WorldState&)>;

struct MpcRolloutConfig {
  RobotParams robot;
  PidGains pid;
  MpcConfig mpc;
  double duration = 6.0;
  std::uint64_t seed = 0;
};

// Called after every planning step (diagnostics streaming).
using PlanObserver = std::function<void(int step, const StateVector& s, const PlanResult& plan)>;

Trajectory mpc_rollout(const MpcRolloutConfig& cfg, const DynModel& model,
                       const TerrainParams& terrain, const Waypoints& path,
                       const EmbeddingProvider& embedding = {}, const PlanObserver& observer = {});

}  // namespace legmpc

#endif  // LEGMPC_MPC_H_
