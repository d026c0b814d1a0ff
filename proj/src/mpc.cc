#include "legmpc/mpc.h"

#include <cmath>
#include <limits>

namespace legmpc {

void MpcConfig::validate() const {
  if (candidates < 1 || horizon < 1) throw ConfigError("mpc: candidates and horizon must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("mpc: dt must be positive");
  if (!(weights.perpendicular >= 0 && weights.forward >= 0 && weights.heading >= 0)) {
    throw ConfigError("mpc: cost weights must be non-negative");
  }
  if (!(box.hi >= box.lo)) throw ConfigError("mpc: empty action box");
}

PathGeometry path_geometry(const StateVector& s, const Waypoints& w, double prev_arc) {
  const SegmentProjection seg = closest_segment({s[kX], s[kY]}, w);
  PathGeometry g;
  g.perpendicular = seg.distance;
  g.heading = std::abs(wrap_to_pi(seg.line_angle - yaw_of(s)));
  g.arc = seg.arc;
  g.forward = seg.arc - prev_arc;
  return g;
}

double path_arc(const StateVector& s, const Waypoints& w) {
  return closest_segment({s[kX], s[kY]}, w).arc;
}

double step_cost(const PathGeometry& g, const CostWeights& weights) {
  return weights.perpendicular * g.perpendicular + weights.heading * g.heading -
         weights.forward * g.forward;
}

std::vector<double> path_step_costs(std::span<const StateVector> states, const Waypoints& w,
                                    const CostWeights& weights) {
  std::vector<double> costs;
  if (states.size() < 2) return costs;
  costs.reserve(states.size() - 1);
  double prev_arc = path_arc(states[0], w);
  for (std::size_t t = 1; t < states.size(); ++t) {
    const PathGeometry g = path_geometry(states[t], w, prev_arc);
    costs.push_back(step_cost(g, weights));
    prev_arc = g.arc;
  }
  return costs;
}

double path_cost(std::span<const StateVector> states, const Waypoints& w,
                 const CostWeights& weights) {
  double total = 0.0;
  for (double c : path_step_costs(states, w, weights)) total += c;
  return total;
}

CandidateSet sample_sequences(std::uint64_t step_seed, const MpcConfig& cfg) {
  cfg.validate();
  CandidateSet set;
  set.count = cfg.candidates;
  set.horizon = cfg.horizon;
  set.actions.resize(static_cast<std::size_t>(cfg.candidates) * cfg.horizon);
  std::uniform_real_distribution<double> dist(cfg.box.lo, cfg.box.hi);
  for (int i = 0; i < cfg.candidates; ++i) {
    Rng rng(substream_seed(step_seed, static_cast<std::uint64_t>(i)));
    for (int h = 0; h < cfg.horizon; ++h) {
      Action& a = set.actions[static_cast<std::size_t>(i) * cfg.horizon + h];
      a.left = dist(rng);
      a.right = dist(rng);
      a.abstraction = cfg.box.abstraction;
    }
  }
  return set;
}

SequenceEval evaluate_sequence(const Predictor& model, const StateVector& s0,
                               std::span<const Action> seq, const Waypoints& w,
                               const MpcConfig& cfg, bool keep_states) {
  SequenceEval out;
  if (keep_states) out.predicted.reserve(seq.size());
  double prev_arc = path_arc(s0, w);
  StateVector s = s0;
  for (const Action& a : seq) {
    s = model.predict_next(s, a);
    bool finite = true;
    for (double v : s) finite = finite && std::isfinite(v);
    if (!finite) {
      out.valid = false;
      out.cost = std::numeric_limits<double>::infinity();
      return out;
    }
    if (keep_states) out.predicted.push_back(s);
    const PathGeometry g = path_geometry(s, w, prev_arc);
    out.cost += step_cost(g, cfg.weights);
    prev_arc = g.arc;
  }
  if (!std::isfinite(out.cost)) {
    out.valid = false;
    out.cost = std::numeric_limits<double>::infinity();
  }
  return out;
}

namespace {

// Scores candidates [first, first + kTile) (clamped to the set) into costs.
// Slots past the end repeat the last candidate and are discarded.
void score_tile(const Predictor& model, const StateVector& s, const Waypoints& w,
                const MpcConfig& cfg, const CandidateSet& candidates, int first,
                std::vector<double>& costs) {
  constexpr int kT = Predictor::kTile;
  int idx[kT];
  StateVector cur[kT];
  StateVector next[kT];
  Action act[kT];
  double prev_arc[kT];
  double cost[kT];
  bool valid[kT];
  const double arc0 = path_arc(s, w);
  for (int t = 0; t < kT; ++t) {
    idx[t] = std::min(first + t, candidates.count - 1);
    cur[t] = s;
    prev_arc[t] = arc0;
    cost[t] = 0.0;
    valid[t] = true;
  }
  for (int h = 0; h < candidates.horizon; ++h) {
    for (int t = 0; t < kT; ++t) act[t] = candidates.sequence(idx[t])[h];
    model.predict_tile(cur, act, next);
    for (int t = 0; t < kT; ++t) {
      if (!valid[t]) continue;
      bool finite = true;
      for (double v : next[t]) finite = finite && std::isfinite(v);
      if (!finite) {
        valid[t] = false;
        continue;
      }
      const PathGeometry g = path_geometry(next[t], w, prev_arc[t]);
      cost[t] += step_cost(g, cfg.weights);
      prev_arc[t] = g.arc;
      cur[t] = next[t];
    }
  }
  for (int t = 0; t < kT && first + t < candidates.count; ++t) {
    costs[static_cast<std::size_t>(first + t)] =
        valid[t] && std::isfinite(cost[t]) ? cost[t] : std::numeric_limits<double>::infinity();
  }
}

}  // namespace

PlanResult plan(const Predictor& model, const StateVector& s, const Waypoints& w,
                const MpcConfig& cfg, const CandidateSet& candidates, ExecPolicy policy) {
  if (candidates.count < 1 || candidates.horizon < 1) throw Error("plan: empty candidate set");
  PlanResult out;
  out.costs.assign(static_cast<std::size_t>(candidates.count), 0.0);
  const int count = candidates.count;
  const int tiles = (count + Predictor::kTile - 1) / Predictor::kTile;

  if (policy == ExecPolicy::kParallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < tiles; ++i) {
      score_tile(model, s, w, cfg, candidates, i * Predictor::kTile, out.costs);
    }
  } else {
    for (int i = 0; i < tiles; ++i) {
      score_tile(model, s, w, cfg, candidates, i * Predictor::kTile, out.costs);
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    if (!std::isfinite(out.costs[i])) {
      ++out.disqualified;
    } else if (out.costs[i] < best) {
      best = out.costs[i];
      out.best_index = i;
    }
  }
  if (out.best_index < 0) {
    throw PlanningError("plan: all " + std::to_string(count) + " candidates disqualified");
  }
  out.best_cost = best;
  out.action = candidates.sequence(out.best_index)[0];
  return out;
}

PlanResult mpc_step(const Predictor& model, const StateVector& s, const Waypoints& w,
                    const MpcConfig& cfg, std::uint64_t step_seed) {
  const CandidateSet candidates = sample_sequences(step_seed, cfg);
  return plan(model, s, w, cfg, candidates,
              cfg.parallel ? ExecPolicy::kParallel : ExecPolicy::kSerial);
}

Trajectory mpc_rollout(const MpcRolloutConfig& cfg, const DynModel& model,
                       const TerrainParams& terrain, const Waypoints& path,
                       const EmbeddingProvider& embedding, const PlanObserver& observer) {
  cfg.mpc.validate();
  path.validate();
  const int steps = static_cast<int>(std::floor(cfg.duration / cfg.robot.control_dt + 1e-9));
  Trajectory traj;
  if (steps <= 0) return traj;

  WorldState ws = start_state(cfg.robot);
  std::optional<Eigen::VectorXd> e;
  if (is_conditioned(model.variant())) {
    if (!embedding) throw Error("mpc_rollout: conditioned model without an embedding source");
    e = embedding(ws);
  }
  const Predictor predictor(model, e);

  Rng sim_rng(substream_seed(cfg.seed, 0));
  const std::uint64_t plan_seed = substream_seed(cfg.seed, 1);
  LegFirmware firmware(cfg.robot, cfg.pid);
  traj.world.push_back(ws);
  traj.states.push_back(observe(ws, cfg.robot));
  for (int t = 0; t < steps; ++t) {
    const StateVector& s = traj.states.back();
    const PlanResult pr = mpc_step(predictor, s, path, cfg.mpc, substream_seed(plan_seed, t));
    if (observer) observer(t, s, pr);
    ws = firmware.execute(ws, pr.action, terrain, sim_rng);
    traj.actions.push_back(pr.action);
    traj.world.push_back(ws);
    traj.states.push_back(observe(ws, cfg.robot));
  }
  traj.step_costs = path_step_costs(traj.states, path, cfg.mpc.weights);
  for (double c : traj.step_costs) traj.cost += c;
  return traj;
}

}  // namespace legmpc
