#include "legmpc/experiments.h"

#include <algorithm>
#include <cmath>

namespace legmpc {

ProjectionMatrix config_projection(const Config& cfg) {
  const int in = cfg.features.patch_size * cfg.features.patch_size * ImagePatch::kChannels;
  return make_projection(cfg.features.projection_seed, in, cfg.features.embed_dim);
}

Dataset collect_dataset(const Config& cfg, const std::string& terrain, int n_rollouts,
                        std::uint64_t seed) {
  const int index = cfg.terrain_index(terrain);
  CollectConfig cc;
  cc.robot = cfg.robot;
  cc.pid = cfg.pid;
  cc.box = cfg.action_box();
  cc.start = cfg.start;
  cc.n_rollouts = n_rollouts;
  cc.steps = cfg.steps;
  cc.patch_size = cfg.features.patch_size;
  cc.seed = seed;
  const ProjectionMatrix proj = config_projection(cfg);
  Dataset d = slice(collect(cc, cfg.terrain(terrain), static_cast<std::uint32_t>(index), &proj));
  d.metadata["config_hash"] = cfg.hash;
  d.metadata["seed"] = seed;
  d.metadata["abstraction"] = to_string(cfg.abstraction);
  d.metadata["presets"] = cfg.terrain_names();
  return d;
}

TrainResult train_variant(const Config& cfg, const Dataset& data, ModelVariant variant,
                          std::uint64_t seed, const std::vector<Embedding>* embeddings) {
  Architecture arch = cfg.architecture(variant);
  if (variant == ModelVariant::kEmbedding && embeddings && !embeddings->empty()) {
    arch.embed_dim = static_cast<int>((*embeddings)[0].values.size());
  }
  const TrainingSet set =
      to_training_set(data, variant, static_cast<int>(cfg.terrains.size()), embeddings);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  return train(set, arch, tc);
}

Controller Controller::baseline(const Config& cfg, std::string label) {
  Controller c;
  c.label = std::move(label);
  c.dd = cfg.dd;
  c.mpc = cfg.mpc;
  return c;
}

Controller Controller::planner(const Config& cfg, std::shared_ptr<const DynModel> model,
                               std::string label) {
  Controller c;
  c.label = std::move(label);
  c.model = std::move(model);
  c.dd = cfg.dd;
  c.mpc = cfg.mpc;
  return c;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base_seed, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(substream_seed(base_seed, static_cast<std::uint64_t>(i)));
  return out;
}

CellSummary summarize(const std::vector<RunRecord>& runs) {
  CellSummary s;
  if (runs.empty()) return s;
  s.controller = runs[0].controller;
  s.terrain = runs[0].terrain;
  s.path = runs[0].path;
  s.n = static_cast<int>(runs.size());
  for (const auto& r : runs) s.mean += r.cost;
  s.mean /= s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.cost - s.mean) * (r.cost - s.mean);
    s.std = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

Trajectory run_controller(const Config& cfg, const Controller& c, const std::string& terrain,
                          PathKind path, std::uint64_t seed, const PlanObserver& observer) {
  const TerrainParams& tp = cfg.terrain(terrain);
  const Waypoints w = make_path(path, cfg.eval.path_scale);
  if (c.is_baseline()) {
    DdRolloutConfig dc{cfg.robot, cfg.pid, c.dd, cfg.eval.duration, seed};
    return dd_rollout(dc, tp, w, c.mpc.weights);
  }
  MpcRolloutConfig mc{cfg.robot, cfg.pid, c.mpc, cfg.eval.duration, seed};
  EmbeddingProvider source;
  if (c.model->variant() == ModelVariant::kOneHot) {
    const int idx = cfg.terrain_index(terrain);
    const int n = static_cast<int>(cfg.terrains.size());
    if (c.model->arch().embed_dim != n) {
      throw ArtifactError("one-hot model expects " + std::to_string(c.model->arch().embed_dim) +
                          " terrains, config has " + std::to_string(n));
    }
    source = [idx, n](const WorldState&) { return one_hot(idx, n).values; };
  } else if (c.model->variant() == ModelVariant::kEmbedding && !c.terrain_embeddings.empty()) {
    const auto idx = static_cast<std::size_t>(cfg.terrain_index(terrain));
    if (idx >= c.terrain_embeddings.size()) {
      throw ArtifactError("no precomputed embedding for terrain '" + terrain + "'");
    }
    const Eigen::VectorXd e = c.terrain_embeddings[idx];
    if (e.size() != c.model->arch().embed_dim) {
      throw ArtifactError("precomputed embedding dimension does not match the model");
    }
    source = [e](const WorldState&) { return e; };
  } else if (c.model->variant() == ModelVariant::kEmbedding) {
    if (c.model->arch().embed_dim != cfg.features.embed_dim) {
      throw ArtifactError("embedding model dimension does not match the config's projection");
    }
    auto proj = std::make_shared<ProjectionMatrix>(config_projection(cfg));
    const int size = cfg.features.patch_size;
    source = [proj, &tp, size](const WorldState& ws) {
      return embed(render_patch(tp, ws, size), *proj).values;
    };
  }
  return mpc_rollout(mc, *c.model, tp, w, source, observer);
}

RunRecord run_once(const Config& cfg, const Controller& c, const std::string& terrain,
                   PathKind path, std::uint64_t seed, const PlanObserver& observer) {
  const Trajectory traj = run_controller(cfg, c, terrain, path, seed, observer);
  RunRecord r;
  r.controller = c.label;
  r.terrain = terrain;
  r.path = to_string(path);
  r.seed = seed;
  r.cost = traj.cost;
  if (!traj.states.empty()) {
    const Waypoints w = make_path(path, cfg.eval.path_scale);
    const SegmentProjection seg =
        closest_segment({traj.states.back()[kX], traj.states.back()[kY]}, w);
    r.final_perpendicular = seg.distance;
    r.progress = seg.arc;
  }
  return r;
}

std::vector<RunRecord> run_cell(const Config& cfg, const Controller& c, const std::string& terrain,
                                PathKind path, const std::vector<std::uint64_t>& seeds) {
  std::vector<RunRecord> runs(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::vector<int> kinds(seeds.size(), 0);  // 1 config, 2 artifact
  Controller inner = c;
  // Parallelism lives at the seed level here.
  inner.mpc.parallel = false;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(seeds.size()); ++i) {
    try {
      runs[i] = run_once(cfg, inner, terrain, path, seeds[i]);
    } catch (const ConfigError& e) {
      errors[i] = e.what();
      kinds[i] = 1;
    } catch (const ArtifactError& e) {
      errors[i] = e.what();
      kinds[i] = 2;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    // Keep the error category so callers can map it to an exit code.
    const std::string msg = c.label + " on " + terrain + "/" + to_string(path) + ": " + errors[i];
    if (kinds[i] == 1) throw ConfigError(msg);
    if (kinds[i] == 2) throw ArtifactError(msg);
    throw Error(msg);
  }
  return runs;
}

void ExperimentReport::add(const std::vector<RunRecord>& cell_runs) {
  cells.push_back(summarize(cell_runs));
  runs.insert(runs.end(), cell_runs.begin(), cell_runs.end());
}

const CellSummary& ExperimentReport::cell(const std::string& controller, const std::string& terrain,
                                          const std::string& path) const {
  for (const auto& c : cells) {
    if (c.controller == controller && c.terrain == terrain && c.path == path) return c;
  }
  throw Error("report: no cell " + controller + "/" + terrain + "/" + path);
}

std::vector<SpeedRow> compare_speed(const Config& cfg, std::shared_ptr<const DynModel> model,
                                    const std::string& terrain, PathKind path,
                                    const std::vector<double>& speeds,
                                    const std::vector<std::uint64_t>& seeds) {
  if (speeds.empty()) throw ConfigError("compare-speed: empty speed list");
  std::vector<SpeedRow> rows;
  for (double speed : speeds) {
    if (!(speed > cfg.robot.omega_min && speed <= cfg.robot.omega_max)) {
      throw ConfigError("compare-speed: speed " + std::to_string(speed) +
                        " outside the actuator range");
    }
    Controller dd = Controller::baseline(cfg);
    dd.dd.omega_nom = speed;
    Controller mpc = Controller::planner(cfg, model, "mpc");
    if (cfg.abstraction == ActionAbstraction::kVelocitySetpoint) {
      mpc.mpc.box.lo = std::max(cfg.robot.omega_min, speed * (1.0 - cfg.eval.speed_band));
      mpc.mpc.box.hi = std::min(cfg.robot.omega_max, speed * (1.0 + cfg.eval.speed_band));
    }
    SpeedRow row;
    row.omega_nom = speed;
    row.dd = summarize(run_cell(cfg, dd, terrain, path, seeds));
    row.mpc = summarize(run_cell(cfg, mpc, terrain, path, seeds));
    rows.push_back(row);
  }
  return rows;
}

CostMatrix cross_terrain_matrix(const Config& cfg, const std::vector<Controller>& controllers,
                                const std::vector<std::string>& terrains, PathKind path,
                                const std::vector<std::uint64_t>& seeds) {
  CostMatrix m;
  m.cols = terrains;
  for (const auto& c : controllers) {
    m.rows.push_back(c.label);
    std::vector<CellSummary> row;
    for (const auto& t : terrains) row.push_back(summarize(run_cell(cfg, c, t, path, seeds)));
    m.cells.push_back(std::move(row));
  }
  return m;
}

}  // namespace legmpc
