#include "legmpc/datapipe.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace legmpc {

namespace {

WorldState random_start(const CollectConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  WorldState ws;
  const double w = cfg.start.arena_half_width;
  ws.x = uniform(-w, w);
  ws.y = uniform(-w, w);
  ws.yaw = wrap_to_pi(uniform(-kPi, kPi));
  ws.leg_phase_l = uniform(0.0, kTwoPi);
  ws.leg_phase_r = uniform(0.0, kTwoPi);
  ws.battery_v = uniform(cfg.start.battery_lo, cfg.start.battery_hi);
  ws.t = uniform(0.0, 1.0);  // desynchronizes the roll oscillation
  return ws;
}

}  // namespace

std::vector<Rollout> collect(const CollectConfig& cfg, const TerrainParams& terrain,
                             std::uint32_t terrain_index, const ProjectionMatrix* projection) {
  if (cfg.n_rollouts < 1) throw ConfigError("collect: need at least one rollout");
  if (cfg.steps < 1) throw ConfigError("collect: need at least one step per rollout");
  terrain.validate();
  cfg.robot.validate();
  std::vector<Rollout> out(static_cast<std::size_t>(cfg.n_rollouts));
  std::vector<std::string> failures(out.size());

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.n_rollouts; ++i) {
    Rollout& r = out[static_cast<std::size_t>(i)];
    r.id = static_cast<std::uint32_t>(i);
    r.terrain = terrain.name;
    r.terrain_index = terrain_index;
    r.seed = substream_seed(cfg.seed, static_cast<std::uint64_t>(i));
    try {
      Rng rng(r.seed);
      Rng action_rng(substream_seed(r.seed, 1));
      std::uniform_real_distribution<double> act(cfg.box.lo, cfg.box.hi);
      LegFirmware firmware(cfg.robot, cfg.pid);
      WorldState ws = random_start(cfg, rng);
      if (projection) {
        r.embedding = embed(render_patch(terrain, ws, cfg.patch_size), *projection).values;
      }
      r.states.reserve(static_cast<std::size_t>(cfg.steps) + 1);
      r.states.push_back(observe(ws, cfg.robot));
      for (int t = 0; t < cfg.steps; ++t) {
        Action a;
        a.left = act(action_rng);
        a.right = act(action_rng);
        a.abstraction = cfg.box.abstraction;
        ws = firmware.execute(ws, a, terrain, rng);
        r.actions.push_back(a);
        r.states.push_back(observe(ws, cfg.robot));
      }
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      throw Error("collect: rollout " + std::to_string(i) + " failed: " + failures[i]);
    }
  }
  return out;
}

Dataset slice(const std::vector<Rollout>& rollouts) {
  Dataset d;
  d.embed_dim = rollouts.empty() ? 0 : static_cast<int>(rollouts[0].embedding.size());
  std::set<std::string> terrains;
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    const Rollout& ro = rollouts[r];
    if (ro.states.size() != ro.actions.size() + 1) {
      throw Error("slice: rollout " + std::to_string(ro.id) + " has inconsistent lengths");
    }
    if (static_cast<int>(ro.embedding.size()) != d.embed_dim) {
      throw Error("slice: rollouts disagree on embedding dimension");
    }
    terrains.insert(ro.terrain);
    RolloutInfo info;
    info.terrain_index = ro.terrain_index;
    for (double v : ro.embedding) info.embedding.push_back(static_cast<float>(v));
    for (double v : ro.states.back()) info.last_state.push_back(static_cast<float>(v));
    d.rollouts.push_back(std::move(info));
    for (std::size_t t = 0; t < ro.actions.size(); ++t) {
      const StateVector& s = ro.states[t];
      const StateVector& s1 = ro.states[t + 1];
      for (double v : s) d.inputs.push_back(static_cast<float>(v));
      d.inputs.push_back(static_cast<float>(ro.actions[t].left));
      d.inputs.push_back(static_cast<float>(ro.actions[t].right));
      for (int i = 0; i < kStateDim; ++i) {
        // Difference of the stored (f32) states.
        const double a = static_cast<float>(s[i]);
        const double b = static_cast<float>(s1[i]);
        d.targets.push_back(static_cast<float>(b - a));
      }
      d.rollout_of.push_back(static_cast<std::uint32_t>(r));
    }
  }
  d.metadata["terrains"] = std::vector<std::string>(terrains.begin(), terrains.end());
  d.metadata["rollouts"] = rollouts.size();
  return d;
}

std::vector<std::vector<StateVector>> reassemble(const Dataset& data) {
  std::vector<std::vector<StateVector>> out(data.rollouts.size());
  const int in = data.input_dim();
  for (std::size_t p = 0; p < data.size(); ++p) {
    StateVector s{};
    for (int i = 0; i < data.state_dim; ++i) s[i] = data.inputs[p * in + i];
    out[data.rollout_of[p]].push_back(s);
  }
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto& last = data.rollouts[r].last_state;
    if (static_cast<int>(last.size()) != data.state_dim) {
      throw ArtifactError("reassemble: rollout " + std::to_string(r) + " has no final state");
    }
    StateVector s{};
    for (int i = 0; i < data.state_dim; ++i) s[i] = last[static_cast<std::size_t>(i)];
    out[r].push_back(s);
  }
  return out;
}

namespace {

Dataset subset(const Dataset& data, const std::vector<std::uint32_t>& keep_rollouts) {
  Dataset d;
  d.state_dim = data.state_dim;
  d.action_dim = data.action_dim;
  d.embed_dim = data.embed_dim;
  d.metadata = data.metadata;
  std::vector<std::int64_t> remap(data.rollouts.size(), -1);
  for (std::uint32_t r : keep_rollouts) {
    remap[r] = static_cast<std::int64_t>(d.rollouts.size());
    d.rollouts.push_back(data.rollouts[r]);
  }
  const int in = data.input_dim();
  // Keep rollouts contiguous in their new order.
  for (std::uint32_t r : keep_rollouts) {
    for (std::size_t p = 0; p < data.size(); ++p) {
      if (data.rollout_of[p] != r) continue;
      d.inputs.insert(d.inputs.end(), data.inputs.begin() + p * in,
                      data.inputs.begin() + (p + 1) * in);
      d.targets.insert(d.targets.end(), data.targets.begin() + p * data.state_dim,
                       data.targets.begin() + (p + 1) * data.state_dim);
      d.rollout_of.push_back(static_cast<std::uint32_t>(remap[r]));
    }
  }
  d.metadata["rollouts"] = d.rollouts.size();
  return d;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split: ratio must be in (0, 1)");
  if (data.rollouts.size() < 2) throw Error("split: need at least two rollouts");
  std::vector<std::uint32_t> ids(data.rollouts.size());
  for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const GroupSplit gs = split_by_group(ids, ratio, seed);
  std::vector<std::uint32_t> train_ids;
  std::vector<std::uint32_t> val_ids;
  for (auto i : gs.train) train_ids.push_back(ids[static_cast<std::size_t>(i)]);
  for (auto i : gs.val) val_ids.push_back(ids[static_cast<std::size_t>(i)]);
  return {subset(data, train_ids), subset(data, val_ids)};
}

Dataset merge(const std::vector<Dataset>& parts) {
  Dataset d;
  if (parts.empty()) return d;
  d.state_dim = parts[0].state_dim;
  d.action_dim = parts[0].action_dim;
  d.embed_dim = parts[0].embed_dim;
  std::set<std::string> terrains;
  nlohmann::json sources = nlohmann::json::array();
  for (const Dataset& p : parts) {
    if (p.state_dim != d.state_dim || p.action_dim != d.action_dim || p.embed_dim != d.embed_dim) {
      throw ArtifactError("merge: datasets have mismatched dimensions");
    }
    const auto offset = static_cast<std::uint32_t>(d.rollouts.size());
    d.inputs.insert(d.inputs.end(), p.inputs.begin(), p.inputs.end());
    d.targets.insert(d.targets.end(), p.targets.begin(), p.targets.end());
    for (std::uint32_t r : p.rollout_of) d.rollout_of.push_back(r + offset);
    d.rollouts.insert(d.rollouts.end(), p.rollouts.begin(), p.rollouts.end());
    if (p.metadata.contains("terrains")) {
      for (const auto& t : p.metadata["terrains"]) terrains.insert(t.get<std::string>());
    }
    sources.push_back(p.metadata);
  }
  d.metadata["terrains"] = std::vector<std::string>(terrains.begin(), terrains.end());
  d.metadata["rollouts"] = d.rollouts.size();
  d.metadata["sources"] = sources;
  return d;
}

namespace {

constexpr std::string_view kDatasetMagic = "RCHD";
constexpr std::uint32_t kDatasetVersion = 2;

ByteWriter serialize(const Dataset& d) {
  ByteWriter w;
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(d.state_dim));
  w.u32(static_cast<std::uint32_t>(d.action_dim));
  w.u32(static_cast<std::uint32_t>(d.embed_dim));
  w.u64(d.size());
  w.u32(static_cast<std::uint32_t>(d.rollouts.size()));
  const int in = d.input_dim();
  for (std::size_t p = 0; p < d.size(); ++p) {
    for (int i = 0; i < in; ++i) w.f32(d.inputs[p * in + i]);
    for (int i = 0; i < d.state_dim; ++i) w.f32(d.targets[p * d.state_dim + i]);
  }
  for (std::uint32_t r : d.rollout_of) w.u32(r);
  for (const RolloutInfo& info : d.rollouts) {
    if (static_cast<int>(info.last_state.size()) != d.state_dim) {
      throw Error("save_dataset: rollout without a final state");
    }
    w.u32(info.terrain_index);
    for (float v : info.embedding) w.f32(v);
    for (float v : info.last_state) w.f32(v);
  }
  const std::string meta = d.metadata.dump();
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  w.seal();
  return w;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
  if (data.inputs.size() != data.size() * data.input_dim() ||
      data.targets.size() != data.size() * data.state_dim) {
    throw Error("save_dataset: inconsistent dataset");
  }
  serialize(data).write_file(path);
}

Dataset load_dataset(const std::string& path) {
  ByteReader r = ByteReader::from_file(path, "dataset '" + path + "'");
  r.expect_magic(kDatasetMagic);
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw ArtifactError(r.what() + ": unsupported version " + std::to_string(version));
  }
  Dataset d;
  d.state_dim = static_cast<int>(r.u32());
  d.action_dim = static_cast<int>(r.u32());
  d.embed_dim = static_cast<int>(r.u32());
  if (d.state_dim != kStateDim || d.action_dim != kActionDim || d.embed_dim < 0 ||
      d.embed_dim > 1 << 16) {
    throw ArtifactError(r.what() + ": unexpected dimensions");
  }
  const std::uint64_t n = r.u64();
  const std::uint32_t n_rollouts = r.u32();
  const int in = d.input_dim();
  if (n > (1ull << 32)) throw ArtifactError(r.what() + ": implausible pair count");
  d.inputs.resize(n * in);
  d.targets.resize(n * d.state_dim);
  for (std::uint64_t p = 0; p < n; ++p) {
    for (int i = 0; i < in; ++i) d.inputs[p * in + i] = r.f32();
    for (int i = 0; i < d.state_dim; ++i) d.targets[p * d.state_dim + i] = r.f32();
  }
  d.rollout_of.resize(n);
  for (auto& v : d.rollout_of) {
    v = r.u32();
    if (v >= n_rollouts) throw ArtifactError(r.what() + ": pair references unknown rollout");
  }
  d.rollouts.resize(n_rollouts);
  for (auto& info : d.rollouts) {
    info.terrain_index = r.u32();
    info.embedding.resize(static_cast<std::size_t>(d.embed_dim));
    for (float& v : info.embedding) v = r.f32();
    info.last_state.resize(static_cast<std::size_t>(d.state_dim));
    for (float& v : info.last_state) v = r.f32();
  }
  const std::uint32_t meta_len = r.u32();
  std::string meta(meta_len, '\0');
  r.bytes(meta.data(), meta.size());
  if (!r.at_end()) throw ArtifactError(r.what() + ": trailing bytes");
  try {
    d.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(r.what() + ": bad metadata: " + e.what());
  }
  return d;
}

std::uint32_t dataset_hash(const Dataset& data) {
  return crc32(std::span<const std::byte>(serialize(data).buffer()));
}

double collection_seconds(const Dataset& data, double control_dt) {
  return static_cast<double>(data.size()) * control_dt;
}

TrainingSet to_training_set(const Dataset& data, ModelVariant variant, int n_terrains,
                            const std::vector<Embedding>* override_table) {
  int k = 0;
  if (variant == ModelVariant::kOneHot) k = n_terrains;
  if (variant == ModelVariant::kEmbedding) {
    k = override_table ? (override_table->empty() ? 0 : static_cast<int>((*override_table)[0].values.size()))
                       : data.embed_dim;
    if (k < 1) throw ArtifactError("to_training_set: dataset carries no embeddings");
    if (override_table && override_table->size() != data.rollouts.size()) {
      throw ArtifactError("to_training_set: embedding table has " +
                          std::to_string(override_table->size()) + " rows, dataset has " +
                          std::to_string(data.rollouts.size()) + " rollouts");
    }
  }
  const int in = data.input_dim();
  const auto n = static_cast<Eigen::Index>(data.size());
  TrainingSet set;
  set.data.inputs.resize(in + k, n);
  set.data.targets.resize(data.state_dim, n);
  set.group = data.rollout_of;
  for (Eigen::Index p = 0; p < n; ++p) {
    for (int i = 0; i < in; ++i) set.data.inputs(i, p) = data.inputs[p * in + i];
    for (int i = 0; i < data.state_dim; ++i) {
      set.data.targets(i, p) = data.targets[p * data.state_dim + i];
    }
    const std::uint32_t r = data.rollout_of[static_cast<std::size_t>(p)];
    if (variant == ModelVariant::kOneHot) {
      set.data.inputs.col(p).tail(k) =
          one_hot(static_cast<int>(data.rollouts[r].terrain_index), n_terrains).values;
    } else if (variant == ModelVariant::kEmbedding) {
      if (override_table) {
        if ((*override_table)[r].values.size() != k) {
          throw ArtifactError("to_training_set: mixed embedding dimensions");
        }
        set.data.inputs.col(p).tail(k) = (*override_table)[r].values;
      } else {
        for (int j = 0; j < k; ++j) set.data.inputs(in + j, p) = data.rollouts[r].embedding[j];
      }
    }
  }
  return set;
}

}  // namespace legmpc
