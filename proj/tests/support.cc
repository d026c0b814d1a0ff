#include "support.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

namespace legmpc::check {

Architecture tiny_arch(ModelVariant v, int state_dim) {
  Architecture a;
  a.variant = v;
  a.state_dim = state_dim;
  a.action_dim = kActionDim;
  a.hidden = {8, 8};
  a.fusion_width = 4;
  a.post_fusion = {8};
  a.embed_dim = is_conditioned(v) ? 2 : 0;
  return a;
}

DynModel random_model(const Architecture& arch, std::uint64_t seed) {
  DynModel m(arch, seed);
  Rng rng(substream_seed(seed, 99));
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (Eigen::Index i = 0; i < m.params().size(); ++i) {
    // Non-zero biases so every unit sees a generic operating point.
    m.params()[i] += 0.1 * n(rng);
  }
  NormStats& ns = m.norm();
  for (Eigen::Index i = 0; i < ns.mean_in.size(); ++i) {
    ns.mean_in[i] = 0.3 * n(rng);
    ns.std_in[i] = u(rng);
  }
  for (Eigen::Index i = 0; i < ns.mean_out.size(); ++i) {
    ns.mean_out[i] = 0.3 * n(rng);
    ns.std_out[i] = u(rng);
  }
  const int k = arch.embed_dim;
  if (k > 0) ns.mean_in.tail(k).setZero();
  return m;
}

Batch random_batch(const Architecture& arch, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Batch b;
  b.inputs.resize(arch.column_dim(), n);
  b.targets.resize(arch.state_dim, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < b.inputs.rows(); ++r) b.inputs(r, c) = dist(rng);
    for (Eigen::Index r = 0; r < b.targets.rows(); ++r) b.targets(r, c) = dist(rng);
  }
  return b;
}

long double reference_loss(const DynModel& model, const Batch& batch) {
  using Vec = std::vector<long double>;
  const Architecture& arch = model.arch();
  const NormStats& ns = model.norm();
  const Eigen::VectorXd& theta = model.params();
  const int in_dim = arch.input_dim();
  const int k = static_cast<int>(arch.column_dim()) - in_dim;
  long double total = 0.0L;
  for (Eigen::Index c = 0; c < batch.size(); ++c) {
    Vec x(static_cast<std::size_t>(arch.column_dim()));
    for (std::size_t r = 0; r < x.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      x[r] = (static_cast<long double>(batch.inputs(i, c)) - ns.mean_in[i]) / ns.std_in[i];
    }
    const Vec e(x.begin() + in_dim, x.end());
    Vec a(x.begin(), x.begin() + in_dim);
    for (int l = 0; l < static_cast<int>(model.layers().size()); ++l) {
      const DenseLayer& L = model.layers()[l];
      if (l == model.fusion_layer()) {
        Vec fused(a.size() * static_cast<std::size_t>(k));
        for (std::size_t i = 0; i < a.size(); ++i) {
          for (int j = 0; j < k; ++j) fused[i * k + j] = a[i] * e[j];
        }
        a = std::move(fused);
      }
      Vec z(static_cast<std::size_t>(L.out));
      for (int o = 0; o < L.out; ++o) {
        long double acc = theta[static_cast<Eigen::Index>(L.offset + static_cast<std::size_t>(L.in) * L.out + o)];
        for (int i = 0; i < L.in; ++i) {
          acc += static_cast<long double>(theta[static_cast<Eigen::Index>(L.offset + static_cast<std::size_t>(i) * L.out + o)]) *
                 a[static_cast<std::size_t>(i)];
        }
        z[static_cast<std::size_t>(o)] = L.relu ? std::max(acc, 0.0L) : acc;
      }
      a = std::move(z);
    }
    for (int r = 0; r < arch.state_dim; ++r) {
      const long double t = (static_cast<long double>(batch.targets(r, c)) - ns.mean_out[r]) / ns.std_out[r];
      const long double d = a[static_cast<std::size_t>(r)] - t;
      total += d * d;
    }
  }
  return 0.5L * total / static_cast<long double>(batch.size());
}

GradCheck gradient_check(const DynModel& model, const Batch& batch, double h) {
  const LossGradient lg = loss_and_gradient(model, batch);
  DynModel probe = model;
  GradCheck out;
  for (Eigen::Index i = 0; i < probe.params().size(); ++i) {
    const double keep = probe.params()[i];
    const double hi = keep + h;
    const double lo = keep - h;
    probe.params()[i] = hi;
    const long double up = reference_loss(probe, batch);
    probe.params()[i] = lo;
    const long double down = reference_loss(probe, batch);
    probe.params()[i] = keep;
    // Divide by the step actually taken, which rounding may move off 2h.
    const double fd = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
    const double g = lg.grad[i];
    const double abs_err = std::abs(g - fd);
    // The floor keeps parameters whose true derivative is ~0 from dividing
    // rounding noise by rounding noise.
    const double denom = std::max({std::abs(g), std::abs(fd), 1e-6});
    out.max_abs = std::max(out.max_abs, abs_err);
    out.max_rel = std::max(out.max_rel, abs_err / denom);
  }
  return out;
}

DynModel random_planner_model(std::uint64_t seed, ModelVariant v) {
  Architecture a = tiny_arch(v, kStateDim);
  DynModel m = random_model(a, seed);
  // Keep predicted deltas small so rollouts over the horizon stay sane.
  m.norm().std_out *= 0.05;
  m.norm().mean_out *= 0.05;
  return m;
}

StateVector random_state(Rng& rng) {
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> leg(0.0, 40.0);
  WorldState ws;
  ws.x = pos(rng);
  ws.y = 0.3 * pos(rng);
  ws.yaw = 0.5 * ang(rng);
  ws.leg_vel_l = leg(rng);
  ws.leg_vel_r = leg(rng);
  ws.v_body = 0.004 * (ws.leg_vel_l + ws.leg_vel_r);
  ws.leg_phase_l = ang(rng) + kPi;
  ws.leg_phase_r = ang(rng) + kPi;
  ws.roll = 0.1 * pos(rng);
  ws.pitch = 0.05 * pos(rng);
  return observe(ws, RobotParams{});
}

ArgminTrial argmin_trial(std::uint64_t seed) {
  Rng rng(seed);
  const int horizon = 1 + static_cast<int>(rng() % 4);
  int full = 1;
  for (int h = 0; h < horizon; ++h) full *= 3;
  const int count = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(full));

  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.candidates = count;
  const double levels[3] = {cfg.box.lo, 0.5 * (cfg.box.lo + cfg.box.hi), cfg.box.hi};
  CandidateSet set;
  set.count = count;
  set.horizon = horizon;
  for (int i = 0; i < count; ++i) {
    for (int h = 0; h < horizon; ++h) {
      Action a;
      a.left = levels[rng() % 3];
      a.right = levels[rng() % 3];
      set.actions.push_back(a);
    }
  }
  // Force exact ties: copy an earlier candidate over a later one.
  if (count > 2 && rng() % 2 == 0) {
    const int src = static_cast<int>(rng() % static_cast<std::uint64_t>(count - 1));
    const int dst = src + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(count - src - 1));
    for (int h = 0; h < horizon; ++h) {
      set.actions[static_cast<std::size_t>(dst) * horizon + h] =
          set.actions[static_cast<std::size_t>(src) * horizon + h];
    }
  }

  const DynModel model = random_planner_model(substream_seed(seed, 1));
  const Predictor predictor(model);
  const StateVector s = random_state(rng);
  const Waypoints w = make_path(static_cast<PathKind>(rng() % 4), 0.5 + (rng() % 3) * 0.5);

  ArgminTrial t;
  t.candidates = count;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const double c = evaluate_sequence(predictor, s, set.sequence(i), w, cfg, false).cost;
    if (c < best) {
      best = c;
      t.expected = i;
    }
  }
  try {
    t.serial = plan(predictor, s, w, cfg, set, ExecPolicy::kSerial).best_index;
    t.parallel = plan(predictor, s, w, cfg, set, ExecPolicy::kParallel).best_index;
  } catch (const PlanningError&) {
    t.serial = t.parallel = -1;
  }
  t.match = t.serial == t.expected && t.parallel == t.expected;
  return t;
}

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "legmpc_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

nlohmann::json small_config_json() {
  std::ifstream in(default_config_path());
  nlohmann::json j = nlohmann::json::parse(in);
  j["data"]["rollouts"] = 12;
  j["data"]["steps"] = 20;
  j["model"]["hidden"] = {16, 16};
  j["model"]["fusion_width"] = 6;
  j["model"]["post_fusion"] = {16};
  j["features"]["embed_dim"] = 4;
  j["train"]["epochs"] = 3;
  j["train"]["batch_size"] = 64;
  j["mpc"]["candidates"] = 24;
  j["eval"]["seeds"] = 2;
  j["eval"]["duration"] = 0.5;
  j["eval"]["speeds"] = {10.0, 30.0};
  return j;
}

Config small_config() { return parse_config(small_config_json()); }

}  // namespace legmpc::check
