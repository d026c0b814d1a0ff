// legmpc: data collection, model training and evaluation runs.
//
// Exit codes: 0 success, 1 runtime failure, 2 config or usage error,
// 3 artifact mismatch (bad file, wrong dimensions, missing model).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "legmpc/experiments.h"

namespace fs = std::filesystem;
using namespace legmpc;

namespace {

struct Common {
  std::string config_path = default_config_path();
  std::uint64_t seed = 1;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Base seed");
  cmd->add_option("--out", c.out, "Output directory");
}

Config prepare(const Common& c) {
  Config cfg = load_config(c.config_path);
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + c.out + "': " + ec.message());
  return cfg;
}

std::string out_file(const Common& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

std::vector<Embedding> load_terrain_table(const std::string& path, const Config& cfg) {
  auto table = load_embeddings(path);
  if (table.size() != cfg.terrains.size()) {
    throw ArtifactError("'" + path + "' has " + std::to_string(table.size()) +
                        " rows, config has " + std::to_string(cfg.terrains.size()) + " terrains");
  }
  return table;
}

std::shared_ptr<const DynModel> load_for(const std::string& path, const std::string& cell) {
  if (!fs::exists(path)) throw ArtifactError(cell + ": model file '" + path + "' not found");
  try {
    return std::make_shared<DynModel>(load_model(path));
  } catch (const ArtifactError& e) {
    throw ArtifactError(cell + ": " + e.what());
  }
}

// --- collect -----------------------------------------------------------------

struct CollectArgs {
  Common common;
  std::string terrain = "carpet";
  int rollouts = -1;
  std::string name;
};

int run_collect(const CollectArgs& a) {
  const Config cfg = prepare(a.common);
  const int n = a.rollouts > 0 ? a.rollouts : cfg.rollouts;
  const Dataset d = collect_dataset(cfg, a.terrain, n, a.common.seed);
  const std::string path = out_file(a.common, (a.name.empty() ? a.terrain : a.name) + ".rchd");
  save_dataset(path, d);
  std::printf("%s: %zu pairs from %zu rollouts on %s (%.1f s of robot time), crc %08x\n",
              path.c_str(), d.size(), d.rollouts.size(), a.terrain.c_str(),
              collection_seconds(d, cfg.robot.control_dt), dataset_hash(d));
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::vector<std::string> data;
  std::string variant = "plain";
  std::string embeddings;
  std::string name = "model";
};

int run_train(const TrainArgs& a) {
  const Config cfg = prepare(a.common);
  const ModelVariant variant = parse_variant(a.variant);
  std::vector<Dataset> parts;
  for (const auto& p : a.data) {
    Dataset d = load_dataset(p);
    if (variant == ModelVariant::kOneHot && d.metadata.contains("presets") &&
        d.metadata["presets"].get<std::string>() != cfg.terrain_names()) {
      throw ArtifactError("'" + p + "' was collected with presets " +
                          d.metadata["presets"].get<std::string>() + ", config has " +
                          cfg.terrain_names());
    }
    parts.push_back(std::move(d));
  }
  const Dataset data = parts.size() == 1 ? parts[0] : merge(parts);
  std::vector<Embedding> table;
  if (!a.embeddings.empty()) table = load_embeddings(a.embeddings);
  const TrainResult r =
      train_variant(cfg, data, variant, a.common.seed, table.empty() ? nullptr : &table);
  const std::string model_path = out_file(a.common, a.name + ".rchm");
  save_model(model_path, r.model);
  write_loss_csv(out_file(a.common, a.name + "_loss.csv"), r.curve);
  const auto& last = r.curve.back();
  std::printf("%s: %s model on %zu pairs, %d epochs, train %.5f, val %.5f\n",
              model_path.c_str(), a.variant.c_str(), data.size(), last.epoch, last.train_loss,
              last.val_loss);
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string model;  // empty: baseline
  std::string label;
  std::vector<std::string> terrains{"carpet"};
  std::vector<std::string> paths{"straight"};
  int n_seeds = -1;
  double omega_nom = -1.0;
  std::string terrain_embeddings;
  std::string diagnostics;
};

Controller make_controller(const Config& cfg, const std::string& model_path,
                           const std::string& label, const std::string& table_path,
                           const std::string& cell) {
  if (model_path.empty()) return Controller::baseline(cfg, label.empty() ? "dd" : label);
  Controller c = Controller::planner(cfg, load_for(model_path, cell),
                                     label.empty() ? fs::path(model_path).stem().string() : label);
  if (!table_path.empty()) {
    for (const auto& e : load_terrain_table(table_path, cfg)) c.terrain_embeddings.push_back(e.values);
  }
  return c;
}

int run_eval(const EvalArgs& a) {
  const Config cfg = prepare(a.common);
  for (const auto& t : a.terrains) cfg.terrain_index(t);
  std::vector<PathKind> kinds;
  for (const auto& p : a.paths) kinds.push_back(parse_path_kind(p));
  Controller c = make_controller(cfg, a.model, a.label, a.terrain_embeddings, "eval");
  if (a.omega_nom > 0) c.dd.omega_nom = a.omega_nom;
  const auto seeds = seed_list(a.common.seed, a.n_seeds > 0 ? a.n_seeds : cfg.eval.n_seeds);

  std::ofstream diag;
  if (!a.diagnostics.empty()) {
    diag.open(a.diagnostics);
    if (!diag) throw ConfigError("cannot write '" + a.diagnostics + "'");
  }

  ExperimentReport report;
  report.config_hash = cfg.hash;
  for (const auto& terrain : a.terrains) {
    for (PathKind kind : kinds) {
      if (diag.is_open() && !c.is_baseline()) {
        // Serial replay with one JSON line per planning step.
        std::vector<RunRecord> runs;
        for (std::uint64_t s : seeds) {
          auto observer = [&](int step, const StateVector&, const PlanResult& p) {
            nlohmann::json j{{"terrain", terrain},         {"path", to_string(kind)},
                             {"seed", s},                  {"step", step},
                             {"best_index", p.best_index}, {"best_cost", p.best_cost},
                             {"disqualified", p.disqualified},
                             {"action", {p.action.left, p.action.right}}};
            diag << j.dump() << "\n";
          };
          runs.push_back(run_once(cfg, c, terrain, kind, s, observer));
        }
        report.add(runs);
      } else {
        report.add(run_cell(cfg, c, terrain, kind, seeds));
      }
      const auto& cell = report.cells.back();
      std::printf("%-10s %-10s %-9s n=%d cost %.3f +- %.3f\n", cell.controller.c_str(),
                  cell.terrain.c_str(), cell.path.c_str(), cell.n, cell.mean, cell.std);
    }
  }
  write_report_csv(out_file(a.common, "eval.csv"), report);
  write_runs_csv(out_file(a.common, "eval_runs.csv"), report);
  return 0;
}

// --- compare-speed -----------------------------------------------------------

struct SpeedArgs {
  Common common;
  std::string model;
  std::string terrain;
  std::string path = "straight";
  std::string speeds;  // comma-separated
  bool speeds_given = false;
  int n_seeds = -1;
};

int run_speed(const SpeedArgs& a) {
  const Config cfg = prepare(a.common);
  const std::string terrain = a.terrain.empty() ? cfg.eval.speed_terrain : a.terrain;
  cfg.terrain_index(terrain);
  const PathKind kind = parse_path_kind(a.path);
  std::vector<double> speeds = cfg.eval.speeds;
  if (a.speeds_given) {
    speeds.clear();
    std::stringstream ss(a.speeds);
    for (std::string item; std::getline(ss, item, ',');) {
      if (item.empty()) continue;
      try {
        speeds.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("compare-speed: bad speed '" + item + "'");
      }
    }
  }
  if (speeds.empty()) throw ConfigError("compare-speed: empty speed list");
  auto model = load_for(a.model, "compare-speed");
  const auto seeds = seed_list(a.common.seed, a.n_seeds > 0 ? a.n_seeds : cfg.eval.n_seeds);
  const auto rows = compare_speed(cfg, model, terrain, kind, speeds, seeds);
  for (const auto& r : rows) {
    std::printf("omega %.1f  dd %.3f +- %.3f  mpc %.3f +- %.3f  gap %.3f\n", r.omega_nom,
                r.dd.mean, r.dd.std, r.mpc.mean, r.mpc.std, r.gap());
  }
  write_speed_csv(out_file(a.common, "speed.csv"), rows, cfg.hash);
  write_speed_svg(out_file(a.common, "speed.svg"), rows);
  return 0;
}

// --- matrix ------------------------------------------------------------------

struct MatrixArgs {
  Common common;
  std::vector<std::string> models;  // LABEL=PATH or LABEL@TERRAIN=PATH
  bool with_dd = false;
  std::vector<std::string> terrains;
  std::vector<std::string> paths{"straight"};
  int n_seeds = -1;
  std::string terrain_embeddings;
};

struct MatrixRow {
  std::string label;
  std::map<std::string, std::string> bound;  // terrain -> model path
  std::string any;                            // model for every terrain
  bool baseline = false;
};

std::vector<MatrixRow> parse_rows(const MatrixArgs& a, const Config& cfg) {
  std::vector<MatrixRow> rows;
  auto row_for = [&rows](const std::string& label) -> MatrixRow& {
    for (auto& r : rows) {
      if (r.label == label) return r;
    }
    rows.push_back({label, {}, {}, false});
    return rows.back();
  };
  if (a.with_dd) row_for("dd").baseline = true;
  for (const auto& spec : a.models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw ConfigError("--model expects LABEL=PATH or LABEL@TERRAIN=PATH, got '" + spec + "'");
    }
    std::string label = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    const auto at = label.find('@');
    if (at != std::string::npos) {
      const std::string terrain = label.substr(at + 1);
      cfg.terrain_index(terrain);
      label = label.substr(0, at);
      row_for(label).bound[terrain] = path;
    } else {
      row_for(label).any = path;
    }
  }
  if (rows.empty()) throw ConfigError("matrix: no controllers given (use --model or --dd)");
  return rows;
}

int run_matrix(const MatrixArgs& a) {
  const Config cfg = prepare(a.common);
  const std::vector<std::string> terrains = a.terrains.empty() ? [&] {
    std::vector<std::string> all;
    for (const auto& t : cfg.terrains) all.push_back(t.name);
    return all;
  }() : a.terrains;
  for (const auto& t : terrains) cfg.terrain_index(t);
  std::vector<PathKind> kinds;
  for (const auto& p : a.paths) kinds.push_back(parse_path_kind(p));
  const auto rows = parse_rows(a, cfg);
  const auto seeds = seed_list(a.common.seed, a.n_seeds > 0 ? a.n_seeds : cfg.eval.n_seeds);

  // Resolve and load every cell's model before running anything.
  std::map<std::pair<std::string, std::string>, Controller> controllers;
  for (const auto& row : rows) {
    for (const auto& t : terrains) {
      const std::string cell = row.label + "/" + t;
      if (row.baseline) {
        controllers.emplace(std::make_pair(row.label, t), Controller::baseline(cfg, row.label));
        continue;
      }
      const auto it = row.bound.find(t);
      const std::string path = it != row.bound.end() ? it->second : row.any;
      if (path.empty()) throw ArtifactError(cell + ": no model given for this terrain");
      controllers.emplace(std::make_pair(row.label, t),
                          make_controller(cfg, path, row.label, a.terrain_embeddings, cell));
    }
  }

  ExperimentReport report;
  report.config_hash = cfg.hash;
  CostMatrix matrix;
  matrix.cols = terrains;
  for (const auto& row : rows) {
    matrix.rows.push_back(row.label);
    std::vector<CellSummary> line;
    for (const auto& t : terrains) {
      const Controller& c = controllers.at({row.label, t});
      std::vector<RunRecord> pooled;
      for (PathKind kind : kinds) {
        const auto runs = run_cell(cfg, c, t, kind, seeds);
        report.add(runs);
        pooled.insert(pooled.end(), runs.begin(), runs.end());
      }
      CellSummary s = summarize(pooled);
      s.path = kinds.size() == 1 ? to_string(kinds[0]) : "all";
      std::printf("%-12s %-10s cost %.3f +- %.3f\n", row.label.c_str(), t.c_str(), s.mean, s.std);
      line.push_back(s);
    }
    matrix.cells.push_back(std::move(line));
  }
  write_matrix_csv(out_file(a.common, "matrix.csv"), matrix, cfg.hash);
  write_report_csv(out_file(a.common, "report.csv"), report);
  write_runs_csv(out_file(a.common, "runs.csv"), report);
  write_bar_svg(out_file(a.common, "report.svg"), report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned-dynamics MPC for a simulated legged millirobot"};
  app.require_subcommand(1);

  CollectArgs collect_args;
  auto* collect_cmd = app.add_subcommand("collect", "Collect random-action rollouts on one terrain");
  add_common(collect_cmd, collect_args.common);
  collect_cmd->add_option("--terrain", collect_args.terrain, "Terrain preset");
  collect_cmd->add_option("--rollouts", collect_args.rollouts, "Number of rollouts");
  collect_cmd->add_option("--name", collect_args.name, "Output file stem (default: terrain)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a dynamics model");
  add_common(train_cmd, train_args.common);
  train_cmd->add_option("--data", train_args.data, "Dataset file(s)")->required();
  train_cmd->add_option("--variant", train_args.variant, "plain | onehot | embedding");
  train_cmd->add_option("--embeddings", train_args.embeddings,
                        "Precomputed per-rollout embeddings (RCHE)")->check(CLI::ExistingFile);
  train_cmd->add_option("--name", train_args.name, "Output file stem");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a controller over seeds");
  add_common(eval_cmd, eval_args.common);
  eval_cmd->add_option("--model", eval_args.model, "Model file (omit for the DD baseline)");
  eval_cmd->add_option("--label", eval_args.label, "Controller label in reports");
  eval_cmd->add_option("--terrain", eval_args.terrains, "Terrain preset(s)");
  eval_cmd->add_option("--path", eval_args.paths, "straight | left | right | zigzag");
  eval_cmd->add_option("--seeds", eval_args.n_seeds, "Number of evaluation seeds");
  eval_cmd->add_option("--omega-nom", eval_args.omega_nom, "DD nominal leg speed");
  eval_cmd->add_option("--terrain-embeddings", eval_args.terrain_embeddings,
                       "Per-terrain embedding table (RCHE)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--diagnostics", eval_args.diagnostics,
                       "Write per-step planner diagnostics as JSON lines");

  SpeedArgs speed_args;
  auto* speed_cmd = app.add_subcommand("compare-speed", "DD vs MPC cost over nominal speeds");
  add_common(speed_cmd, speed_args.common);
  speed_cmd->add_option("--model", speed_args.model, "Model file")->required();
  speed_cmd->add_option("--terrain", speed_args.terrain, "Terrain preset");
  speed_cmd->add_option("--path", speed_args.path, "Path kind");
  auto* speeds_opt =
      speed_cmd->add_option("--speeds", speed_args.speeds, "Comma-separated nominal leg speeds")
          ->expected(0, 1);
  speed_cmd->add_option("--seeds", speed_args.n_seeds, "Number of evaluation seeds");

  MatrixArgs matrix_args;
  auto* matrix_cmd = app.add_subcommand("matrix", "Controllers x terrains cost matrix");
  add_common(matrix_cmd, matrix_args.common);
  matrix_cmd->add_option("--model", matrix_args.models, "LABEL=PATH or LABEL@TERRAIN=PATH");
  matrix_cmd->add_flag("--dd", matrix_args.with_dd, "Include the DD baseline");
  matrix_cmd->add_option("--terrain", matrix_args.terrains, "Terrain presets (default: all)");
  matrix_cmd->add_option("--path", matrix_args.paths, "Path kinds");
  matrix_cmd->add_option("--seeds", matrix_args.n_seeds, "Number of evaluation seeds");
  matrix_cmd->add_option("--terrain-embeddings", matrix_args.terrain_embeddings,
                         "Per-terrain embedding table (RCHE)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*collect_cmd) return run_collect(collect_args);
    if (*train_cmd) return run_train(train_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*speed_cmd) {
      speed_args.speeds_given = speeds_opt->count() > 0;
      return run_speed(speed_args);
    }
    if (*matrix_cmd) return run_matrix(matrix_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ArtifactError& e) {
    std::fprintf(stderr, "artifact error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
