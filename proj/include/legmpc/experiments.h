#ifndef LEGMPC_EXPERIMENTS_H_
#define LEGMPC_EXPERIMENTS_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "legmpc/config.h"
#include "legmpc/datapipe.h"
#include "legmpc/dynmodel.h"
#include "legmpc/features.h"
#include "legmpc/mpc.h"

namespace legmpc {

// Data collection with the config's terrain, action box and projection.
Dataset collect_dataset(const Config& cfg, const std::string& terrain, int n_rollouts,
                        std::uint64_t seed);

ProjectionMatrix config_projection(const Config& cfg);

TrainResult train_variant(const Config& cfg, const Dataset& data, ModelVariant variant,
                          std::uint64_t seed, const std::vector<Embedding>* embeddings = nullptr);

// A controller under evaluation: the differential-drive baseline or MPC over
// a learned model.
struct Controller {
  std::string label;
  std::shared_ptr<const DynModel> model;  // null for the baseline
  DdParams dd;
  MpcConfig mpc;
  // Precomputed terrain vectors by terrain index; when empty, embedding
  // models see the config projection of the start patch.
  std::vector<Eigen::VectorXd> terrain_embeddings;

  static Controller baseline(const Config& cfg, std::string label = "dd");
  static Controller planner(const Config& cfg, std::shared_ptr<const DynModel> model,
                            std::string label);
  bool is_baseline() const { return model == nullptr; }
};

// Evaluation seed i of a base seed.
std::vector<std::uint64_t> seed_list(std::uint64_t base_seed, int n);

struct RunRecord {
  std::string controller;
  std::string terrain;
  std::string path;
  std::uint64_t seed = 0;
  double cost = 0.0;
  double final_perpendicular = 0.0;
  double progress = 0.0;  // arc length reached
};

struct CellSummary {
  std::string controller;
  std::string terrain;
  std::string path;
  int n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

CellSummary summarize(const std::vector<RunRecord>& runs);

Trajectory run_controller(const Config& cfg, const Controller& c, const std::string& terrain,
                          PathKind path, std::uint64_t seed, const PlanObserver& observer = {});

RunRecord run_once(const Config& cfg, const Controller& c, const std::string& terrain,
                   PathKind path, std::uint64_t seed, const PlanObserver& observer = {});

// Runs every seed (in parallel across seeds) and aggregates.
std::vector<RunRecord> run_cell(const Config& cfg, const Controller& c, const std::string& terrain,
                                PathKind path, const std::vector<std::uint64_t>& seeds);

struct ExperimentReport {
  std::string config_hash;
  std::vector<CellSummary> cells;
  std::vector<RunRecord> runs;

  void add(const std::vector<RunRecord>& cell_runs);
  const CellSummary& cell(const std::string& controller, const std::string& terrain,
                          const std::string& path) const;
};

struct SpeedRow {
  double omega_nom = 0.0;
  CellSummary dd;
  CellSummary mpc;
  double gap() const { return dd.mean - mpc.mean; }  // DD minus MPC
};

// DD at omega_nom vs MPC restricted to omega_nom * [1 - band, 1 + band].
std::vector<SpeedRow> compare_speed(const Config& cfg, std::shared_ptr<const DynModel> model,
                                    const std::string& terrain, PathKind path,
                                    const std::vector<double>& speeds,
                                    const std::vector<std::uint64_t>& seeds);

// Cross-terrain evaluation: every model on every terrain.
struct CostMatrix {
  std::vector<std::string> rows;  // controllers
  std::vector<std::string> cols;  // terrains
  std::vector<std::vector<CellSummary>> cells;
};

CostMatrix cross_terrain_matrix(const Config& cfg, const std::vector<Controller>& controllers,
                                const std::vector<std::string>& terrains, PathKind path,
                                const std::vector<std::uint64_t>& seeds);

// Writers (CSV is canonical, SVG is a convenience).
void write_report_csv(const std::string& path, const ExperimentReport& report);
void write_runs_csv(const std::string& path, const ExperimentReport& report);
void write_speed_csv(const std::string& path, const std::vector<SpeedRow>& rows,
                     const std::string& config_hash);
void write_matrix_csv(const std::string& path, const CostMatrix& m, const std::string& config_hash);
void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve);
void write_speed_svg(const std::string& path, const std::vector<SpeedRow>& rows);
void write_bar_svg(const std::string& path, const ExperimentReport& report);

std::uint32_t file_crc(const std::string& path);

}  // namespace legmpc

#endif  // LEGMPC_EXPERIMENTS_H_
