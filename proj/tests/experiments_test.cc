#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "legmpc/experiments.h"
#include "support.h"

namespace legmpc {
namespace {

class ExperimentsTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new Config(check::small_config());
    carpet_ = new Dataset(collect_dataset(*cfg_, "carpet", cfg_->rollouts, 3));
    plain_ = std::make_shared<DynModel>(train_variant(*cfg_, *carpet_, ModelVariant::kPlain, 1).model);
  }
  static void TearDownTestSuite() {
    delete cfg_;
    delete carpet_;
    plain_.reset();
  }

  static Config* cfg_;
  static Dataset* carpet_;
  static std::shared_ptr<const DynModel> plain_;
};

Config* ExperimentsTest::cfg_ = nullptr;
Dataset* ExperimentsTest::carpet_ = nullptr;
std::shared_ptr<const DynModel> ExperimentsTest::plain_;

TEST(SeedList, DistinctAndStable) {
  const auto a = seed_list(5, 10);
  EXPECT_EQ(a, seed_list(5, 10));
  EXPECT_EQ(std::set<std::uint64_t>(a.begin(), a.end()).size(), 10u);
  EXPECT_EQ(seed_list(5, 3), std::vector<std::uint64_t>(a.begin(), a.begin() + 3));
}

TEST(Summarize, SampleStatistics) {
  std::vector<RunRecord> runs(4);
  const double costs[] = {1.0, 2.0, 3.0, 4.0};
  for (int i = 0; i < 4; ++i) {
    runs[i].controller = "c";
    runs[i].cost = costs[i];
  }
  const CellSummary s = summarize(runs);
  EXPECT_EQ(s.n, 4);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(summarize({runs[0]}).std, 0.0);
}

TEST_F(ExperimentsTest, DatasetMetadata) {
  EXPECT_EQ(carpet_->metadata["presets"], cfg_->terrain_names());
  EXPECT_EQ(carpet_->metadata["config_hash"], cfg_->hash);
  EXPECT_EQ(carpet_->embed_dim, 4);
  EXPECT_EQ(carpet_->size(), 12u * 20u);
}

TEST_F(ExperimentsTest, RunOnceIsDeterministic) {
  const Controller c = Controller::planner(*cfg_, plain_, "mpc");
  const RunRecord a = run_once(*cfg_, c, "carpet", PathKind::kLeft, 9);
  const RunRecord b = run_once(*cfg_, c, "carpet", PathKind::kLeft, 9);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.final_perpendicular, b.final_perpendicular);
  EXPECT_EQ(a.path, "left");
}

TEST_F(ExperimentsTest, RunCellMatchesIndividualRuns) {
  const Controller c = Controller::planner(*cfg_, plain_, "mpc");
  const auto seeds = seed_list(2, 3);
  const auto runs = run_cell(*cfg_, c, "styrofoam", PathKind::kStraight, seeds);
  ASSERT_EQ(runs.size(), 3u);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    // run_once plans in parallel, run_cell serially per seed.
    EXPECT_EQ(runs[i].cost, run_once(*cfg_, c, "styrofoam", PathKind::kStraight, seeds[i]).cost);
  }
}

TEST_F(ExperimentsTest, BaselineCostMatchesTrajectory) {
  const Controller dd = Controller::baseline(*cfg_);
  EXPECT_TRUE(dd.is_baseline());
  const Trajectory tr = run_controller(*cfg_, dd, "gravel", PathKind::kZigzag, 4);
  const Waypoints w = make_path(PathKind::kZigzag, cfg_->eval.path_scale);
  EXPECT_NEAR(tr.cost, path_cost(tr.states, w, cfg_->mpc.weights), 1e-9);
}

TEST_F(ExperimentsTest, ConditionedControllersCheckTheirEmbeddings) {
  const Dataset joint = merge({*carpet_, collect_dataset(*cfg_, "turf", 6, 4)});
  auto onehot = std::make_shared<DynModel>(train_variant(*cfg_, joint, ModelVariant::kOneHot, 2).model);
  const Controller oh = Controller::planner(*cfg_, onehot, "onehot");
  EXPECT_NO_THROW(run_once(*cfg_, oh, "turf", PathKind::kStraight, 1));

  Config fewer = *cfg_;
  fewer.terrains.pop_back();
  EXPECT_THROW(run_cell(fewer, oh, "carpet", PathKind::kStraight, {1}), ArtifactError);

  auto emb = std::make_shared<DynModel>(train_variant(*cfg_, joint, ModelVariant::kEmbedding, 2).model);
  Controller ec = Controller::planner(*cfg_, emb, "embed");
  EXPECT_NO_THROW(run_once(*cfg_, ec, "carpet", PathKind::kStraight, 1));
  ec.terrain_embeddings = {Eigen::VectorXd::Ones(4)};
  EXPECT_NO_THROW(run_once(*cfg_, ec, "carpet", PathKind::kStraight, 1));
  EXPECT_THROW(run_once(*cfg_, ec, "turf", PathKind::kStraight, 1), ArtifactError);
  ec.terrain_embeddings = {Eigen::VectorXd::Ones(3)};
  EXPECT_THROW(run_once(*cfg_, ec, "carpet", PathKind::kStraight, 1), ArtifactError);
}

TEST_F(ExperimentsTest, CompareSpeedRowsAndErrors) {
  const auto seeds = seed_list(1, 2);
  const auto rows = compare_speed(*cfg_, plain_, "styrofoam", PathKind::kStraight, {10.0, 30.0}, seeds);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].omega_nom, 30.0);
  EXPECT_EQ(rows[0].dd.n, 2);
  EXPECT_DOUBLE_EQ(rows[0].gap(), rows[0].dd.mean - rows[0].mpc.mean);
  EXPECT_THROW(compare_speed(*cfg_, plain_, "styrofoam", PathKind::kStraight, {}, seeds),
               ConfigError);
  EXPECT_THROW(compare_speed(*cfg_, plain_, "styrofoam", PathKind::kStraight, {99.0}, seeds),
               ConfigError);
}

TEST_F(ExperimentsTest, MatrixAndWriters) {
  const std::vector<Controller> cs = {Controller::baseline(*cfg_),
                                      Controller::planner(*cfg_, plain_, "carpet")};
  const CostMatrix m =
      cross_terrain_matrix(*cfg_, cs, {"carpet", "gravel"}, PathKind::kStraight, seed_list(1, 2));
  ASSERT_EQ(m.cells.size(), 2u);
  ASSERT_EQ(m.cells[1].size(), 2u);
  EXPECT_EQ(m.cells[1][1].terrain, "gravel");
  EXPECT_EQ(m.cells[0][0].controller, "dd");

  const std::string path = check::temp_path("matrix.csv");
  write_matrix_csv(path, m, cfg_->hash);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# config_hash=" + cfg_->hash);
  std::getline(in, line);
  EXPECT_EQ(line, "controller,carpet_mean,carpet_std,gravel_mean,gravel_std");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);

  ExperimentReport rep;
  rep.config_hash = cfg_->hash;
  rep.add(run_cell(*cfg_, cs[0], "carpet", PathKind::kStraight, seed_list(1, 2)));
  EXPECT_EQ(rep.cell("dd", "carpet", "straight").n, 2);
  EXPECT_THROW(rep.cell("dd", "turf", "straight"), Error);
  const std::string rp = check::temp_path("report.csv");
  write_report_csv(rp, rep);
  EXPECT_EQ(file_crc(rp), file_crc(rp));
  EXPECT_THROW(write_report_csv("/nonexistent/dir/x.csv", rep), Error);
}

}  // namespace
}  // namespace legmpc
