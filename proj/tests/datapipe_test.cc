#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "legmpc/config.h"
#include "legmpc/datapipe.h"
#include "support.h"

namespace legmpc {
namespace {

class DatapipeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = load_config(default_config_path());
    cc_.robot = cfg_.robot;
    cc_.pid = cfg_.pid;
    cc_.box = cfg_.action_box();
    cc_.n_rollouts = 6;
    cc_.steps = 12;
    cc_.seed = 31;
  }

  std::vector<Rollout> collect_on(const std::string& terrain, std::uint64_t seed) {
    CollectConfig cc = cc_;
    cc.seed = seed;
    const ProjectionMatrix proj = make_projection(1, cc.patch_size * cc.patch_size * 3, 4);
    return collect(cc, cfg_.terrain(terrain), static_cast<std::uint32_t>(cfg_.terrain_index(terrain)),
                   &proj);
  }

  Config cfg_;
  CollectConfig cc_;
};

TEST_F(DatapipeTest, CollectShapesAndBounds) {
  const auto rollouts = collect_on("carpet", 1);
  ASSERT_EQ(rollouts.size(), 6u);
  for (const Rollout& r : rollouts) {
    EXPECT_EQ(r.states.size(), 13u);
    EXPECT_EQ(r.actions.size(), 12u);
    EXPECT_EQ(r.embedding.size(), 4);
    EXPECT_EQ(r.terrain, "carpet");
    for (const Action& a : r.actions) {
      EXPECT_GE(a.left, cc_.box.lo);
      EXPECT_LE(a.right, cc_.box.hi);
    }
    EXPECT_LE(std::abs(r.states[0][kX]), cc_.start.arena_half_width);
  }
}

TEST_F(DatapipeTest, CollectIsDeterministicPerRollout) {
  const auto a = collect_on("gravel", 5);
  const auto b = collect_on("gravel", 5);
  CollectConfig more = cc_;
  more.seed = 5;
  more.n_rollouts = 9;
  const auto c = collect(more, cfg_.terrain("gravel"), 2, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].states, b[i].states);
    // Rollout i does not depend on how many others were collected.
    EXPECT_EQ(a[i].states, c[i].states);
  }
  EXPECT_EQ(c[0].embedding.size(), 0);
}

TEST_F(DatapipeTest, SliceReassembleRoundTrip) {
  const auto rollouts = collect_on("turf", 2);
  const Dataset d = slice(rollouts);
  EXPECT_EQ(d.size(), 6u * 12u);
  EXPECT_EQ(d.embed_dim, 4);
  const auto back = reassemble(d);
  ASSERT_EQ(back.size(), rollouts.size());
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    ASSERT_EQ(back[r].size(), rollouts[r].states.size());
    for (std::size_t t = 0; t < back[r].size(); ++t) {
      for (int i = 0; i < kStateDim; ++i) {
        EXPECT_EQ(back[r][t][i], static_cast<float>(rollouts[r].states[t][i]));
      }
    }
  }
}

TEST_F(DatapipeTest, SliceRejectsInconsistentRollouts) {
  auto rollouts = collect_on("carpet", 3);
  rollouts[1].actions.pop_back();
  EXPECT_THROW(slice(rollouts), Error);
}

TEST_F(DatapipeTest, SplitKeepsRolloutsWhole) {
  const Dataset d = slice(collect_on("carpet", 4));
  const auto [train, val] = split(d, 0.5, 9);
  EXPECT_EQ(train.rollouts.size() + val.rollouts.size(), d.rollouts.size());
  EXPECT_EQ(train.size() + val.size(), d.size());
  EXPECT_EQ(train.size(), train.rollouts.size() * 12u);
  std::multiset<float> all(d.inputs.begin(), d.inputs.end());
  std::multiset<float> parts(train.inputs.begin(), train.inputs.end());
  parts.insert(val.inputs.begin(), val.inputs.end());
  EXPECT_EQ(all, parts);
  EXPECT_THROW(split(d, 1.5, 9), Error);
}

TEST_F(DatapipeTest, MergeRenumbersRollouts) {
  const Dataset a = slice(collect_on("carpet", 1));
  const Dataset b = slice(collect_on("styrofoam", 1));
  const Dataset m = merge({a, b});
  EXPECT_EQ(m.rollouts.size(), 12u);
  EXPECT_EQ(m.size(), a.size() + b.size());
  EXPECT_EQ(m.rollout_of.back(), 11u);
  EXPECT_EQ(m.rollouts[6].terrain_index, 1u);
  EXPECT_EQ(m.metadata["terrains"].size(), 2u);
  Dataset odd = b;
  odd.embed_dim = 7;
  EXPECT_THROW(merge({a, odd}), ArtifactError);
}

TEST_F(DatapipeTest, FileRoundTripAndCorruption) {
  Dataset d = slice(collect_on("gravel", 8));
  d.metadata["note"] = "x";
  const std::string path = check::temp_path("d.rchd");
  save_dataset(path, d);
  const Dataset back = load_dataset(path);
  EXPECT_TRUE(back == d);
  EXPECT_EQ(dataset_hash(back), dataset_hash(d));

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[100] ^= 0x04;
  std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
  EXPECT_THROW(load_dataset(path), ArtifactError);
  EXPECT_THROW(load_dataset(check::temp_path("nope.rchd")), ArtifactError);
}

TEST_F(DatapipeTest, TrainingSetColumns) {
  const Dataset a = slice(collect_on("carpet", 1));
  const Dataset b = slice(collect_on("turf", 1));
  const Dataset m = merge({a, b});
  const TrainingSet plain = to_training_set(m, ModelVariant::kPlain, 4);
  EXPECT_EQ(plain.data.inputs.rows(), kStateDim + kActionDim);
  EXPECT_EQ(plain.group, m.rollout_of);
  const TrainingSet oh = to_training_set(m, ModelVariant::kOneHot, 4);
  EXPECT_EQ(oh.data.inputs(kStateDim + kActionDim + 3, static_cast<Eigen::Index>(m.size()) - 1), 1.0);
  EXPECT_EQ(oh.data.inputs(kStateDim + kActionDim + 0, 0), 1.0);
  const TrainingSet em = to_training_set(m, ModelVariant::kEmbedding, 4);
  EXPECT_EQ(em.data.inputs.rows(), kStateDim + kActionDim + 4);
  // Targets are s' - s.
  EXPECT_NEAR(plain.data.targets(kX, 0),
              plain.data.inputs(kX, 1) - plain.data.inputs(kX, 0), 1e-6);

  std::vector<Embedding> table(m.rollouts.size(),
                               {Eigen::VectorXd::Constant(3, 0.5), EmbeddingSource::kPrecomputedFile});
  const TrainingSet ov = to_training_set(m, ModelVariant::kEmbedding, 4, &table);
  EXPECT_EQ(ov.data.inputs.rows(), kStateDim + kActionDim + 3);
  table.pop_back();
  EXPECT_THROW(to_training_set(m, ModelVariant::kEmbedding, 4, &table), ArtifactError);
  CollectConfig none = cc_;
  const Dataset bare = slice(collect(none, cfg_.terrain("carpet"), 0, nullptr));
  EXPECT_THROW(to_training_set(bare, ModelVariant::kEmbedding, 4), ArtifactError);
}

TEST_F(DatapipeTest, CollectionSeconds) {
  const Dataset d = slice(collect_on("carpet", 1));
  EXPECT_NEAR(collection_seconds(d, 0.1), 7.2, 1e-12);
}

}  // namespace
}  // namespace legmpc
