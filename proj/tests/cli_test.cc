#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "legmpc/experiments.h"
#include "support.h"

namespace legmpc {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::string(check::temp_path("cli"));
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    std::ofstream(*dir_ + "/small.json") << check::small_config_json().dump(2);
  }
  static void TearDownTestSuite() { delete dir_; }

  // Runs the CLI with the small config and returns its exit status.
  static int cli(const std::string& args, bool with_config = true) {
    std::string cmd = std::string(LEGMPC_CLI) + " " + args;
    if (with_config) cmd += " --config " + *dir_ + "/small.json --out " + *dir_;
    cmd += " > " + *dir_ + "/last.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string file(const std::string& name) { return *dir_ + "/" + name; }

  static std::string first_line(const std::string& name) {
    std::ifstream in(file(name));
    std::string line;
    std::getline(in, line);
    return line;
  }

  static std::string* dir_;
};

std::string* CliTest::dir_ = nullptr;

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli("", false), 2);
  EXPECT_EQ(cli("bogus", false), 2);
  EXPECT_EQ(cli("collect --no-such-flag"), 2);
  EXPECT_EQ(cli("collect --config /does/not/exist.json", false), 2);
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(cli("collect --terrain ice"), 2);
  EXPECT_EQ(cli("eval --path spiral"), 2);
  std::ofstream(file("bad.json")) << "{\"version\": 1, \"terrains\": []}";
  EXPECT_EQ(cli("collect --config " + file("bad.json") + " --out " + *dir_, false), 2);
}

TEST_F(CliTest, PipelineAndArtifactErrors) {
  ASSERT_EQ(cli("collect --terrain carpet --rollouts 6 --seed 4 --name a"), 0);
  ASSERT_TRUE(fs::exists(file("a.rchd")));
  // Same seed, same bytes.
  ASSERT_EQ(cli("collect --terrain carpet --rollouts 6 --seed 4 --name b"), 0);
  EXPECT_EQ(file_crc(file("a.rchd")), file_crc(file("b.rchd")));

  ASSERT_EQ(cli("train --data " + file("a.rchd") + " --name m"), 0);
  ASSERT_TRUE(fs::exists(file("m.rchm")));
  EXPECT_EQ(first_line("m_loss.csv"), "epoch,train_loss,val_loss");

  ASSERT_EQ(cli("eval --model " + file("m.rchm") + " --terrain carpet --path straight --seeds 1"), 0);
  const Config cfg = check::small_config();
  EXPECT_EQ(first_line("eval.csv"), "# config_hash=" + cfg.hash);
  ASSERT_EQ(cli("eval --terrain gravel --seeds 1"), 0);

  EXPECT_EQ(cli("eval --model " + file("missing.rchm")), 3);
  EXPECT_EQ(cli("train --data " + file("missing.rchd")), 3);
  EXPECT_EQ(cli("train --data " + file("m.rchm")), 3);  // not a dataset
  EXPECT_EQ(cli("matrix --model x=" + file("missing.rchm") + " --seeds 1"), 3);

  // A one-hot model needs terrain labels that match the config presets.
  EXPECT_EQ(cli("train --data " + file("a.rchd") + " --variant onehot --name oh"), 0);
  auto other = check::small_config_json();
  other["terrains"].erase(3);
  std::ofstream(file("three.json")) << other.dump();
  EXPECT_EQ(cli("eval --model " + file("oh.rchm") + " --config " + file("three.json") + " --out " +
                    *dir_ + " --seeds 1",
                false),
            3);

  std::string bytes;
  {
    std::ifstream in(file("m.rchm"), std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[bytes.size() / 2] ^= 0x20;
  std::ofstream(file("corrupt.rchm"), std::ios::binary) << bytes;
  EXPECT_EQ(cli("eval --model " + file("corrupt.rchm") + " --seeds 1"), 3);

  EXPECT_EQ(cli("compare-speed --model " + file("m.rchm") + " --speeds \"\""), 2);
  EXPECT_EQ(cli("compare-speed --model " + file("m.rchm") + " --speeds 10,500"), 2);
  ASSERT_EQ(cli("compare-speed --model " + file("m.rchm") + " --speeds 10,30 --seeds 1"), 0);
  EXPECT_EQ(first_line("speed.csv"), "# config_hash=" + cfg.hash);

  ASSERT_EQ(cli("matrix --dd --model m=" + file("m.rchm") + " --terrain carpet --terrain turf --seeds 1"),
            0);
  EXPECT_TRUE(fs::exists(file("matrix.csv")));
  EXPECT_TRUE(fs::exists(file("report.svg")));
}

}  // namespace
}  // namespace legmpc
