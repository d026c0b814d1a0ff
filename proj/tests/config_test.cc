#include <gtest/gtest.h>

#include <fstream>

#include "legmpc/config.h"
#include "support.h"

namespace legmpc {
namespace {

nlohmann::json default_json() {
  std::ifstream in(default_config_path());
  return nlohmann::json::parse(in);
}

TEST(Config, DefaultLoads) {
  const Config c = load_config(default_config_path());
  EXPECT_EQ(c.terrains.size(), 4u);
  EXPECT_EQ(c.mpc.candidates, 500);
  EXPECT_EQ(c.mpc.horizon, 4);
  EXPECT_DOUBLE_EQ(c.mpc.dt, 0.1);
  EXPECT_DOUBLE_EQ(c.mpc.weights.perpendicular, 50.0);
  EXPECT_DOUBLE_EQ(c.mpc.weights.forward, 10.0);
  EXPECT_DOUBLE_EQ(c.mpc.weights.heading, 5.0);
  EXPECT_EQ(c.pid.rate_hz, 1000);
  EXPECT_EQ(c.terrain_names(), "carpet|styrofoam|gravel|turf");
  EXPECT_EQ(c.hash.size(), 8u);
}

TEST(Config, HashTracksContent) {
  nlohmann::json j = default_json();
  const Config a = parse_config(j);
  const Config b = parse_config(j);
  EXPECT_EQ(a.hash, b.hash);
  j["mpc"]["candidates"] = 100;
  EXPECT_NE(parse_config(j).hash, a.hash);
}

TEST(Config, ArchitecturePerVariant) {
  const Config c = load_config(default_config_path());
  EXPECT_EQ(c.architecture(ModelVariant::kPlain).embed_dim, 0);
  EXPECT_EQ(c.architecture(ModelVariant::kOneHot).embed_dim, 4);
  EXPECT_EQ(c.architecture(ModelVariant::kEmbedding).embed_dim, c.features.embed_dim);
}

TEST(Config, PwmAbstractionUsesPwmBox) {
  nlohmann::json j = default_json();
  j["action"]["abstraction"] = "pwm";
  j["action"]["pwm_lo"] = 0.2;
  const Config c = parse_config(j);
  EXPECT_EQ(c.mpc.box.abstraction, ActionAbstraction::kDirectPwm);
  EXPECT_DOUBLE_EQ(c.mpc.box.lo, 0.2);
  EXPECT_DOUBLE_EQ(c.mpc.box.hi, 1.0);
}

TEST(Config, Errors) {
  EXPECT_THROW(load_config(check::temp_path("missing.json")), ConfigError);
  {
    const std::string p = check::temp_path("broken.json");
    std::ofstream(p) << "{ not json";
    EXPECT_THROW(load_config(p), ConfigError);
  }
  const nlohmann::json base = default_json();
  auto expect_bad = [&](auto mutate) {
    nlohmann::json j = base;
    mutate(j);
    EXPECT_THROW(parse_config(j), ConfigError) << j.dump().substr(0, 80);
  };
  expect_bad([](auto& j) { j["version"] = 2; });
  expect_bad([](auto& j) { j["terrains"] = nlohmann::json::array(); });
  expect_bad([](auto& j) { j["terrains"][1]["name"] = "carpet"; });
  expect_bad([](auto& j) { j["terrains"][0]["traction_fwd"] = 0.0; });
  expect_bad([](auto& j) { j["terrains"][0]["palette"] = nlohmann::json::array(); });
  expect_bad([](auto& j) { j["mpc"]["horizon"] = 0; });
  expect_bad([](auto& j) { j["mpc"]["candidates"] = "many"; });
  expect_bad([](auto& j) { j["action"]["abstraction"] = "torque"; });
  expect_bad([](auto& j) { j["action"]["pwm_hi"] = 2.0; });
  expect_bad([](auto& j) { j["pid"]["rate_hz"] = 0; });
  expect_bad([](auto& j) { j["data"]["rollouts"] = 0; });
  expect_bad([](auto& j) { j["features"]["embed_dim"] = 0; });
  expect_bad([](auto& j) { j["eval"]["path_scale"] = -1.0; });
  const Config c = parse_config(base);
  EXPECT_THROW(c.terrain("ice"), ConfigError);
}

}  // namespace
}  // namespace legmpc
