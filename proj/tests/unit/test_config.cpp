#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ctxsched/config.hpp"
#include "ctxsched/error.hpp"
#include "test_util.hpp"

using namespace ctxsched;

namespace {

std::string robot_text() {
  std::ifstream in(testing::data_dir() / "configs" / "robot.toml");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

const char* kMinimal = R"(
[inputs]
sensors = ["imu", "mic"]

[[modules]]
id = "slam"
priority = 3
score_expr = "1"

[[modules]]
id = "speech"
priority = 1
score_expr = "1"

[[rules]]
id = "still"
target = "speech"
condition_expr = "imu.moving"
)";

}  // namespace

TEST_CASE("shipped robot config") {
  const auto c = load_config(testing::data_dir() / "configs" / "robot.toml");
  REQUIRE(c.modules.size() == 3);
  CHECK(c.modules[0].id == "slam");
  CHECK(c.modules[0].priority == 3.0);
  CHECK(c.modules[0].triggers == std::vector<std::string>{"camera"});
  CHECK(c.modules[0].work_us == 60000);
  CHECK(c.modules[2].id == "speech");
  CHECK(c.modules[2].priority == 1.0);
  CHECK(c.scheduler.processors == 2);
  CHECK(c.scheduler.mode == SchedulerMode::Cfs);
  CHECK(c.topics == std::vector<std::string>{"slam/tracking_lost"});
  REQUIRE(c.streams.size() == 1);
  CHECK(c.streams[0].op == DerivedOp::Map);
  REQUIRE(c.rules.size() == 1);
  CHECK(c.rules[0].target == "speech");
  CHECK(c.rules[0].condition_expr == "motion > 0.5");
  CHECK(c.rules[0].forced_weight == 0.0);
  CHECK(c.graphs.size() == 3);
  CHECK(c.stream_names().contains("motion"));
  CHECK_THROWS_AS(c.module("nav"), LookupError);
}

TEST_CASE("minimal config with defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.modules.size() == 2);
  CHECK(c.scheduler.processors == 1);
  CHECK(c.scheduler.period_us == 1'000'000);
  REQUIRE(c.rules.size() == 1);
  CHECK(c.rules[0].forced_weight == 0.0);
  CHECK_FALSE(c.modules[0].work_us);
}

TEST_CASE("each problem has its own diagnostic") {
  const auto text = robot_text();
  CHECK(error_of(text) == "");

  const auto syntax = error_of(replace(text, "processors = 2", "processors = "));
  const auto unknown = error_of(replace(text, "condition_expr = \"motion > 0.5\"",
                                        "condition_expr = \"velocity > 0.5\""));
  const auto priority = error_of(replace(text, "priority = 1.0", "priority = 0"));
  const auto empty = error_of("[inputs]\nsensors = []\n");
  CHECK(unknown.find("unknown stream 'velocity'") != std::string::npos);
  CHECK(priority.find("priority must be > 0") != std::string::npos);
  CHECK(empty.find("no modules") != std::string::npos);
  CHECK_FALSE(syntax.empty());
  CHECK(syntax != unknown);
  CHECK(syntax != priority);

  CHECK_FALSE(error_of(replace(text, "priority = 2.0", "priority = -2.0")).empty());
  CHECK_FALSE(error_of(replace(text, "mode = \"cfs\"", "mode = \"fifo\"")).empty());
  CHECK_FALSE(error_of(replace(text, "quantum_us = 1000", "quantum_us = 3000")).empty());
  CHECK_FALSE(error_of(replace(text, "triggers = [\"mic\"]", "triggers = [\"radio\"]")).empty());
  CHECK_FALSE(error_of(replace(text, "target = \"speech\"", "target = \"nav\"")).empty());
  CHECK_FALSE(error_of(replace(text, "graph = \"sign\"", "graph = \"signs\"")).empty());
  CHECK_FALSE(error_of(replace(text, "op = \"map\"", "op = \"reduce\"")).empty());
  CHECK_FALSE(error_of(replace(text, "id = \"sign\"", "id = \"slam\"")).empty());
  CHECK_FALSE(error_of(replace(text, "work_us = 50000", "work_us = 0")).empty());
  CHECK_FALSE(error_of(replace(text, "edges = [[\"detect\", \"classify\"]]",
                               "edges = [[\"detect\", \"classify\"], [\"classify\", \"detect\"]]"))
                  .empty());
  CHECK_FALSE(error_of(text + "\n[extra]\nx = 1\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/robot.toml"), ConfigError);
}

TEST_CASE("to_toml round-trips") {
  const auto c = load_config(testing::data_dir() / "configs" / "robot.toml");
  CHECK(parse_config(to_toml(c)) == c);
  const auto m = parse_config(kMinimal);
  CHECK(parse_config(to_toml(m)) == m);
}

TEST_CASE("validate_config rejects code-built mistakes") {
  auto c = parse_config(kMinimal);
  CHECK_NOTHROW(validate_config(c));
  c.modules[1].priority = 0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config(kMinimal);
  c.modules[0].score_expr = "lidar.range";
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config(kMinimal);
  c.modules.clear();
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}
