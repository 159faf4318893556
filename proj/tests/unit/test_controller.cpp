#include <doctest.h>

#include <algorithm>

#include "ctxsched/controller.hpp"
#include "ctxsched/error.hpp"
#include "test_util.hpp"

using namespace ctxsched;
using nlohmann::json;

namespace {

ControllerConfig robot() { return load_config(testing::data_dir() / "configs" / "robot.toml"); }

json still() { return {{"accel", {0.01, -0.02, 0.0}}}; }
json moving() { return {{"accel", {1.2, 0.9, 0.0}}}; }

// Events that give every score stream a first value.
void warm_up(Controller& c, std::int64_t t = 0) {
  c.on_event("imu", still(), t);
  c.on_event("slam/tracking_lost", {{"lost", false}}, t);
  c.on_event("side_camera", {{"signs", 0}}, t);
}

class RejectingBackend : public ScheduleBackend {
 protected:
  void do_apply(const ScheduleAssignment&, std::int64_t) override {
    throw CgroupError("cpu.max", EACCES, "permission denied");
  }
};

}  // namespace

TEST_CASE("apply_context_rules") {
  const std::vector<SchedulingScore> w = {{"slam", 3}, {"speech", 1}};
  const std::vector<ContextRule> rules = {{"quiet", "speech", "moving", 0.0}};
  CHECK(apply_context_rules(w, rules, {{"quiet", true}})[1].weight == 0.0);
  CHECK(apply_context_rules(w, rules, {{"quiet", false}}) == w);
  CHECK(apply_context_rules(w, rules, {}) == w);

  // Several active rules on one module: lowest forced value, in any order.
  std::vector<ContextRule> many = {{"a", "slam", "x", 2.0}, {"b", "slam", "y", 0.5},
                                   {"c", "slam", "z", 1.0}};
  const std::map<std::string, bool> active = {{"a", true}, {"b", true}, {"c", true}};
  std::sort(many.begin(), many.end(), [](auto& x, auto& y) { return x.id < y.id; });
  do {
    const auto out = apply_context_rules(w, many, active);
    CHECK(out[0].weight == 0.5);
    CHECK(out[1].weight == 1.0);
  } while (std::next_permutation(many.begin(), many.end(),
                                 [](auto& x, auto& y) { return x.id < y.id; }));
  CHECK(apply_context_rules(w, many, {{"a", true}, {"c", true}})[0].weight == 1.0);
}

TEST_CASE("aggregated score stream") {
  const auto cfg = robot();
  StreamRegistry reg;
  create_input_streams(cfg, reg);
  const auto agg = instantiate_scores(cfg, reg);
  std::vector<json> out;
  auto sub = reg.subscribe(agg, [&](const Event& e) { out.push_back(*e.payload); });
  emit_constant_sources(cfg, reg, 0);
  reg.emit("imu", moving(), 0);
  reg.emit("slam/tracking_lost", {{"lost", true}}, 0);
  CHECK(out.empty());  // sign has not scored yet
  reg.emit("side_camera", {{"signs", 2}}, 0);
  REQUIRE(out.size() == 1);
  // slam: 3 * (2 + 1), sign: 2 * 2, speech: 1 * 1
  CHECK(out[0] == json({9.0, 4.0, 1.0}));

  ControllerConfig single;
  single.sensors = {"imu"};
  single.modules = {{"only", 2.0, "imu.level", "", {}, {}}};
  StreamRegistry r1;
  create_input_streams(single, r1);
  const auto agg1 = instantiate_scores(single, r1);
  std::vector<json> a, s;
  auto sa = r1.subscribe(agg1, [&](const Event& e) { a.push_back((*e.payload)[0]); });
  auto ss = r1.subscribe(score_stream_id("only"), [&](const Event& e) { s.push_back(*e.payload); });
  for (int i = 0; i < 4; ++i) r1.emit("imu", {{"level", i}}, i);
  CHECK(a == s);
  CHECK(a.size() == 4);

  single.modules[0].score_expr = "lidar.range";
  StreamRegistry r2;
  create_input_streams(parse_config("[inputs]\nsensors=[\"imu\"]\n[[modules]]\nid=\"m\"\nscore_expr=\"1\"\n"), r2);
  CHECK_THROWS_AS(instantiate_scores(single, r2), LookupError);
}

TEST_CASE("lifecycle under CFS") {
  StreamRegistry reg;
  SimulatedBackend backend;
  Controller c(robot(), reg, backend);
  const auto init = c.initialize(0);
  CHECK(init.epoch == 0);
  CHECK(init.at("slam") == doctest::Approx(1.0));
  CHECK(init.at("sign") == doctest::Approx(2.0 / 3.0));
  CHECK(init.at("speech") == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(c.raw_scores());

  CHECK_FALSE(c.on_event("imu", still(), 0));
  CHECK_FALSE(c.on_event("slam/tracking_lost", {{"lost", false}}, 0));
  const auto first = c.on_event("side_camera", {{"signs", 0}}, 0);
  REQUIRE(first);
  CHECK(first->epoch == 1);
  CHECK(c.recompute_count() == 1);

  // Irrelevant stream, unchanged scores: nothing emitted.
  CHECK_FALSE(c.on_event("lidar", {{"ranges", {1.0}}}, 1000));
  CHECK_FALSE(c.on_event("imu", still(), 2000));
  CHECK_FALSE(c.on_event("camera", {{"frame", 1}}, 2000));

  const auto move = c.on_event("imu", moving(), 3000);
  REQUIRE(move);
  CHECK(move->epoch == 2);
  CHECK(move->at("speech") == 0.0);
  CHECK(c.is_gated("speech"));
  CHECK_FALSE(c.is_gated("slam"));
  double sum = 0;
  for (const auto& e : move->entries) sum += e.value;
  CHECK(sum == doctest::Approx(2.0));

  const auto stop = c.on_event("imu", still(), 4000);
  REQUIRE(stop);
  CHECK(stop->at("speech") > 0.0);
  CHECK(backend.schedule().size() == 4);
  CHECK(backend.last_epoch() == 3u);

  CHECK_THROWS_AS(c.on_event("motion", 1.0, 5000), LookupError);
  CHECK_THROWS_AS(c.on_event("radio", 1.0, 5000), LookupError);
  CHECK_THROWS_AS(c.on_event("imu", still(), 10), TimestampError);
}

TEST_CASE("relevant streams and context graph") {
  StreamRegistry reg;
  SimulatedBackend backend;
  Controller c(robot(), reg, backend);
  c.initialize();
  CHECK(c.relevant_streams() ==
        std::set<std::string>{"imu", "motion", "side_camera", "slam/tracking_lost"});

  const auto* g = c.context_graph("speech");
  REQUIRE(g);
  CHECK(std::any_of(g->nodes().begin(), g->nodes().end(), [](const auto& kv) {
    return kv.second.kind == NodeKind::ContextCondition;
  }));
  warm_up(c);
  CHECK(g->context_allows(c.stream_state()));
  c.on_event("imu", moving(), 100);
  CHECK_FALSE(c.context_graph("speech")->context_allows(c.stream_state()));
  CHECK(c.context_graph("speech")->ready_subtasks(c.stream_state(), {}).empty());
  CHECK(c.context_graph("slam")->context_allows(c.stream_state()));
}

TEST_CASE("RT mode emits slices") {
  auto cfg = robot();
  cfg.scheduler.mode = SchedulerMode::Rt;
  StreamRegistry reg;
  SimulatedBackend backend;
  Controller c(cfg, reg, backend);
  const auto init = c.initialize();
  CHECK(init.mode == SchedulerMode::Rt);
  CHECK(init.at("slam") == 500'000);
  warm_up(c);
  const auto a = c.on_event("imu", moving(), 10);
  REQUIRE(a);
  CHECK(a->at("speech") == 0);
  double sum = 0;
  for (const auto& e : a->entries) sum += e.value;
  CHECK(sum <= 1'000'000);
}

TEST_CASE("recompute interval holds changes until flushed") {
  auto cfg = robot();
  cfg.scheduler.min_recompute_interval_us = 10'000;
  StreamRegistry reg;
  SimulatedBackend backend;
  Controller c(cfg, reg, backend);
  c.initialize();
  warm_up(c, 20'000);
  CHECK(c.epoch() == 1);
  CHECK_FALSE(c.on_event("imu", moving(), 21'000));
  CHECK_FALSE(c.on_event("imu", still(), 22'000));
  CHECK_FALSE(c.on_event("imu", moving(), 23'000));
  const auto held = c.flush(23'000);
  REQUIRE(held);
  CHECK(held->at("speech") == 0.0);
  CHECK_FALSE(c.flush(23'000));
  CHECK(c.on_event("imu", still(), 40'000));
}

TEST_CASE("backend rejection carries the assignment") {
  StreamRegistry reg;
  RejectingBackend backend;
  Controller c(robot(), reg, backend);
  try {
    c.initialize();
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.assignment().epoch == 0);
    CHECK(e.assignment().entries.size() == 3);
  }
}

TEST_CASE("stale epochs are rejected") {
  SimulatedBackend backend;
  ScheduleAssignment a;
  a.entries = {{"m", 1.0}};
  a.epoch = 0;
  backend.apply_assignment(a, 0);
  CHECK_THROWS_AS(backend.apply_assignment(a, 10), StaleEpochError);
  a.epoch = 1;
  CHECK_NOTHROW(backend.apply_assignment(a, 10));
  a.epoch = 2;
  CHECK_THROWS_AS(backend.apply_assignment(a, 5), TimestampError);
}

TEST_CASE("topics go through the bus") {
  StreamRegistry reg;
  Bus bus;
  SimulatedBackend backend;
  Controller c(robot(), reg, backend, &bus);
  c.initialize();
  CHECK(bus.has_topic("slam/tracking_lost"));
  warm_up(c);
  const auto lost = c.on_event("slam/tracking_lost", {{"lost", true}}, 10);
  REQUIRE(lost);
  CHECK(lost->at("slam") > c.config().scheduler.processors * 9.0 / 14.0 - 1e-9);
  CHECK(bus.serializations() >= 2);
}

TEST_CASE("property: determinism and event economy") {
  testing::Gen gen(41);
  for (int round = 0; round < 30; ++round) {
    std::vector<std::pair<std::string, json>> events;
    for (int i = gen.integer(5, 80); i > 0; --i) {
      switch (gen.integer(0, 4)) {
        case 0: events.emplace_back("imu", gen.coin() ? moving() : still()); break;
        case 1: events.emplace_back("slam/tracking_lost", json{{"lost", gen.coin(0.2)}}); break;
        case 2: events.emplace_back("side_camera", json{{"signs", gen.integer(0, 2)}}); break;
        case 3: events.emplace_back("lidar", json{{"ranges", {1.0}}}); break;
        default: events.emplace_back("mic", json{{"samples", 16000}}); break;
      }
    }
    auto run = [&] {
      StreamRegistry reg;
      SimulatedBackend backend;
      Controller c(robot(), reg, backend);
      c.initialize();
      std::size_t relevant = 0;
      std::int64_t t = 0;
      for (const auto& [s, p] : events) {
        const auto before = c.epoch();
        const auto out = c.on_event(s, p, t += 1000);
        if (c.relevant_streams().contains(s)) ++relevant;
        else CHECK(c.epoch() == before);
        CHECK(bool(out) == (c.epoch() != before));
      }
      CHECK(c.recompute_count() <= relevant);
      return backend.schedule();
    };
    CHECK(run() == run());
  }
}
