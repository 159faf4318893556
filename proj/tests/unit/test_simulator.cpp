#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "ctxsched/error.hpp"
#include "ctxsched/simulator.hpp"
#include "reference_sim.hpp"
#include "test_util.hpp"

using namespace ctxsched;

namespace {

constexpr double kTol = 1e-6;

TimedAssignment cfs_at(std::int64_t t, std::uint64_t epoch,
                       std::initializer_list<std::pair<const char*, double>> shares) {
  TimedAssignment a{t, {SchedulerMode::Cfs, {}, epoch}};
  for (const auto& [m, v] : shares) a.assignment.entries.push_back({m, v});
  return a;
}

TimedAssignment rt_at(std::int64_t t, std::uint64_t epoch,
                      std::initializer_list<std::pair<const char*, double>> slices) {
  auto a = cfs_at(t, epoch, slices);
  a.assignment.mode = SchedulerMode::Rt;
  return a;
}

SimMachine machine(int n, std::int64_t q = 1000, std::int64_t p = 1'000'000) {
  SimMachine m;
  m.processors = n;
  m.quantum_us = q;
  m.period_us = p;
  return m;
}

std::map<std::string, double> cpu_by_module(const SimTrace& t, bool charged_only = false,
                                            std::int64_t from = 0,
                                            std::int64_t to = INT64_MAX) {
  std::map<std::string, double> out;
  for (const auto& r : t.rows) {
    if (charged_only && r.background) continue;
    if (r.time_us < from || r.time_us >= to) continue;
    out[r.module] += r.cpu_us;
  }
  return out;
}

void check_against_reference(const std::vector<SimJob>& jobs,
                             const std::vector<TimedAssignment>& schedule, const SimMachine& m) {
  const auto got = sim_run(jobs, schedule, m);
  const auto want = testing::reference_run(jobs, schedule, m);
  REQUIRE(got.jobs.size() == want.completion_us.size());
  for (std::size_t j = 0; j < jobs.size(); ++j)
    CHECK(std::abs(got.jobs[j].completion_us - want.completion_us[j]) <= kTol);
  CHECK(std::abs(got.makespan_us - want.makespan_us) <= kTol);
  const auto cpu = cpu_by_module(got);
  const auto& entries = schedule.front().assignment.entries;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto it = cpu.find(entries[i].module);
    CHECK(std::abs((it == cpu.end() ? 0.0 : it->second) - want.module_cpu_us[i]) <= kTol);
  }
}

}  // namespace

TEST_CASE("uncontended job") {
  const std::vector<SimJob> jobs = {{"a", 5000, 1000}};
  const auto t = sim_run(jobs, std::vector{cfs_at(0, 0, {{"a", 1.0}})}, machine(1));
  REQUIRE(t.jobs.size() == 1);
  CHECK(t.jobs[0].completion_us == doctest::Approx(6000));
  CHECK(t.jobs[0].start_us == 5000);
  CHECK(t.makespan_us == doctest::Approx(6000));
}

TEST_CASE("processor sharing on one core") {
  const std::vector<SimJob> jobs = {{"a", 0, 10'000}, {"b", 0, 10'000}};
  const auto t = sim_run(jobs, std::vector{cfs_at(0, 0, {{"a", 0.5}, {"b", 0.5}})}, machine(1));
  CHECK(t.jobs[0].completion_us == doctest::Approx(20'000));
  CHECK(t.jobs[1].completion_us == doctest::Approx(20'000));
}

TEST_CASE("3:1 weights on one core") {
  // a runs at 3/4 until it finishes at 400 ms, having left b 100 ms of
  // progress; b then runs alone for its remaining 200 ms.
  const std::vector<SimJob> jobs = {{"a", 0, 300'000}, {"b", 0, 300'000}};
  const std::vector schedule = {cfs_at(0, 0, {{"a", 0.75}, {"b", 0.25}})};
  const auto t = sim_run(jobs, schedule, machine(1));
  CHECK(t.jobs[0].completion_us == doctest::Approx(400'000));
  CHECK(t.jobs[1].completion_us == doctest::Approx(600'000));
  check_against_reference(jobs, schedule, machine(1));
}

TEST_CASE("CFS 3:1 split on four cores") {
  std::vector<SimJob> jobs;
  for (int i = 0; i < 4; ++i) jobs.push_back({"slam", 0, 100'000});
  for (int i = 0; i < 4; ++i) jobs.push_back({"speech", 0, 100'000});
  const auto t =
      sim_run(jobs, std::vector{cfs_at(0, 0, {{"slam", 3.0}, {"speech", 1.0}})}, machine(4));
  for (std::int64_t b = 0; b < 4000; b += 1000) {
    std::map<std::string, double> cores;
    for (const auto& r : t.rows)
      if (r.time_us <= b && b < r.time_us + r.duration_us) cores[r.module] += r.cores;
    CHECK(cores["slam"] == doctest::Approx(3.0));
    CHECK(cores["speech"] == doctest::Approx(1.0));
  }
}

TEST_CASE("RT slices bound charged time per period") {
  const std::vector<SimJob> jobs = {{"A", 0, 3'000'000}, {"B", 0, 3'000'000}};
  const auto m = machine(1, 1000, 1'000'000);
  const auto t = sim_run(jobs, std::vector{rt_at(0, 0, {{"A", 500'000}, {"B", 500'000}})}, m);
  for (std::int64_t p = 0; p < 6'000'000; p += 1'000'000) {
    const auto cpu = cpu_by_module(t, true, p, p + 1'000'000);
    for (const auto& [mod, us] : cpu) CHECK(us <= 500'000 + 1000 + kTol);
  }
  CHECK(t.makespan_us == doctest::Approx(6'000'000));
}

TEST_CASE("RT zero and exhausted slices run on idle cores") {
  const auto m = machine(1, 1000, 100'000);
  const std::vector<SimJob> jobs = {{"A", 0, 50'000}, {"B", 0, 50'000}};
  const std::vector schedule = {rt_at(0, 0, {{"A", 100'000}, {"B", 0}})};
  const auto t = sim_run(jobs, schedule, m);
  CHECK(t.jobs[0].completion_us == doctest::Approx(50'000));
  CHECK(t.jobs[1].completion_us == doctest::Approx(100'000));
  CHECK(std::any_of(t.rows.begin(), t.rows.end(), [](const TraceRow& r) { return r.background; }));
  check_against_reference(jobs, schedule, m);

  const std::vector schedule2 = {rt_at(0, 0, {{"A", 20'000}, {"B", 80'000}})};
  check_against_reference(jobs, schedule2, m);
}

TEST_CASE("assignments take effect at boundaries") {
  const auto m = machine(2, 1000, 10'000);
  CHECK(effective_time(SchedulerMode::Cfs, 0, m) == 0);
  CHECK(effective_time(SchedulerMode::Cfs, 1, m) == 1000);
  CHECK(effective_time(SchedulerMode::Cfs, 2000, m) == 2000);
  CHECK(effective_time(SchedulerMode::Rt, 2500, m) == 10'000);
  CHECK(effective_time(SchedulerMode::Rt, 10'000, m) == 10'000);

  const std::vector<SimJob> jobs = {{"a", 0, 30'000}};
  const std::vector schedule = {cfs_at(0, 0, {{"a", 1.0}, {"b", 1.0}}),
                                cfs_at(1500, 1, {{"a", 2.0}, {"b", 0.0}}),
                                cfs_at(1700, 2, {{"a", 1.5}, {"b", 0.5}})};
  const auto t = sim_run(jobs, schedule, m);
  REQUIRE(t.applied.size() == 4);
  CHECK(t.applied[0].time_us == 0);
  CHECK(t.applied[2].time_us == 2000);
  CHECK(t.applied[2].epoch == 2);
  CHECK(t.applied[2].value == 1.5);

  const std::vector rt = {rt_at(0, 0, {{"a", 5000}, {"b", 5000}}),
                          rt_at(2500, 1, {{"a", 10'000}, {"b", 0}})};
  const auto r = sim_run(jobs, rt, m);
  CHECK(r.applied.back().time_us == 10'000);
}

TEST_CASE("baseline and validation") {
  const std::vector<std::string> mods = {"a", "b"};
  const std::vector<SimJob> jobs = {{"a", 0, 4000}, {"b", 1500, 7000}};
  const auto m = machine(1);
  const auto eq = equal_assignment(mods, SchedulerMode::Cfs, m);
  CHECK(eq.at("a") == 0.5);
  CHECK(baseline_run(jobs, mods, m) == sim_run(jobs, std::vector{TimedAssignment{0, eq}}, m));
  CHECK(baseline_run({}, mods, m) == SimTrace{});

  const std::vector schedule = {cfs_at(0, 0, {{"a", 1}, {"b", 1}})};
  CHECK_THROWS_AS(sim_run(jobs, {}, m), ValidationError);
  CHECK_THROWS_AS(sim_run(std::vector<SimJob>{{"c", 0, 10}}, schedule, m), LookupError);
  CHECK_THROWS_AS(sim_run(std::vector<SimJob>{{"a", 0, 0}}, schedule, m), ValidationError);
  CHECK_THROWS_AS(sim_run(std::vector<SimJob>{{"a", 5, 1}, {"a", 0, 1}}, schedule, m),
                  ValidationError);
  CHECK_THROWS_AS(sim_run(jobs, std::vector{schedule[0], schedule[0]}, m), ValidationError);
  CHECK_THROWS_AS(sim_run(jobs, std::vector{schedule[0], rt_at(5, 1, {{"a", 1}, {"b", 1}})}, m),
                  ValidationError);
  CHECK_THROWS_AS(sim_run(jobs, std::vector{schedule[0], cfs_at(5, 1, {{"a", 1}})}, m),
                  ValidationError);
  CHECK_THROWS_AS(sim_run(jobs, schedule, machine(0)), ValidationError);
  CHECK_THROWS_AS(sim_run(jobs, schedule, machine(1, 300, 1000)), ValidationError);

  auto strict = m;
  strict.strict_cap = true;
  CHECK_THROWS_AS(sim_run(jobs, std::vector{cfs_at(0, 0, {{"a", 1}, {"b", 0}})}, strict), Error);
}

TEST_CASE("strict cap leaves cores idle") {
  auto m = machine(2);
  m.strict_cap = true;
  const std::vector<SimJob> jobs = {{"a", 0, 10'000}};
  const auto t = sim_run(jobs, std::vector{cfs_at(0, 0, {{"a", 0.5}, {"b", 1.5}})}, m);
  CHECK(t.jobs[0].completion_us == doctest::Approx(20'000));
}

TEST_CASE("property: matches the reference and keeps the invariants") {
  testing::Gen gen(71);
  const std::vector<std::string> names = {"a", "b", "c"};
  for (int round = 0; round < 300; ++round) {
    const auto q = std::int64_t{gen.pick(std::vector<int>{100, 1000})};
    auto m = machine(gen.integer(1, 3), q, q * gen.integer(2, 10));
    m.strict_cap = false;
    const auto mode = gen.coin() ? SchedulerMode::Cfs : SchedulerMode::Rt;

    std::vector<SimJob> jobs;
    std::int64_t t = 0;
    for (int i = gen.integer(1, 8); i > 0; --i) {
      t += gen.integer(0, 5) * q / 2;
      jobs.push_back({gen.pick(names), t, gen.integer(1, 30) * q / 4 + 1});
    }
    std::vector<TimedAssignment> schedule;
    std::int64_t at = 0;
    for (int i = gen.integer(1, 4), e = 0; i > 0; --i, ++e) {
      std::vector<SchedulingScore> w;
      for (const auto& n : names) w.push_back({n, double(gen.integer(0, 4))});
      auto a = mode == SchedulerMode::Cfs ? compute_cfs_shares(w, m.processors)
                                          : compute_rt_slices(w, m.period_us);
      a.epoch = static_cast<std::uint64_t>(e);
      schedule.push_back({at, a});
      at += gen.integer(0, 8) * q / 2;
    }
    CAPTURE(round);
    check_against_reference(jobs, schedule, m);

    const auto trace = sim_run(jobs, schedule, m);
    CHECK(trace == sim_run(jobs, schedule, m));

    // Conservation and lower bounds.
    std::map<std::string, double> work;
    for (const auto& j : jobs) work[j.module] += static_cast<double>(j.work_us);
    const auto cpu = cpu_by_module(trace);
    for (const auto& [mod, w] : work) CHECK(std::abs(cpu.at(mod) - w) <= kTol);
    double total = 0;
    for (const auto& [mod, c] : cpu) total += c;
    CHECK(total <= m.processors * trace.makespan_us + kTol);
    for (const auto& j : trace.jobs)
      CHECK(j.completion_us + kTol >= j.arrival_us + double(j.work_us) / m.processors);

    // Work conservation at every quantum boundary under CFS.
    if (mode == SchedulerMode::Cfs) {
      for (std::int64_t b = 0; b < trace.makespan_us; b += q) {
        int runnable = 0;
        for (const auto& j : trace.jobs)
          if (j.start_us <= b && j.completion_us > b + kTol) ++runnable;
        double cores = 0;
        for (const auto& r : trace.rows)
          if (r.time_us <= b && b < r.time_us + r.duration_us) cores += r.cores;
        CHECK(cores == doctest::Approx(std::min(m.processors, runnable)));
      }
    } else {
      // Charged time per period stays within N * slice plus one quantum.
      for (std::int64_t p = 0; p < trace.makespan_us; p += m.period_us) {
        std::map<std::string, double> charged;
        for (const auto& r : trace.rows)
          if (!r.background && r.time_us >= p && r.time_us < p + m.period_us)
            charged[r.module] += r.cpu_us;
        for (const auto& [mod, us] : charged) {
          double slice = 0;
          for (const auto& a : trace.applied)
            if (a.module == mod && a.time_us <= p) slice = a.value;
          if (p == 0 && trace.applied.front().time_us > 0) slice = double(m.period_us) / 3;
          CHECK(us <= m.processors * slice + q + kTol);
        }
      }
    }
  }
}
