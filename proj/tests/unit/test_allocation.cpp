#include <doctest.h>

#include <cmath>
#include <limits>

#include "ctxsched/allocation.hpp"
#include "ctxsched/error.hpp"
#include "test_util.hpp"

using namespace ctxsched;

namespace {

std::vector<SchedulingScore> scores(std::initializer_list<std::pair<const char*, double>> w) {
  std::vector<SchedulingScore> out;
  for (const auto& [m, v] : w) out.push_back({m, v});
  return out;
}

std::vector<SchedulingScore> random_scores(testing::Gen& gen) {
  std::vector<SchedulingScore> out;
  const int n = gen.integer(1, 6);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    const double w = gen.integer(0, 10);
    any = any || w > 0;
    out.push_back({"m" + std::to_string(i), w});
  }
  if (!any) out[gen.integer(0, n - 1)].weight = gen.integer(1, 10);
  return out;
}

}  // namespace

TEST_CASE("cfs shares") {
  const auto even = compute_cfs_shares(scores({{"A", 1}, {"B", 1}, {"C", 1}, {"D", 1}}), 4);
  for (const auto& e : even.entries) CHECK(e.value == 1.0);
  CHECK(even.mode == SchedulerMode::Cfs);

  const auto weighted = compute_cfs_shares(scores({{"slam", 3}, {"speech", 1}}), 4);
  CHECK(weighted.at("slam") == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(weighted.at("speech") == doctest::Approx(1.0).epsilon(1e-15));

  const auto frozen = compute_cfs_shares(scores({{"slam", 5}, {"speech", 0}}), 4);
  CHECK(frozen.at("slam") == 4.0);
  CHECK(frozen.at("speech") == 0.0);

  const auto zeros = compute_cfs_shares(scores({{"a", 0}, {"b", 0}, {"c", 0}}), 3);
  for (const auto& e : zeros.entries) CHECK(e.value == 1.0);

  CHECK(weighted.entries[0].module == "slam");
  CHECK_THROWS_AS(weighted.at("nav"), LookupError);
}

TEST_CASE("rt slices") {
  const auto even = compute_rt_slices(scores({{"A", 1}, {"B", 1}}), 1'000'000);
  CHECK(even.at("A") == 500'000);
  CHECK(even.at("B") == 500'000);
  CHECK(even.mode == SchedulerMode::Rt);

  const auto weighted = compute_rt_slices(scores({{"A", 3}, {"B", 1}}), 1'000'000);
  CHECK(weighted.at("A") == 750'000);
  CHECK(weighted.at("B") == 250'000);

  const auto thirds = compute_rt_slices(scores({{"A", 1}, {"B", 1}, {"C", 1}}), 1'000'000);
  double sum = 0;
  for (const auto& e : thirds.entries) {
    CHECK(e.value == 333'333);
    sum += e.value;
  }
  CHECK(sum == 999'999);
}

TEST_CASE("invalid score sets") {
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  const auto inf = std::numeric_limits<double>::infinity();
  for (auto bad : {scores({}), scores({{"a", -1}}), scores({{"a", nan}}), scores({{"a", inf}}),
                   scores({{"a", 1}, {"a", 2}})}) {
    CHECK_THROWS_AS(compute_cfs_shares(bad, 2), ValidationError);
    CHECK_THROWS_AS(compute_rt_slices(bad, 1'000'000), ValidationError);
  }
  CHECK_THROWS_AS(compute_cfs_shares(scores({{"a", 1}}), 0), ValidationError);
  CHECK_THROWS_AS(compute_rt_slices(scores({{"a", 1}}), 0), ValidationError);
  CHECK_THROWS_AS(compute_rt_slices(scores({{"a", 1}}), kMaxRtPeriodUs + 1), ValidationError);
}

TEST_CASE("property: normalization, scale invariance, monotonicity") {
  testing::Gen gen(23);
  for (int round = 0; round < 1000; ++round) {
    const auto w = random_scores(gen);
    const int n_proc = gen.integer(1, 8);
    const std::int64_t period = gen.integer(1, 1000) * 1000;
    const auto s = compute_cfs_shares(w, n_proc);
    const auto t = compute_rt_slices(w, period);

    double sum_s = 0, sum_t = 0;
    for (const auto& e : s.entries) sum_s += e.value;
    for (const auto& e : t.entries) {
      CHECK(e.value >= 0);
      CHECK(e.value <= period);
      CHECK(e.value == std::floor(e.value));
      sum_t += e.value;
    }
    CHECK(sum_s == doctest::Approx(n_proc).epsilon(1e-12));
    CHECK(sum_t <= period);

    const double k = gen.pick(std::vector<double>{0.5, 2.0, 10.0, 0.001, 1e6});
    auto scaled = w;
    for (auto& e : scaled) e.weight *= k;
    const auto s2 = compute_cfs_shares(scaled, n_proc);
    const auto t2 = compute_rt_slices(scaled, period);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(std::abs(s2.entries[i].value - s.entries[i].value) <= 1e-9);
      CHECK(std::abs(t2.entries[i].value - t.entries[i].value) <= 1.0);
    }

    auto bumped = w;
    const auto c = static_cast<std::size_t>(gen.integer(0, static_cast<int>(w.size()) - 1));
    bumped[c].weight += gen.integer(1, 5);
    const auto s3 = compute_cfs_shares(bumped, n_proc);
    const auto t3 = compute_rt_slices(bumped, period);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i == c) {
        CHECK(s3.entries[i].value >= s.entries[i].value - 1e-12);
        CHECK(t3.entries[i].value >= t.entries[i].value);
      } else {
        CHECK(s3.entries[i].value <= s.entries[i].value + 1e-12);
        CHECK(t3.entries[i].value <= t.entries[i].value);
      }
    }
  }
}
