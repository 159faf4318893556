#include "ctxsched/allocation.hpp"

#include <cmath>
#include <set>

#include "ctxsched/error.hpp"

namespace ctxsched {

const char* to_string(SchedulerMode mode) { return mode == SchedulerMode::Cfs ? "cfs" : "rt"; }

SchedulerMode parse_scheduler_mode(const std::string& text) {
  if (text == "cfs") return SchedulerMode::Cfs;
  if (text == "rt") return SchedulerMode::Rt;
  throw ValidationError("unknown scheduler mode '" + text + "' (expected cfs or rt)");
}

double ScheduleAssignment::at(const std::string& module) const {
  for (const auto& e : entries)
    if (e.module == module) return e.value;
  throw LookupError("assignment has no module '" + module + "'");
}

bool ScheduleAssignment::contains(const std::string& module) const {
  for (const auto& e : entries)
    if (e.module == module) return true;
  return false;
}

namespace {

double checked_total(std::span<const SchedulingScore> scores) {
  if (scores.empty()) throw ValidationError("empty score set");
  std::set<std::string> seen;
  double total = 0.0;
  for (const auto& s : scores) {
    if (!seen.insert(s.module).second)
      throw ValidationError("duplicate score for module '" + s.module + "'");
    if (!std::isfinite(s.weight) || s.weight < 0.0)
      throw ValidationError("score for module '" + s.module + "' must be finite and >= 0");
    total += s.weight;
  }
  return total;
}

}  // namespace

ScheduleAssignment compute_cfs_shares(std::span<const SchedulingScore> scores, int processors) {
  if (processors < 1) throw ValidationError("processor count must be >= 1");
  const double total = checked_total(scores);
  const double n = static_cast<double>(processors);
  ScheduleAssignment a;
  a.mode = SchedulerMode::Cfs;
  for (const auto& s : scores) {
    const double share = total > 0.0 ? n * s.weight / total : n / static_cast<double>(scores.size());
    a.entries.push_back({s.module, share});
  }
  return a;
}

ScheduleAssignment compute_rt_slices(std::span<const SchedulingScore> scores,
                                     std::int64_t period_us) {
  if (period_us <= 0 || period_us > kMaxRtPeriodUs)
    throw ValidationError("RT period must be in (0, 1000000] us");
  const double total = checked_total(scores);
  const double p = static_cast<double>(period_us);
  ScheduleAssignment a;
  a.mode = SchedulerMode::Rt;
  for (const auto& s : scores) {
    const double exact = total > 0.0 ? p * s.weight / total : p / static_cast<double>(scores.size());
    a.entries.push_back({s.module, std::floor(exact)});
  }
  return a;
}

}  // namespace ctxsched
