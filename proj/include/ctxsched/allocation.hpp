#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ctxsched {

enum class SchedulerMode { Cfs, Rt };

const char* to_string(SchedulerMode mode);
SchedulerMode parse_scheduler_mode(const std::string& text);

/// Non-negative, finite weight of one module.
struct SchedulingScore {
  std::string module;
  double weight = 0.0;

  friend bool operator==(const SchedulingScore&, const SchedulingScore&) = default;
};

struct Allocation {
  std::string module;
  double value = 0.0;  // CPU share in cores (CFS) or runtime in us per period (RT)

  friend bool operator==(const Allocation&, const Allocation&) = default;
};

/// Per-module CPU allocation produced by the controller. Entries keep the
/// order of the scores they were computed from.
struct ScheduleAssignment {
  SchedulerMode mode = SchedulerMode::Cfs;
  std::vector<Allocation> entries;
  std::uint64_t epoch = 0;

  /// Throws LookupError for an unknown module.
  double at(const std::string& module) const;
  bool contains(const std::string& module) const;

  friend bool operator==(const ScheduleAssignment&, const ScheduleAssignment&) = default;
};

/// Proportional CPU shares: s_c = N * w_c / sum(w). All-zero weights fall
/// back to N / n each. Throws ValidationError on an empty set, duplicate
/// modules, or a negative or non-finite weight.
ScheduleAssignment compute_cfs_shares(std::span<const SchedulingScore> scores, int processors);

/// Real-time runtime per period: t_c = floor(P * w_c / sum(w)) microseconds,
/// leftover microseconds stay unassigned. All-zero weights split equally.
ScheduleAssignment compute_rt_slices(std::span<const SchedulingScore> scores,
                                     std::int64_t period_us);

inline constexpr std::int64_t kMaxRtPeriodUs = 1'000'000;

}  // namespace ctxsched
