#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ctxsched/allocation.hpp"
#include "ctxsched/error.hpp"

namespace ctxsched {

/// Receives assignments from the controller in epoch order.
class ScheduleBackend {
 public:
  virtual ~ScheduleBackend() = default;

  /// Applies `assignment`, issued at virtual time `time_us`. Throws
  /// StaleEpochError unless the epoch is newer than the last applied one.
  void apply_assignment(const ScheduleAssignment& assignment, std::int64_t time_us);

  std::optional<std::uint64_t> last_epoch() const noexcept { return last_epoch_; }

 protected:
  virtual void do_apply(const ScheduleAssignment& assignment, std::int64_t time_us) = 0;

 private:
  std::optional<std::uint64_t> last_epoch_;
};

struct TimedAssignment {
  std::int64_t time_us = 0;
  ScheduleAssignment assignment;

  friend bool operator==(const TimedAssignment&, const TimedAssignment&) = default;
};

/// Collects assignments as the schedule a simulator run replays. The
/// simulator applies each one at the next quantum boundary (CFS) or the next
/// period boundary (RT).
class SimulatedBackend : public ScheduleBackend {
 public:
  const std::vector<TimedAssignment>& schedule() const noexcept { return schedule_; }

 protected:
  void do_apply(const ScheduleAssignment& assignment, std::int64_t time_us) override;

 private:
  std::vector<TimedAssignment> schedule_;
};

}  // namespace ctxsched
