#include "ctxsched/backend.hpp"

#include <string>

namespace ctxsched {

void ScheduleBackend::apply_assignment(const ScheduleAssignment& assignment, std::int64_t time_us) {
  if (last_epoch_ && assignment.epoch <= *last_epoch_)
    throw StaleEpochError("assignment epoch " + std::to_string(assignment.epoch) +
                          " is not newer than applied epoch " + std::to_string(*last_epoch_));
  do_apply(assignment, time_us);
  last_epoch_ = assignment.epoch;
}

void SimulatedBackend::do_apply(const ScheduleAssignment& assignment, std::int64_t time_us) {
  if (!schedule_.empty() && time_us < schedule_.back().time_us)
    throw TimestampError("assignment time " + std::to_string(time_us) + " us precedes previous " +
                         std::to_string(schedule_.back().time_us) + " us");
  schedule_.push_back({time_us, assignment});
}

}  // namespace ctxsched
