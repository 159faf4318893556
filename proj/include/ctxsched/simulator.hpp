#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxsched/allocation.hpp"
#include "ctxsched/backend.hpp"

namespace ctxsched {

struct SimMachine {
  int processors = 1;
  std::int64_t quantum_us = 1'000;
  std::int64_t period_us = 1'000'000;  // RT period
  double memory_mb = 4096.0;
  /// CFS only: a module never gets more than its share, even when cores
  /// sit idle (cpu.max semantics).
  bool strict_cap = false;

  /// Throws ValidationError unless processors >= 1, quantum > 0 and the
  /// quantum divides the period.
  void validate() const;
};

/// One single-threaded unit of module work.
struct SimJob {
  std::string module;
  std::int64_t arrival_us = 0;
  std::int64_t work_us = 0;  // CPU time required

  friend bool operator==(const SimJob&, const SimJob&) = default;
};

struct JobRecord {
  std::string module;
  std::int64_t arrival_us = 0;
  std::int64_t work_us = 0;
  std::int64_t start_us = 0;   // first quantum boundary at or after arrival
  double completion_us = 0.0;
  double service_us = 0.0;     // time spent with a non-zero rate

  friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

/// Constant-rate stretch of one module's execution.
struct TraceRow {
  std::int64_t time_us = 0;
  std::int64_t duration_us = 0;
  std::string module;
  double share_or_slice = 0.0;  // value of the assignment in force
  double cores = 0.0;           // rate granted, in cores
  double cpu_us = 0.0;          // CPU time consumed in the stretch
  bool background = false;      // RT: ran outside its budget on idle cores

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

/// Allocation as it took effect inside the simulator.
struct AppliedAllocation {
  std::int64_t time_us = 0;
  std::uint64_t epoch = 0;
  std::string module;
  double value = 0.0;

  friend bool operator==(const AppliedAllocation&, const AppliedAllocation&) = default;
};

struct SimTrace {
  std::vector<TraceRow> rows;
  std::vector<AppliedAllocation> applied;
  std::vector<JobRecord> jobs;  // input order
  double makespan_us = 0.0;     // latest completion

  friend bool operator==(const SimTrace&, const SimTrace&) = default;
};

/// Time at which an assignment issued at `issued_us` takes effect: the next
/// quantum boundary under CFS, the next period boundary under RT.
std::int64_t effective_time(SchedulerMode mode, std::int64_t issued_us, const SimMachine& machine);

/// Runs `jobs` on the machine under a timed assignment schedule.
///
/// Decisions are made at quantum boundaries. A job becomes runnable at the
/// first boundary at or after its arrival and is capped at one core; a
/// module's rate is split equally over its runnable jobs, and a job that
/// finishes mid-quantum leaves its remaining capacity unused until the next
/// boundary.
///
/// CFS: cores are water-filled over runnable modules in proportion to their
/// shares; capacity a module cannot use goes to the others, and zero-share
/// modules run only on capacity nobody else can use (unless strict_cap).
/// RT: each module gets a budget of N * t_c per period, reset at period
/// boundaries. Modules with budget left share the cores equally. Modules
/// with a zero slice or an exhausted budget run outside the RT class, on
/// cores the budgeted modules leave idle; that time is not charged to any
/// budget.
///
/// Before the first assignment takes effect all modules get equal weight.
/// Throws ValidationError for an empty or inconsistent schedule, unsorted
/// or zero-work jobs; LookupError for a job on an unknown module; Error if
/// jobs can never finish (strict_cap with zero shares).
SimTrace sim_run(std::span<const SimJob> jobs, std::span<const TimedAssignment> schedule,
                 const SimMachine& machine);

/// Equal-weight assignment over `modules`.
ScheduleAssignment equal_assignment(std::span<const std::string> modules, SchedulerMode mode,
                                    const SimMachine& machine);

/// sim_run under a constant equal CFS assignment.
SimTrace baseline_run(std::span<const SimJob> jobs, std::span<const std::string> modules,
                      const SimMachine& machine);

}  // namespace ctxsched
