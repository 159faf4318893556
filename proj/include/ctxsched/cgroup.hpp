#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctxsched/allocation.hpp"
#include "ctxsched/backend.hpp"

namespace ctxsched {

inline constexpr std::int64_t kCpuMaxPeriodUs = 100'000;

/// cpu.max content for a share of `share` cores: "<quota> <period>" with
/// quota = round(share * period). Throws ValidationError for a negative or
/// non-finite share.
std::string format_cpu_max(double share, std::int64_t period_us = kCpuMaxPeriodUs);

/// RT runtime file content: the slice in whole microseconds. Throws
/// ValidationError outside [0, 1000000].
std::string format_rt_runtime(double slice_us);

/// File written for a mode: "cpu.max" or "cpu.rt_runtime_us".
const char* cgroup_file(SchedulerMode mode);

struct CgroupTarget {
  std::string module;
  std::filesystem::path path;  // cgroup directory of the module
};

/// One cgroup directory per module under `root`, named after the module.
std::vector<CgroupTarget> targets_under(const std::filesystem::path& root,
                                        std::span<const std::string> modules);

/// Writes every entry of `assignment` to its module's cgroup. Throws
/// LookupError for a module without a target, CgroupError when a directory
/// is missing or a write fails, and CapabilityError when the control file
/// does not exist (kernel built without the feature).
void write_cgroup(const ScheduleAssignment& assignment, std::span<const CgroupTarget> targets);

/// Applies assignments by writing cgroup files as they arrive.
class CgroupBackend : public ScheduleBackend {
 public:
  explicit CgroupBackend(std::vector<CgroupTarget> targets) : targets_(std::move(targets)) {}

 protected:
  void do_apply(const ScheduleAssignment& assignment, std::int64_t time_us) override;

 private:
  std::vector<CgroupTarget> targets_;
};

}  // namespace ctxsched
