#include "ctxsched/cgroup.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <mutex>

#include "ctxsched/error.hpp"

namespace ctxsched {

std::string format_cpu_max(double share, std::int64_t period_us) {
  if (!std::isfinite(share) || share < 0.0)
    throw ValidationError("CPU share must be finite and >= 0");
  if (period_us <= 0) throw ValidationError("cpu.max period must be > 0");
  const auto quota = std::llround(share * static_cast<double>(period_us));
  return std::to_string(quota) + " " + std::to_string(period_us);
}

std::string format_rt_runtime(double slice_us) {
  if (!std::isfinite(slice_us) || slice_us < 0.0 || slice_us > static_cast<double>(kMaxRtPeriodUs))
    throw ValidationError("RT runtime must be within [0, 1000000] us");
  return std::to_string(std::llround(std::floor(slice_us)));
}

const char* cgroup_file(SchedulerMode mode) {
  return mode == SchedulerMode::Cfs ? "cpu.max" : "cpu.rt_runtime_us";
}

std::vector<CgroupTarget> targets_under(const std::filesystem::path& root,
                                        std::span<const std::string> modules) {
  std::vector<CgroupTarget> out;
  for (const auto& m : modules) out.push_back({m, root / m});
  return out;
}

namespace {

std::mutex write_mu;

void write_file(const std::filesystem::path& file, const std::string& content) {
  const int fd = ::open(file.c_str(), O_WRONLY | O_TRUNC | O_CLOEXEC);
  if (fd < 0) throw CgroupError(file.string(), errno, "cannot open cgroup file");
  const auto* p = content.data();
  auto left = content.size();
  while (left > 0) {
    const auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int code = errno;
      ::close(fd);
      throw CgroupError(file.string(), code, "cannot write cgroup file");
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::close(fd) != 0) throw CgroupError(file.string(), errno, "cannot write cgroup file");
}

}  // namespace

void write_cgroup(const ScheduleAssignment& assignment, std::span<const CgroupTarget> targets) {
  std::vector<std::pair<std::filesystem::path, std::string>> writes;
  for (const auto& e : assignment.entries) {
    const CgroupTarget* target = nullptr;
    for (const auto& t : targets)
      if (t.module == e.module) target = &t;
    if (!target) throw LookupError("no cgroup target for module '" + e.module + "'");
    if (!std::filesystem::is_directory(target->path))
      throw CgroupError(target->path.string(), ENOENT, "cgroup directory missing");
    const auto file = target->path / cgroup_file(assignment.mode);
    if (!std::filesystem::exists(file))
      throw CapabilityError(file.string(), ENOENT,
                            assignment.mode == SchedulerMode::Cfs
                                ? "kernel lacks CFS bandwidth control"
                                : "kernel lacks RT group scheduling");
    writes.emplace_back(file, assignment.mode == SchedulerMode::Cfs ? format_cpu_max(e.value)
                                                                    : format_rt_runtime(e.value));
  }
  std::lock_guard lock(write_mu);
  for (const auto& [file, content] : writes) write_file(file, content);
}

void CgroupBackend::do_apply(const ScheduleAssignment& assignment, std::int64_t) {
  write_cgroup(assignment, targets_);
}

}  // namespace ctxsched
