#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctxsched/allocation.hpp"
#include "ctxsched/task_graph.hpp"

namespace ctxsched {

enum class DerivedOp { Filter, Map, Combine };

/// A stream computed from other streams. Filter and map stages see the
/// incoming payload as `value`; a combine stage sees the array of latest
/// parent payloads as `value` and re-emits `expr` over it.
struct DerivedStream {
  std::string id;
  std::vector<std::string> from;
  DerivedOp op = DerivedOp::Map;
  std::string expr;

  friend bool operator==(const DerivedStream&, const DerivedStream&) = default;
};

struct ModuleDescriptor {
  std::string id;
  double priority = 1.0;   // relative priority, > 0
  std::string score_expr;  // stream expression; w = priority * score
  std::string graph;       // task graph id, optional
  std::vector<std::string> triggers;     // streams whose events enqueue a job
  std::optional<std::int64_t> work_us;   // default job cost

  friend bool operator==(const ModuleDescriptor&, const ModuleDescriptor&) = default;
};

/// While `condition_expr` holds, the target module's weight is forced to
/// `forced_weight`.
struct ContextRule {
  std::string id;
  std::string target;
  std::string condition_expr;
  double forced_weight = 0.0;

  friend bool operator==(const ContextRule&, const ContextRule&) = default;
};

struct SchedulerSettings {
  SchedulerMode mode = SchedulerMode::Cfs;
  int processors = 1;
  std::int64_t period_us = 1'000'000;
  std::int64_t quantum_us = 1'000;
  std::int64_t min_recompute_interval_us = 0;

  friend bool operator==(const SchedulerSettings&, const SchedulerSettings&) = default;
};

struct ControllerConfig {
  std::vector<std::string> sensors;  // external-input streams
  std::vector<std::string> topics;   // pub-sub topics wrapped as streams
  std::vector<DerivedStream> streams;
  std::vector<ModuleDescriptor> modules;
  std::vector<ContextRule> rules;
  std::vector<TaskDescription> graphs;
  SchedulerSettings scheduler;

  /// Every stream name the config defines: sensors, topics, derived.
  std::set<std::string> stream_names() const;
  const ModuleDescriptor& module(const std::string& id) const;
};

/// Parses and validates config text. Throws ConfigError naming the problem:
/// syntax, unknown stream, non-positive priority, and so on.
ControllerConfig parse_config(std::string_view text);
ControllerConfig load_config(const std::filesystem::path& path);

/// Re-validates a config built in code.
void validate_config(const ControllerConfig& config);

/// Serializes to the same format; parse_config(to_toml(c)) == c.
std::string to_toml(const ControllerConfig& config);

bool operator==(const ControllerConfig& a, const ControllerConfig& b);

}  // namespace ctxsched
