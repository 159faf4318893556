#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxsched/config.hpp"
#include "ctxsched/simulator.hpp"
#include "ctxsched/timeline.hpp"

namespace ctxsched {

enum class Variant { Baseline, CfsCa, RtCa };

const char* to_string(Variant v);
/// Accepts "baseline", "cfs_ca", "rt_ca". Throws ValidationError.
Variant parse_variant(const std::string& text);

inline constexpr Variant kAllVariants[] = {Variant::Baseline, Variant::CfsCa, Variant::RtCa};

struct WeightPoint {
  std::int64_t time_us = 0;
  std::string module;
  double weight = 0.0;

  friend bool operator==(const WeightPoint&, const WeightPoint&) = default;
};

struct ModuleMetrics {
  std::string module;
  double total_ms = 0.0;      // sum over jobs of completion - arrival
  std::size_t jobs = 0;       // jobs simulated
  std::size_t dropped = 0;    // jobs skipped while a context rule gated the module

  friend bool operator==(const ModuleMetrics&, const ModuleMetrics&) = default;
};

struct MetricsReport {
  std::string timeline;
  Variant variant = Variant::Baseline;
  std::vector<ModuleMetrics> modules;  // config order
  double total_ms = 0.0;               // sum of module totals
  double makespan_ms = 0.0;
  double speedup = 1.0;                // baseline makespan / this makespan
  std::vector<WeightPoint> weights;    // effective weights at each assignment
  std::size_t recompute_count = 0;     // assignments after the initial policy
  std::size_t event_count = 0;
  std::size_t relevant_event_count = 0;  // events on streams feeding a score or rule
  std::uint64_t input_digest = 0;
  std::vector<std::string> warnings;
  std::vector<TimedAssignment> schedule;  // as issued by the controller
};

struct ReplayResult {
  MetricsReport report;
  SimTrace trace;
};

/// Machine described by the config's [scheduler] table.
SimMachine machine_for(const ControllerConfig& config);

/// Throws ValidationError for an entry on a stream that is not a config
/// input, or a triggered module with no work_us from the entry or the config.
void check_timeline(const Timeline& timeline, const ControllerConfig& config);

/// Runs one variant without computing the speedup (left at 1).
///
/// Each entry is emitted into its stream at t_ms (for the context-aware
/// variants, through the controller) and enqueues one job for every module
/// that lists the stream as a trigger. While a context rule gates a module,
/// the context-aware variants skip that module's jobs. The baseline runs the
/// same jobs under equal CFS shares. Throws ValidationError for an entry on
/// a stream that is not a config input, or a triggered module with no
/// work_us from the entry or the config.
ReplayResult run_variant(const Timeline& timeline, const ControllerConfig& config, Variant variant,
                         const SimMachine& machine);

/// run_variant plus the baseline run needed for the speedup.
ReplayResult replay(const Timeline& timeline, const ControllerConfig& config, Variant variant,
                    const SimMachine& machine);

/// All three variants, run concurrently on identical inputs, in
/// kAllVariants order. Throws Error if the variants saw different inputs.
std::vector<ReplayResult> compare(const Timeline& timeline, const ControllerConfig& config,
                                  const SimMachine& machine);

/// Writes weights.csv, shares.csv, jobs.csv and summary.csv into `out_dir`
/// (created if needed).
void emit_traces(const ReplayResult& result, const std::filesystem::path& out_dir);

/// Writes trace.csv: time_us,module,share_or_slice,cpu_us.
void emit_sim_trace(const SimTrace& trace, const std::filesystem::path& path);

/// Writes each variant into `out_dir/<variant>/` plus a combined
/// `out_dir/summary.csv`.
void emit_comparison(const std::vector<ReplayResult>& results, const std::filesystem::path& out_dir);

/// Fixed-width comparison table for terminals.
std::string format_summary_table(const std::vector<ReplayResult>& results);

}  // namespace ctxsched
