#include "ctxsched/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <future>
#include <map>
#include <sstream>

#include "ctxsched/controller.hpp"
#include "ctxsched/csv.hpp"
#include "ctxsched/error.hpp"

namespace ctxsched {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::CfsCa: return "cfs_ca";
    case Variant::RtCa: return "rt_ca";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  for (auto v : kAllVariants)
    if (text == to_string(v)) return v;
  throw ValidationError("unknown variant '" + text + "' (expected baseline, cfs_ca or rt_ca)");
}

SimMachine machine_for(const ControllerConfig& config) {
  SimMachine m;
  m.processors = config.scheduler.processors;
  m.quantum_us = config.scheduler.quantum_us;
  m.period_us = config.scheduler.period_us;
  return m;
}

namespace {

struct Workload {
  std::map<std::string, std::vector<std::string>> triggered;  // stream -> modules
};

Workload workload_of(const Timeline& timeline, const ControllerConfig& config) {
  Workload w;
  for (const auto& m : config.modules)
    for (const auto& s : m.triggers) w.triggered[s].push_back(m.id);

  std::vector<std::string> inputs = config.sensors;
  inputs.insert(inputs.end(), config.topics.begin(), config.topics.end());
  for (std::size_t i = 0; i < timeline.entries.size(); ++i) {
    const auto& e = timeline.entries[i];
    const std::string where = "timeline entry " + std::to_string(i);
    if (std::find(inputs.begin(), inputs.end(), e.stream) == inputs.end())
      throw ValidationError(where + ": stream '" + e.stream + "' is not an input of the config");
    auto it = w.triggered.find(e.stream);
    if (it == w.triggered.end() || e.work_us) continue;
    for (const auto& m : it->second)
      if (!config.module(m).work_us)
        throw ValidationError(where + ": module '" + m +
                              "' has no work_us in the entry or the config");
  }
  return w;
}

std::vector<std::string> capability_warnings(const ControllerConfig& config,
                                             const SimMachine& machine) {
  std::vector<std::string> out;
  for (const auto& m : config.modules) {
    if (m.graph.empty()) continue;
    for (const auto& d : config.graphs) {
      if (d.task_id != m.graph) continue;
      const auto [cores, memory] = TaskGraph::build(d).peak_constraint();
      if (cores > machine.processors)
        out.push_back("module '" + m.id + "' asks for " + std::to_string(cores) +
                      " cores; the machine has " + std::to_string(machine.processors));
      if (memory > machine.memory_mb)
        out.push_back("module '" + m.id + "' asks for " + format_double(memory) +
                      " MB; the machine has " + format_double(machine.memory_mb));
    }
  }
  return out;
}

void record_weights(MetricsReport& report, std::int64_t time_us,
                    const std::vector<SchedulingScore>& weights) {
  for (const auto& w : weights) report.weights.push_back({time_us, w.module, w.weight});
}

}  // namespace

void check_timeline(const Timeline& timeline, const ControllerConfig& config) {
  workload_of(timeline, config);
}

ReplayResult run_variant(const Timeline& timeline, const ControllerConfig& config, Variant variant,
                         const SimMachine& machine) {
  validate_config(config);
  machine.validate();
  const auto workload = workload_of(timeline, config);

  ReplayResult result;
  auto& report = result.report;
  report.timeline = timeline.name;
  report.variant = variant;
  report.event_count = timeline.entries.size();
  report.input_digest = input_digest(timeline);
  report.warnings = capability_warnings(config, machine);

  std::vector<std::string> names;
  for (const auto& m : config.modules) names.push_back(m.id);
  std::map<std::string, std::size_t> dropped;
  std::vector<SimJob> jobs;
  auto enqueue = [&](const TimelineEntry& e, const std::string& module) {
    const auto work = e.work_us ? *e.work_us : *config.module(module).work_us;
    jobs.push_back({module, e.t_ms * 1000, work});
  };

  if (variant == Variant::Baseline) {
    std::vector<SchedulingScore> equal;
    for (const auto& n : names) equal.push_back({n, 1.0});
    record_weights(report, 0, equal);
    for (const auto& e : timeline.entries) {
      auto it = workload.triggered.find(e.stream);
      if (it == workload.triggered.end()) continue;
      for (const auto& m : it->second) enqueue(e, m);
    }
    result.trace = baseline_run(jobs, names, machine);
  } else {
    auto cfg = config;
    cfg.scheduler.mode = variant == Variant::CfsCa ? SchedulerMode::Cfs : SchedulerMode::Rt;
    cfg.scheduler.processors = machine.processors;
    cfg.scheduler.quantum_us = machine.quantum_us;
    cfg.scheduler.period_us = machine.period_us;

    StreamRegistry registry;
    Bus bus;
    SimulatedBackend backend;
    Controller controller(cfg, registry, backend, &bus);
    controller.initialize(0);
    std::vector<SchedulingScore> initial;
    for (const auto& m : cfg.modules) initial.push_back({m.id, m.priority});
    record_weights(report, 0, initial);
    if (controller.epoch() > 0) record_weights(report, 0, *controller.effective_scores());

    std::int64_t last_us = 0;
    for (const auto& e : timeline.entries) {
      last_us = e.t_ms * 1000;
      if (controller.on_event(e.stream, e.payload, last_us))
        record_weights(report, last_us, *controller.effective_scores());
      if (controller.relevant_streams().contains(e.stream)) ++report.relevant_event_count;
      auto it = workload.triggered.find(e.stream);
      if (it == workload.triggered.end()) continue;
      for (const auto& m : it->second) {
        if (controller.is_gated(m))
          ++dropped[m];
        else
          enqueue(e, m);
      }
    }
    if (controller.flush(last_us)) record_weights(report, last_us, *controller.effective_scores());

    report.recompute_count = controller.recompute_count();
    report.schedule = backend.schedule();
    result.trace = sim_run(jobs, report.schedule, machine);
  }

  for (const auto& n : names) {
    ModuleMetrics mm;
    mm.module = n;
    mm.dropped = dropped[n];
    for (const auto& j : result.trace.jobs) {
      if (j.module != n) continue;
      ++mm.jobs;
      mm.total_ms += (j.completion_us - static_cast<double>(j.arrival_us)) / 1000.0;
    }
    report.total_ms += mm.total_ms;
    report.modules.push_back(std::move(mm));
  }
  report.makespan_ms = result.trace.makespan_us / 1000.0;
  return result;
}

namespace {

double speedup_of(double baseline_ms, double variant_ms) {
  return variant_ms > 0.0 ? baseline_ms / variant_ms : 1.0;
}

}  // namespace

ReplayResult replay(const Timeline& timeline, const ControllerConfig& config, Variant variant,
                    const SimMachine& machine) {
  auto result = run_variant(timeline, config, variant, machine);
  if (variant != Variant::Baseline) {
    const auto base = run_variant(timeline, config, Variant::Baseline, machine);
    result.report.speedup = speedup_of(base.report.makespan_ms, result.report.makespan_ms);
  }
  return result;
}

std::vector<ReplayResult> compare(const Timeline& timeline, const ControllerConfig& config,
                                  const SimMachine& machine) {
  std::vector<std::future<ReplayResult>> runs;
  for (auto v : kAllVariants)
    runs.push_back(std::async(std::launch::async, [&timeline, &config, &machine, v] {
      return run_variant(timeline, config, v, machine);
    }));
  std::vector<ReplayResult> results;
  for (auto& f : runs) results.push_back(f.get());

  for (const auto& r : results)
    if (r.report.input_digest != results.front().report.input_digest)
      throw Error("variants consumed different inputs");
  const double base = results.front().report.makespan_ms;
  for (auto& r : results) r.report.speedup = speedup_of(base, r.report.makespan_ms);
  return results;
}

namespace {

std::vector<CsvRow> summary_rows(const MetricsReport& report) {
  std::vector<CsvRow> rows;
  const std::string variant = to_string(report.variant);
  for (const auto& m : report.modules)
    rows.push_back({variant, m.module, format_double(m.total_ms), format_double(report.makespan_ms),
                    format_double(report.speedup)});
  rows.push_back({variant, "ALL", format_double(report.total_ms), format_double(report.makespan_ms),
                  format_double(report.speedup)});
  return rows;
}

const CsvRow kSummaryHeader = {"variant", "module", "total_ms", "makespan_ms", "speedup"};

}  // namespace

void emit_traces(const ReplayResult& result, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<CsvRow> rows;
  for (const auto& w : result.report.weights)
    rows.push_back({std::to_string(w.time_us), w.module, format_double(w.weight)});
  write_csv(out_dir / "weights.csv", {"time_us", "module", "weight"}, rows);

  rows.clear();
  for (const auto& a : result.trace.applied)
    rows.push_back({std::to_string(a.time_us), a.module, format_double(a.value)});
  write_csv(out_dir / "shares.csv", {"time_us", "module", "share"}, rows);

  rows.clear();
  for (const auto& j : result.trace.jobs)
    rows.push_back({j.module, std::to_string(j.arrival_us), std::to_string(j.work_us),
                    format_double(j.completion_us)});
  write_csv(out_dir / "jobs.csv", {"module", "arrival_us", "work_us", "completion_us"}, rows);

  write_csv(out_dir / "summary.csv", kSummaryHeader, summary_rows(result.report));
}

void emit_sim_trace(const SimTrace& trace, const std::filesystem::path& path) {
  std::vector<CsvRow> rows;
  for (const auto& r : trace.rows)
    rows.push_back({std::to_string(r.time_us), r.module, format_double(r.share_or_slice),
                    format_double(r.cpu_us)});
  write_csv(path, {"time_us", "module", "share_or_slice", "cpu_us"}, rows);
}

void emit_comparison(const std::vector<ReplayResult>& results, const std::filesystem::path& out_dir) {
  std::vector<CsvRow> rows;
  for (const auto& r : results) {
    emit_traces(r, out_dir / to_string(r.report.variant));
    for (auto& row : summary_rows(r.report)) rows.push_back(std::move(row));
  }
  write_csv(out_dir / "summary.csv", kSummaryHeader, rows);
}

std::string format_summary_table(const std::vector<ReplayResult>& results) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %14s %14s %9s %11s %8s\n", "variant", "total_ms",
                "makespan_ms", "speedup", "recomputes", "dropped");
  out << line;
  for (const auto& r : results) {
    std::size_t dropped = 0;
    for (const auto& m : r.report.modules) dropped += m.dropped;
    std::snprintf(line, sizeof line, "%-10s %14.3f %14.3f %9.4f %11zu %8zu\n",
                  to_string(r.report.variant), r.report.total_ms, r.report.makespan_ms,
                  r.report.speedup, r.report.recompute_count, dropped);
    out << line;
  }
  return out.str();
}

}  // namespace ctxsched
