#include "ctxsched/cli.hpp"

#include <chrono>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "ctxsched/cgroup.hpp"
#include "ctxsched/controller.hpp"
#include "ctxsched/csv.hpp"
#include "ctxsched/error.hpp"
#include "ctxsched/harness.hpp"

namespace ctxsched {

namespace {

struct Options {
  std::string config;
  std::string timeline;
  std::string variant = "cfs_ca";
  std::string out;
  std::string cgroup_root;
  std::optional<int> processors;
  std::optional<std::int64_t> quantum_us;
  std::optional<std::int64_t> period_us;
  bool strict_cap = false;
  bool permitted = false;
  bool realtime = false;
};

void add_machine_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--processors", o.processors, "Core count (overrides the config)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--quantum-us", o.quantum_us, "Scheduling quantum in us")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--period-us", o.period_us, "RT period in us")->check(CLI::PositiveNumber);
  cmd->add_flag("--strict-cap", o.strict_cap, "Never give a module more than its CFS share");
}

ControllerConfig load_with_overrides(const Options& o) {
  auto config = load_config(o.config);
  if (o.processors) config.scheduler.processors = *o.processors;
  if (o.quantum_us) config.scheduler.quantum_us = *o.quantum_us;
  if (o.period_us) config.scheduler.period_us = *o.period_us;
  validate_config(config);
  return config;
}

SimMachine machine_of(const ControllerConfig& config, const Options& o) {
  auto m = machine_for(config);
  m.strict_cap = o.strict_cap;
  return m;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  const auto config = load_with_overrides(o);
  out << o.config << ": ok (" << config.modules.size() << " modules, " << config.rules.size()
      << " rules, " << config.stream_names().size() << " streams)\n";
  if (!o.timeline.empty()) {
    std::vector<std::string> warnings;
    const auto tl = load_timeline(o.timeline, &warnings);
    print_warnings(warnings, err);
    check_timeline(tl, config);
    out << o.timeline << ": ok (" << tl.entries.size() << " entries, " << tl.duration_ms
        << " ms)\n";
  }
  return 0;
}

int cmd_replay(const Options& o, bool export_trace, std::ostream& out, std::ostream& err) {
  const auto config = load_with_overrides(o);
  std::vector<std::string> warnings;
  const auto tl = load_timeline(o.timeline, &warnings);
  print_warnings(warnings, err);
  const auto result = replay(tl, config, parse_variant(o.variant), machine_of(config, o));
  print_warnings(result.report.warnings, err);
  emit_traces(result, o.out);
  if (export_trace) emit_sim_trace(result.trace, std::filesystem::path(o.out) / "trace.csv");
  out << format_summary_table({result});
  return 0;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
  const auto config = load_with_overrides(o);
  std::vector<std::string> warnings;
  const auto tl = load_timeline(o.timeline, &warnings);
  print_warnings(warnings, err);
  const auto results = compare(tl, config, machine_of(config, o));
  print_warnings(results.front().report.warnings, err);
  if (!o.out.empty()) emit_comparison(results, o.out);
  out << format_summary_table(results);
  return 0;
}

int cmd_live(const Options& o, std::ostream& out, std::ostream& err) {
  if (!o.permitted) {
    err << "error: live writes to cgroup files; pass --i-have-cgroup-permissions to proceed\n";
    return 1;
  }
  auto config = load_with_overrides(o);
  const auto variant = parse_variant(o.variant);
  if (variant == Variant::Baseline) {
    err << "error: live needs a context-aware variant (cfs_ca or rt_ca)\n";
    return 1;
  }
  config.scheduler.mode = variant == Variant::CfsCa ? SchedulerMode::Cfs : SchedulerMode::Rt;
  std::vector<std::string> warnings;
  const auto tl = load_timeline(o.timeline, &warnings);
  print_warnings(warnings, err);

  std::vector<std::string> modules;
  for (const auto& m : config.modules) modules.push_back(m.id);
  CgroupBackend backend(targets_under(o.cgroup_root, modules));
  StreamRegistry registry;
  Bus bus;
  Controller controller(config, registry, backend, &bus);

  auto report = [&out](std::int64_t t, const ScheduleAssignment& a) {
    out << t << " epoch " << a.epoch;
    for (const auto& e : a.entries) out << " " << e.module << "=" << format_double(e.value);
    out << "\n";
  };
  report(0, controller.initialize(0));
  const auto start = std::chrono::steady_clock::now();
  for (const auto& e : tl.entries) {
    if (o.realtime) std::this_thread::sleep_until(start + std::chrono::milliseconds(e.t_ms));
    if (auto a = controller.on_event(e.stream, e.payload, e.t_ms * 1000))
      report(e.t_ms * 1000, *a);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware CPU scheduling controller and replay harness", "ctxsched"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Check a config (and optionally a timeline)");
  validate->add_option("--config", o.config, "Controller config (TOML)")->required();
  validate->add_option("--timeline", o.timeline, "Timeline JSON");
  add_machine_flags(validate, o);

  auto* replay_cmd = app.add_subcommand("replay", "Replay a timeline under one variant");
  auto* export_cmd =
      app.add_subcommand("export", "Replay and also write the simulator trace (trace.csv)");
  for (auto* cmd : {replay_cmd, export_cmd}) {
    cmd->add_option("--config", o.config, "Controller config (TOML)")->required();
    cmd->add_option("--timeline", o.timeline, "Timeline JSON")->required();
    cmd->add_option("--variant", o.variant, "baseline, cfs_ca or rt_ca")
        ->check(CLI::IsMember({"baseline", "cfs_ca", "rt_ca"}));
    cmd->add_option("--out", o.out, "Output directory")->required();
    add_machine_flags(cmd, o);
  }

  auto* compare_cmd = app.add_subcommand("compare", "Replay a timeline under all variants");
  compare_cmd->add_option("--config", o.config, "Controller config (TOML)")->required();
  compare_cmd->add_option("--timeline", o.timeline, "Timeline JSON")->required();
  compare_cmd->add_option("--out", o.out, "Output directory");
  add_machine_flags(compare_cmd, o);

  auto* live = app.add_subcommand("live", "Drive cgroup files from a timeline");
  live->add_option("--config", o.config, "Controller config (TOML)")->required();
  live->add_option("--timeline", o.timeline, "Timeline JSON")->required();
  live->add_option("--variant", o.variant, "cfs_ca or rt_ca")
      ->check(CLI::IsMember({"cfs_ca", "rt_ca"}));
  live->add_option("--cgroup-root", o.cgroup_root, "Directory holding one cgroup per module")
      ->required();
  live->add_flag("--i-have-cgroup-permissions", o.permitted, "Allow writing cgroup files");
  live->add_flag("--realtime", o.realtime, "Pace events by wall-clock time");
  add_machine_flags(live, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) return cmd_validate(o, out, err);
    if (replay_cmd->parsed()) return cmd_replay(o, false, out, err);
    if (export_cmd->parsed()) return cmd_replay(o, true, out, err);
    if (compare_cmd->parsed()) return cmd_compare(o, out, err);
    if (live->parsed()) return cmd_live(o, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ctxsched
