#include "ctxsched/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxsched/expr.hpp"

namespace ctxsched {

using nlohmann::json;

std::vector<SchedulingScore> apply_context_rules(std::span<const SchedulingScore> scores,
                                                 std::span<const ContextRule> rules,
                                                 const std::map<std::string, bool>& active) {
  std::vector<SchedulingScore> out(scores.begin(), scores.end());
  for (auto& s : out) {
    double forced = std::numeric_limits<double>::infinity();
    for (const auto& r : rules) {
      if (r.target != s.module) continue;
      auto it = active.find(r.id);
      if (it != active.end() && it->second) forced = std::min(forced, r.forced_weight);
    }
    if (std::isfinite(forced)) s.weight = forced;
  }
  return out;
}

std::string score_stream_id(const std::string& module) { return "score/" + module; }
std::string rule_stream_id(const std::string& rule) { return "rule/" + rule; }

namespace {

std::string constant_source_id(const std::string& stream) { return "const/" + stream; }

// Registers `out` as the stream of `fn(expr evaluated over its inputs)`.
// Inputs are the expression's referenced streams, combined when there are
// several, or a private constant source when there are none.
void expression_stream(StreamRegistry& registry, const expr::Expression& e, const std::string& out,
                       std::function<json(const expr::Expression&, const expr::Resolver&)> fn) {
  const auto& refs = e.streams();
  for (const auto& r : refs)
    if (!registry.contains(r))
      throw LookupError("stream '" + r + "' used by '" + out + "' is not registered");

  if (refs.empty()) {
    const auto src = constant_source_id(out);
    registry.create_stream({SourceKind::ExternalInput, src});
    registry.map(src, out, [e, fn](const json&) {
      return fn(e, [](const std::string&) -> const json* { return nullptr; });
    });
  } else if (refs.size() == 1) {
    registry.map(refs.front(), out, [e, fn, name = refs.front()](const json& v) {
      return fn(e, [&](const std::string& s) -> const json* { return s == name ? &v : nullptr; });
    });
  } else {
    const auto in = out + "/in";
    registry.combine_latest(refs, in);
    registry.map(in, out, [e, fn, refs](const json& arr) {
      return fn(e, [&](const std::string& s) -> const json* {
        auto it = std::find(refs.begin(), refs.end(), s);
        return it == refs.end() ? nullptr : &arr[static_cast<std::size_t>(it - refs.begin())];
      });
    });
  }
}

void rule_streams(const ControllerConfig& config, StreamRegistry& registry) {
  for (const auto& r : config.rules)
    expression_stream(registry, expr::Expression::parse(r.condition_expr), rule_stream_id(r.id),
                      [](const expr::Expression& e, const expr::Resolver& res) {
                        return json(e.evaluate_bool(res));
                      });
}

}  // namespace

std::vector<TopicSubscription> create_input_streams(const ControllerConfig& config,
                                                    StreamRegistry& registry, Bus* bus) {
  for (const auto& s : config.sensors) registry.create_stream({SourceKind::ExternalInput, s});

  std::vector<TopicSubscription> wrappers;
  for (const auto& t : config.topics) {
    if (bus) {
      if (!bus->has_topic(t)) bus->create_topic(t, "json");
      wrappers.push_back(topic_as_stream(*bus, registry, t));
    } else {
      registry.create_stream({SourceKind::PubsubTopic, t});
    }
  }

  for (const auto& d : config.streams) {
    const auto e = expr::Expression::parse(d.expr);
    const auto none = [](const std::string&) -> const json* { return nullptr; };
    switch (d.op) {
      case DerivedOp::Filter:
        registry.filter(d.from.front(), d.id,
                        [e, none](const json& v) { return e.evaluate_bool(none, &v); });
        break;
      case DerivedOp::Map:
        registry.map(d.from.front(), d.id, [e, none](const json& v) { return e.evaluate(none, &v); });
        break;
      case DerivedOp::Combine: {
        const auto in = d.id + "/in";
        registry.combine_latest(d.from, in);
        registry.map(in, d.id, [e, none](const json& v) { return e.evaluate(none, &v); });
        break;
      }
    }
  }
  return wrappers;
}

std::string instantiate_scores(const ControllerConfig& config, StreamRegistry& registry) {
  std::vector<std::string> ids;
  for (const auto& m : config.modules) {
    const auto id = score_stream_id(m.id);
    expression_stream(registry, expr::Expression::parse(m.score_expr), id,
                      [priority = m.priority, module = m.id](const expr::Expression& e,
                                                             const expr::Resolver& res) {
                        const double w = priority * e.evaluate_number(res);
                        if (!std::isfinite(w) || w < 0.0)
                          throw EvalError("score of module '" + module +
                                          "' must be finite and >= 0");
                        return json(w);
                      });
    ids.push_back(id);
  }
  registry.combine_latest(ids, kAggregatedScoresStream);
  return kAggregatedScoresStream;
}

void emit_constant_sources(const ControllerConfig& config, StreamRegistry& registry,
                           std::int64_t time_us) {
  std::vector<std::string> outs;
  for (const auto& m : config.modules) outs.push_back(score_stream_id(m.id));
  for (const auto& r : config.rules) outs.push_back(rule_stream_id(r.id));
  for (const auto& o : outs) {
    const auto src = constant_source_id(o);
    if (registry.contains(src)) registry.emit(src, json::object(), time_us);
  }
}

Controller::Controller(ControllerConfig config, StreamRegistry& registry, ScheduleBackend& backend,
                       Bus* bus)
    : config_(std::move(config)), registry_(registry), backend_(backend), bus_(bus) {
  validate_config(config_);
}

ScheduleAssignment Controller::initialize(std::int64_t time_us) {
  if (initialized_) throw Error("controller already initialized");

  topic_wrappers_ = create_input_streams(config_, registry_, bus_);
  const auto aggregated = instantiate_scores(config_, registry_);
  rule_streams(config_, registry_);

  subscriptions_.push_back(registry_.subscribe(aggregated, [this](const Event& ev) {
    std::vector<SchedulingScore> scores;
    for (std::size_t i = 0; i < config_.modules.size(); ++i)
      scores.push_back({config_.modules[i].id, (*ev.payload)[i].get<double>()});
    raw_ = std::move(scores);
  }));
  for (const auto& r : config_.rules) {
    rule_states_[r.id] = false;
    subscriptions_.push_back(registry_.subscribe(
        rule_stream_id(r.id),
        [this, id = r.id](const Event& ev) { rule_states_[id] = ev.payload->get<bool>(); }));
  }

  const auto known = config_.stream_names();
  for (const auto& m : config_.modules) {
    if (m.graph.empty()) continue;
    auto desc = std::find_if(config_.graphs.begin(), config_.graphs.end(),
                             [&](const TaskDescription& d) { return d.task_id == m.graph; });
    auto graph = TaskGraph::build(*desc, &known);
    std::vector<std::string> roots;
    for (const auto& s : graph.subtasks())
      if (graph.predecessors(s).empty()) roots.push_back(s);
    for (const auto& r : config_.rules) {
      if (r.target != m.id) continue;
      ContextOverlay overlay;
      overlay.target_task = graph.task_id();
      GraphNode node;
      node.id = "ctx:" + r.id;
      node.kind = NodeKind::ContextCondition;
      node.condition = expr::Expression::parse("not (" + r.condition_expr + ")");
      node.weight_override = r.forced_weight;
      overlay.nodes.push_back(node);
      for (const auto& root : roots) overlay.edges.emplace_back(node.id, root);
      overlay.weight_override = r.forced_weight;
      graph = apply_overlay(graph, overlay);
    }
    graphs_.emplace(m.id, std::move(graph));
  }

  std::vector<std::string> outs;
  for (const auto& m : config_.modules) outs.push_back(score_stream_id(m.id));
  for (const auto& r : config_.rules) outs.push_back(rule_stream_id(r.id));
  for (const auto& name : known)
    for (const auto& o : outs)
      if (registry_.depends_on(o, name)) relevant_.insert(name);

  std::vector<SchedulingScore> initial;
  for (const auto& m : config_.modules) initial.push_back({m.id, m.priority});
  auto first = compute(initial);
  first.epoch = 0;
  push(first, time_us);
  epoch_ = 0;
  initialized_ = true;

  emit_constant_sources(config_, registry_, time_us);
  maybe_assign(time_us, false);
  return first;
}

std::optional<ScheduleAssignment> Controller::on_event(const std::string& stream, json payload,
                                                       std::int64_t time_us) {
  if (!initialized_) throw Error("controller not initialized");
  const bool is_topic =
      std::find(config_.topics.begin(), config_.topics.end(), stream) != config_.topics.end();
  const bool is_sensor =
      std::find(config_.sensors.begin(), config_.sensors.end(), stream) != config_.sensors.end();
  if (!is_topic && !is_sensor) throw LookupError("'" + stream + "' is not an input stream");
  if (is_topic && bus_)
    bus_->publish(stream, "input", "json", payload, time_us);
  else
    registry_.emit(stream, std::move(payload), time_us);
  return maybe_assign(time_us, false);
}

std::optional<ScheduleAssignment> Controller::flush(std::int64_t time_us) {
  if (!initialized_) throw Error("controller not initialized");
  return maybe_assign(time_us, true);
}

std::optional<std::vector<SchedulingScore>> Controller::effective_scores() const {
  if (!raw_) return std::nullopt;
  return apply_context_rules(*raw_, config_.rules, rule_states_);
}

bool Controller::is_gated(const std::string& module) const {
  for (const auto& r : config_.rules)
    if (r.target == module && rule_states_.at(r.id)) return true;
  return false;
}

const TaskGraph* Controller::context_graph(const std::string& module) const {
  auto it = graphs_.find(module);
  return it == graphs_.end() ? nullptr : &it->second;
}

StreamState Controller::stream_state() const {
  StreamState state;
  for (const auto& name : config_.stream_names()) {
    auto p = registry_.contains(name) ? registry_.latest(name) : nullptr;
    state[name] = p ? std::optional<json>(*p) : std::nullopt;
  }
  return state;
}

ScheduleAssignment Controller::compute(std::span<const SchedulingScore> weights) const {
  return config_.scheduler.mode == SchedulerMode::Cfs
             ? compute_cfs_shares(weights, config_.scheduler.processors)
             : compute_rt_slices(weights, config_.scheduler.period_us);
}

std::optional<ScheduleAssignment> Controller::maybe_assign(std::int64_t time_us, bool force) {
  if (!raw_) return std::nullopt;
  auto effective = apply_context_rules(*raw_, config_.rules, rule_states_);
  if (applied_weights_ && effective == *applied_weights_) return std::nullopt;
  const auto interval = config_.scheduler.min_recompute_interval_us;
  if (!force && interval > 0 && last_push_us_ && time_us - *last_push_us_ < interval)
    return std::nullopt;
  auto a = compute(effective);
  a.epoch = epoch_ + 1;
  push(a, time_us);
  epoch_ = a.epoch;
  applied_weights_ = std::move(effective);
  ++recomputes_;
  return a;
}

ScheduleAssignment Controller::push(ScheduleAssignment a, std::int64_t time_us) {
  try {
    backend_.apply_assignment(a, time_us);
  } catch (const std::exception& e) {
    throw BackendError(std::string("backend rejected assignment: ") + e.what(), std::move(a));
  }
  last_ = a;
  last_push_us_ = time_us;
  return a;
}

}  // namespace ctxsched
