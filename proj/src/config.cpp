#include "ctxsched/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ctxsched/error.hpp"
#include "ctxsched/expr.hpp"
#include "ctxsched/toml_lite.hpp"

namespace ctxsched {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ConfigError(where.empty() ? msg : where + ": " + msg);
}

void check_keys(const Json& table, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!table.is_object()) fail(where, "expected a table");
  for (const auto& [k, _] : table.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail(where, "unknown key '" + k + "'");
  }
}

std::string get_string(const Json& t, const char* key, const std::string& where, bool required = true) {
  if (!t.contains(key)) {
    if (required) fail(where, std::string("missing '") + key + "'");
    return {};
  }
  if (!t[key].is_string()) fail(where, std::string("'") + key + "' must be a string");
  return t[key].get<std::string>();
}

double get_number(const Json& t, const char* key, const std::string& where) {
  if (!t.contains(key)) fail(where, std::string("missing '") + key + "'");
  if (!t[key].is_number()) fail(where, std::string("'") + key + "' must be a number");
  return t[key].get<double>();
}

std::int64_t get_int(const Json& t, const char* key, const std::string& where) {
  if (!t[key].is_number_integer()) fail(where, std::string("'") + key + "' must be an integer");
  return t[key].get<std::int64_t>();
}

std::vector<std::string> get_string_list(const Json& t, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!t.contains(key)) return out;
  const Json& v = t[key];
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) fail(where, std::string("'") + key + "' must be a list of strings");
  for (const auto& e : v) {
    if (!e.is_string()) fail(where, std::string("'") + key + "' must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

const Json& table_array(const Json& doc, const char* key) {
  static const Json empty = Json::array();
  if (!doc.contains(key)) return empty;
  if (!doc[key].is_array()) fail("", std::string("[[") + key + "]] must be an array of tables");
  return doc[key];
}

expr::Expression parse_expr(const std::string& text, const std::string& where) {
  try {
    return expr::Expression::parse(text);
  } catch (const ExprError& e) {
    fail(where, e.what());
  }
}

void check_streams(const expr::Expression& e, const std::set<std::string>& known, const std::string& where) {
  for (const auto& s : e.streams())
    if (!known.contains(s)) fail(where, "unknown stream '" + s + "'");
}

const char* op_name(DerivedOp op) {
  switch (op) {
    case DerivedOp::Filter: return "filter";
    case DerivedOp::Map: return "map";
    case DerivedOp::Combine: return "combine";
  }
  return "?";
}

TaskDescription parse_graph(const Json& g, const std::string& where) {
  check_keys(g, where, {"task", "kind", "rule", "edges", "nodes"});
  TaskDescription d;
  d.task_id = get_string(g, "task", where);
  try {
    d.kind = parse_task_kind(get_string(g, "kind", where));
  } catch (const ValidationError& e) {
    fail(where, e.what());
  }
  d.satisfaction_rule = get_string(g, "rule", where, false);
  if (g.contains("edges")) {
    if (!g["edges"].is_array()) fail(where, "'edges' must be a list of [from, to] pairs");
    for (const auto& e : g["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
        fail(where, "'edges' must be a list of [from, to] pairs");
      d.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  if (g.contains("nodes")) {
    if (!g["nodes"].is_array()) fail(where, "'nodes' must be an array of tables");
    std::size_t i = 0;
    for (const auto& n : g["nodes"]) {
      const std::string nw = where + ".nodes[" + std::to_string(i++) + "]";
      check_keys(n, nw, {"id", "kind", "cores", "memory_mb", "condition", "weight_override"});
      GraphNode node;
      node.id = get_string(n, "id", nw);
      try {
        node.kind = parse_node_kind(get_string(n, "kind", nw));
      } catch (const ValidationError& e) {
        fail(nw, e.what());
      }
      if (n.contains("cores")) node.cores = static_cast<int>(get_int(n, "cores", nw));
      if (n.contains("memory_mb")) node.memory_mb = get_number(n, "memory_mb", nw);
      if (n.contains("condition")) node.condition = parse_expr(get_string(n, "condition", nw), nw);
      if (n.contains("weight_override")) node.weight_override = get_number(n, "weight_override", nw);
      d.nodes.push_back(std::move(node));
    }
  }
  return d;
}

ControllerConfig from_document(const Json& doc) {
  check_keys(doc, "", {"scheduler", "inputs", "streams", "modules", "rules", "graphs"});
  ControllerConfig c;

  if (doc.contains("scheduler")) {
    const Json& s = doc["scheduler"];
    check_keys(s, "[scheduler]", {"mode", "processors", "period_us", "quantum_us", "min_recompute_interval_us"});
    if (s.contains("mode")) {
      try {
        c.scheduler.mode = parse_scheduler_mode(get_string(s, "mode", "[scheduler]"));
      } catch (const ValidationError& e) {
        fail("[scheduler]", e.what());
      }
    }
    if (s.contains("processors")) c.scheduler.processors = static_cast<int>(get_int(s, "processors", "[scheduler]"));
    if (s.contains("period_us")) c.scheduler.period_us = get_int(s, "period_us", "[scheduler]");
    if (s.contains("quantum_us")) c.scheduler.quantum_us = get_int(s, "quantum_us", "[scheduler]");
    if (s.contains("min_recompute_interval_us"))
      c.scheduler.min_recompute_interval_us = get_int(s, "min_recompute_interval_us", "[scheduler]");
  }

  if (doc.contains("inputs")) {
    const Json& in = doc["inputs"];
    check_keys(in, "[inputs]", {"sensors", "topics"});
    c.sensors = get_string_list(in, "sensors", "[inputs]");
    c.topics = get_string_list(in, "topics", "[inputs]");
  }

  std::size_t i = 0;
  for (const auto& s : table_array(doc, "streams")) {
    const std::string where = "streams[" + std::to_string(i++) + "]";
    check_keys(s, where, {"id", "from", "op", "expr"});
    DerivedStream d;
    d.id = get_string(s, "id", where);
    d.from = get_string_list(s, "from", where);
    const auto op = get_string(s, "op", where);
    if (op == "filter")
      d.op = DerivedOp::Filter;
    else if (op == "map")
      d.op = DerivedOp::Map;
    else if (op == "combine")
      d.op = DerivedOp::Combine;
    else
      fail(where, "unknown op '" + op + "' (expected filter, map or combine)");
    d.expr = get_string(s, "expr", where);
    c.streams.push_back(std::move(d));
  }

  i = 0;
  for (const auto& m : table_array(doc, "modules")) {
    const std::string where = "modules[" + std::to_string(i++) + "]";
    check_keys(m, where, {"id", "priority", "score_expr", "graph", "triggers", "work_us"});
    ModuleDescriptor d;
    d.id = get_string(m, "id", where);
    d.priority = m.contains("priority") ? get_number(m, "priority", where) : 1.0;
    d.score_expr = get_string(m, "score_expr", where);
    d.graph = get_string(m, "graph", where, false);
    d.triggers = get_string_list(m, "triggers", where);
    if (m.contains("work_us")) d.work_us = get_int(m, "work_us", where);
    c.modules.push_back(std::move(d));
  }

  i = 0;
  for (const auto& r : table_array(doc, "rules")) {
    const std::string where = "rules[" + std::to_string(i++) + "]";
    check_keys(r, where, {"id", "target", "condition_expr", "forced_weight"});
    ContextRule d;
    d.id = get_string(r, "id", where);
    d.target = get_string(r, "target", where);
    d.condition_expr = get_string(r, "condition_expr", where);
    d.forced_weight = r.contains("forced_weight") ? get_number(r, "forced_weight", where) : 0.0;
    c.rules.push_back(std::move(d));
  }

  i = 0;
  for (const auto& g : table_array(doc, "graphs")) {
    c.graphs.push_back(parse_graph(g, "graphs[" + std::to_string(i++) + "]"));
  }

  validate_config(c);
  return c;
}

Json graph_document(const TaskDescription& d) {
  Json g = Json::object();
  g["task"] = d.task_id;
  g["kind"] = to_string(d.kind);
  if (!d.satisfaction_rule.empty()) g["rule"] = d.satisfaction_rule;
  Json edges = Json::array();
  for (const auto& [a, b] : d.edges) edges.push_back(Json::array({a, b}));
  g["edges"] = edges;
  Json nodes = Json::array();
  for (const auto& n : d.nodes) {
    Json j = Json::object();
    j["id"] = n.id;
    j["kind"] = to_string(n.kind);
    if (n.kind == NodeKind::CapabilityConstraint) {
      j["cores"] = n.cores;
      j["memory_mb"] = n.memory_mb;
    }
    if (n.condition) j["condition"] = n.condition->source();
    if (n.weight_override) j["weight_override"] = *n.weight_override;
    nodes.push_back(std::move(j));
  }
  if (!nodes.empty()) g["nodes"] = nodes;
  return g;
}

}  // namespace

std::set<std::string> ControllerConfig::stream_names() const {
  std::set<std::string> out(sensors.begin(), sensors.end());
  out.insert(topics.begin(), topics.end());
  for (const auto& s : streams) out.insert(s.id);
  return out;
}

const ModuleDescriptor& ControllerConfig::module(const std::string& id) const {
  for (const auto& m : modules)
    if (m.id == id) return m;
  throw LookupError("unknown module '" + id + "'");
}

void validate_config(const ControllerConfig& c) {
  const auto& s = c.scheduler;
  if (s.processors < 1) fail("[scheduler]", "processors must be >= 1");
  if (s.period_us <= 0 || s.period_us > kMaxRtPeriodUs)
    fail("[scheduler]", "period_us must be in (0, 1000000]");
  if (s.quantum_us <= 0) fail("[scheduler]", "quantum_us must be > 0");
  if (s.period_us % s.quantum_us != 0) fail("[scheduler]", "quantum_us must divide period_us");
  if (s.min_recompute_interval_us < 0) fail("[scheduler]", "min_recompute_interval_us must be >= 0");

  std::set<std::string> known;
  auto declare = [&](const std::string& name, const std::string& where) {
    if (name.empty()) fail(where, "stream name must not be empty");
    if (name == "value") fail(where, "'value' is reserved");
    if (!known.insert(name).second) fail(where, "stream '" + name + "' defined twice");
  };
  for (const auto& n : c.sensors) declare(n, "[inputs]");
  for (const auto& n : c.topics) declare(n, "[inputs]");

  for (std::size_t i = 0; i < c.streams.size(); ++i) {
    const auto& d = c.streams[i];
    const std::string where = "streams[" + std::to_string(i) + "] (" + d.id + ")";
    if (d.from.empty()) fail(where, "'from' names no stream");
    if (d.op != DerivedOp::Combine && d.from.size() != 1)
      fail(where, std::string(op_name(d.op)) + " takes exactly one input stream");
    for (const auto& f : d.from)
      if (!known.contains(f)) fail(where, "unknown stream '" + f + "'");
    const auto e = parse_expr(d.expr, where);
    if (!e.streams().empty())
      fail(where, "derived stream expressions refer to their input as 'value', not '" +
                      e.streams().front() + "'");
    declare(d.id, where);
  }

  if (c.modules.empty()) fail("", "config defines no modules (nothing to schedule)");
  std::set<std::string> module_ids;
  std::set<std::string> graph_ids;
  for (const auto& g : c.graphs) graph_ids.insert(g.task_id);
  for (std::size_t i = 0; i < c.modules.size(); ++i) {
    const auto& m = c.modules[i];
    const std::string where = "modules[" + std::to_string(i) + "] (" + m.id + ")";
    if (m.id.empty()) fail(where, "module id must not be empty");
    if (!module_ids.insert(m.id).second) fail(where, "duplicate module id");
    if (!std::isfinite(m.priority) || m.priority <= 0.0) fail(where, "priority must be > 0");
    check_streams(parse_expr(m.score_expr, where), known, where);
    if (!m.graph.empty() && !graph_ids.contains(m.graph))
      fail(where, "unknown graph '" + m.graph + "'");
    for (const auto& t : m.triggers)
      if (!known.contains(t)) fail(where, "unknown trigger stream '" + t + "'");
    if (m.work_us && *m.work_us <= 0) fail(where, "work_us must be > 0");
  }

  std::set<std::string> rule_ids;
  for (std::size_t i = 0; i < c.rules.size(); ++i) {
    const auto& r = c.rules[i];
    const std::string where = "rules[" + std::to_string(i) + "] (" + r.id + ")";
    if (r.id.empty()) fail(where, "rule id must not be empty");
    if (!rule_ids.insert(r.id).second) fail(where, "duplicate rule id");
    if (!module_ids.contains(r.target)) fail(where, "unknown target module '" + r.target + "'");
    check_streams(parse_expr(r.condition_expr, where), known, where);
    if (!std::isfinite(r.forced_weight) || r.forced_weight < 0.0)
      fail(where, "forced_weight must be >= 0");
  }

  std::set<std::string> seen_graphs;
  for (std::size_t i = 0; i < c.graphs.size(); ++i) {
    const std::string where = "graphs[" + std::to_string(i) + "] (" + c.graphs[i].task_id + ")";
    if (!seen_graphs.insert(c.graphs[i].task_id).second) fail(where, "duplicate graph");
    try {
      TaskGraph::build(c.graphs[i], &known);
    } catch (const ValidationError& e) {
      fail(where, e.what());
    }
  }
}

ControllerConfig parse_config(std::string_view text) { return from_document(toml::parse(text)); }

ControllerConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_toml(const ControllerConfig& c) {
  Json doc = Json::object();
  Json s = Json::object();
  s["mode"] = to_string(c.scheduler.mode);
  s["processors"] = c.scheduler.processors;
  s["period_us"] = c.scheduler.period_us;
  s["quantum_us"] = c.scheduler.quantum_us;
  s["min_recompute_interval_us"] = c.scheduler.min_recompute_interval_us;
  doc["scheduler"] = s;

  Json in = Json::object();
  in["sensors"] = c.sensors;
  in["topics"] = c.topics;
  doc["inputs"] = in;

  Json streams = Json::array();
  for (const auto& d : c.streams) {
    Json j = Json::object();
    j["id"] = d.id;
    j["from"] = d.from;
    j["op"] = op_name(d.op);
    j["expr"] = d.expr;
    streams.push_back(std::move(j));
  }
  doc["streams"] = streams;

  Json modules = Json::array();
  for (const auto& m : c.modules) {
    Json j = Json::object();
    j["id"] = m.id;
    j["priority"] = m.priority;
    j["score_expr"] = m.score_expr;
    if (!m.graph.empty()) j["graph"] = m.graph;
    j["triggers"] = m.triggers;
    if (m.work_us) j["work_us"] = *m.work_us;
    modules.push_back(std::move(j));
  }
  doc["modules"] = modules;

  Json rules = Json::array();
  for (const auto& r : c.rules) {
    Json j = Json::object();
    j["id"] = r.id;
    j["target"] = r.target;
    j["condition_expr"] = r.condition_expr;
    j["forced_weight"] = r.forced_weight;
    rules.push_back(std::move(j));
  }
  doc["rules"] = rules;

  Json graphs = Json::array();
  for (const auto& g : c.graphs) graphs.push_back(graph_document(g));
  doc["graphs"] = graphs;

  return toml::write(doc);
}

bool operator==(const ControllerConfig& a, const ControllerConfig& b) {
  auto graphs_equal = [](const std::vector<TaskDescription>& x, const std::vector<TaskDescription>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].task_id != y[i].task_id || x[i].kind != y[i].kind ||
          x[i].satisfaction_rule != y[i].satisfaction_rule || x[i].nodes != y[i].nodes ||
          x[i].edges != y[i].edges)
        return false;
    }
    return true;
  };
  return a.sensors == b.sensors && a.topics == b.topics && a.streams == b.streams &&
         a.modules == b.modules && a.rules == b.rules && graphs_equal(a.graphs, b.graphs) &&
         a.scheduler == b.scheduler;
}

}  // namespace ctxsched
