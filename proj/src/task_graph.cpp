#include "ctxsched/task_graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

#include "ctxsched/error.hpp"

namespace ctxsched {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Elemental: return "elemental";
    case TaskKind::Compound: return "compound";
    case TaskKind::Complex: return "complex";
  }
  return "?";
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::SubTask: return "subtask";
    case NodeKind::PreCondition: return "precondition";
    case NodeKind::CapabilityConstraint: return "constraint";
    case NodeKind::ContextCondition: return "context";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "elemental") return TaskKind::Elemental;
  if (text == "compound") return TaskKind::Compound;
  if (text == "complex") return TaskKind::Complex;
  throw ValidationError("unknown task kind '" + text + "'");
}

NodeKind parse_node_kind(const std::string& text) {
  if (text == "subtask") return NodeKind::SubTask;
  if (text == "precondition") return NodeKind::PreCondition;
  if (text == "constraint") return NodeKind::CapabilityConstraint;
  if (text == "context") return NodeKind::ContextCondition;
  throw ValidationError("unknown node kind '" + text + "'");
}

// ---------------------------------------------------------------------------
// SatisfactionRule

struct SatisfactionRule::Node {
  enum class Kind { Id, And, Or, Not, AtLeast } kind = Kind::Id;
  std::string id;
  int threshold = 0;
  std::vector<std::shared_ptr<const Node>> kids;
};

namespace {

using RuleNode = SatisfactionRule::Node;
using RulePtr = std::shared_ptr<const RuleNode>;

class RuleParser {
 public:
  explicit RuleParser(const std::string& src) : src_(src) { tokenize(); }

  RulePtr parse() {
    auto n = disjunction();
    if (i_ != toks_.size()) fail("unexpected '" + toks_[i_] + "'");
    return n;
  }

  std::set<std::string> ids;

 private:
  void tokenize() {
    std::size_t p = 0;
    while (p < src_.size()) {
      const char c = src_[p];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++p;
      } else if (c == '(' || c == ')' || c == ',') {
        toks_.emplace_back(1, c);
        ++p;
      } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
        const auto start = p;
        while (p < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[p])) ||
                                   src_[p] == '_' || src_[p] == '-'))
          ++p;
        toks_.push_back(src_.substr(start, p - start));
      } else {
        fail(std::string("unexpected character '") + c + "'");
      }
    }
  }

  bool accept(const std::string& t) {
    if (i_ < toks_.size() && toks_[i_] == t) {
      ++i_;
      return true;
    }
    return false;
  }

  void expect(const std::string& t) {
    if (!accept(t)) fail("expected '" + t + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("satisfaction rule '" + src_ + "': " + msg);
  }

  RulePtr disjunction() {
    auto l = conjunction();
    while (accept("or")) {
      auto n = std::make_shared<RuleNode>();
      n->kind = RuleNode::Kind::Or;
      n->kids = {l, conjunction()};
      l = n;
    }
    return l;
  }

  RulePtr conjunction() {
    auto l = atom();
    while (accept("and")) {
      auto n = std::make_shared<RuleNode>();
      n->kind = RuleNode::Kind::And;
      n->kids = {l, atom()};
      l = n;
    }
    return l;
  }

  RulePtr atom() {
    if (i_ >= toks_.size()) fail("unexpected end of rule");
    if (accept("not")) {
      auto n = std::make_shared<RuleNode>();
      n->kind = RuleNode::Kind::Not;
      n->kids = {atom()};
      return n;
    }
    if (accept("(")) {
      auto n = disjunction();
      expect(")");
      return n;
    }
    const std::string tok = toks_[i_++];
    if (tok == ")" || tok == "," || tok == "and" || tok == "or" || tok == "of")
      fail("unexpected '" + tok + "'");
    if (std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
        accept("of")) {
      auto n = std::make_shared<RuleNode>();
      n->kind = RuleNode::Kind::AtLeast;
      n->threshold = std::stoi(tok);
      expect("(");
      do {
        n->kids.push_back(disjunction());
      } while (accept(","));
      expect(")");
      if (n->threshold < 0 || n->threshold > static_cast<int>(n->kids.size()))
        fail("threshold " + tok + " out of range");
      return n;
    }
    auto n = std::make_shared<RuleNode>();
    n->kind = RuleNode::Kind::Id;
    n->id = tok;
    ids.insert(tok);
    return n;
  }

  std::string src_;
  std::vector<std::string> toks_;
  std::size_t i_ = 0;
};

bool eval_rule(const RuleNode& n, const std::map<std::string, bool>& done) {
  switch (n.kind) {
    case RuleNode::Kind::Id: {
      auto it = done.find(n.id);
      if (it == done.end()) throw ValidationError("completion state lacks subtask '" + n.id + "'");
      return it->second;
    }
    case RuleNode::Kind::And: return eval_rule(*n.kids[0], done) && eval_rule(*n.kids[1], done);
    case RuleNode::Kind::Or: return eval_rule(*n.kids[0], done) || eval_rule(*n.kids[1], done);
    case RuleNode::Kind::Not: return !eval_rule(*n.kids[0], done);
    case RuleNode::Kind::AtLeast: {
      int count = 0;
      for (const auto& k : n.kids) count += eval_rule(*k, done) ? 1 : 0;
      return count >= n.threshold;
    }
  }
  return false;
}

}  // namespace

SatisfactionRule SatisfactionRule::parse(const std::string& text) {
  RuleParser p(text);
  SatisfactionRule r;
  r.root_ = p.parse();
  r.source_ = text;
  r.ids_ = std::move(p.ids);
  return r;
}

bool SatisfactionRule::evaluate(const std::map<std::string, bool>& done) const {
  if (!root_) throw ValidationError("empty satisfaction rule");
  return eval_rule(*root_, done);
}

// ---------------------------------------------------------------------------
// TaskGraph

TaskGraph TaskGraph::build(const TaskDescription& desc, const std::set<std::string>* known_streams) {
  if (desc.task_id.empty()) throw ValidationError("task description without task id");
  TaskGraph g;
  g.task_id_ = desc.task_id;
  g.kind_ = desc.kind;
  for (const auto& n : desc.nodes) {
    if (n.id.empty()) throw ValidationError("task '" + desc.task_id + "': node without id");
    if (!g.nodes_.emplace(n.id, n).second)
      throw ValidationError("task '" + desc.task_id + "': duplicate node '" + n.id + "'");
  }
  for (const auto& e : desc.edges) {
    if (!g.edges_.insert(e).second)
      throw ValidationError("task '" + desc.task_id + "': duplicate edge " + e.first + " -> " +
                            e.second);
  }
  if (desc.kind == TaskKind::Complex) {
    if (desc.satisfaction_rule.empty())
      throw ValidationError("complex task '" + desc.task_id + "' needs a satisfaction rule");
    g.rule_ = SatisfactionRule::parse(desc.satisfaction_rule);
  } else if (!desc.satisfaction_rule.empty()) {
    throw ValidationError("task '" + desc.task_id + "': only complex tasks take a satisfaction rule");
  }
  g.validate(known_streams);
  return g;
}

void TaskGraph::validate(const std::set<std::string>* known_streams) const {
  const std::string where = "task '" + task_id_ + "': ";
  std::size_t subtask_count = 0;
  for (const auto& [id, n] : nodes_) {
    switch (n.kind) {
      case NodeKind::SubTask:
        ++subtask_count;
        break;
      case NodeKind::CapabilityConstraint:
        if (n.cores < 1) throw ValidationError(where + "constraint '" + id + "' needs cores >= 1");
        if (!(n.memory_mb > 0.0))
          throw ValidationError(where + "constraint '" + id + "' needs memory > 0");
        break;
      case NodeKind::PreCondition:
      case NodeKind::ContextCondition:
        if (!n.condition) throw ValidationError(where + "condition '" + id + "' has no predicate");
        if (known_streams) {
          for (const auto& s : n.condition->streams())
            if (!known_streams->contains(s))
              throw ValidationError(where + "condition '" + id + "' references unknown stream '" +
                                    s + "'");
        }
        break;
    }
    if (n.weight_override && n.kind != NodeKind::ContextCondition)
      throw ValidationError(where + "only context conditions carry a weight override");
    if (n.weight_override && !(*n.weight_override >= 0.0))
      throw ValidationError(where + "weight override must be >= 0");
  }
  if (subtask_count == 0) throw ValidationError(where + "no subtasks");
  if (kind_ == TaskKind::Elemental && subtask_count != 1)
    throw ValidationError(where + "elemental tasks have exactly one subtask");

  for (const auto& [from, to] : edges_) {
    auto a = nodes_.find(from);
    auto b = nodes_.find(to);
    if (a == nodes_.end() || b == nodes_.end())
      throw ValidationError(where + "dangling edge " + from + " -> " + to);
    if (from == to) throw ValidationError(where + "cycle at '" + from + "'");
    const NodeKind fk = a->second.kind;
    const NodeKind tk = b->second.kind;
    const bool ok = (fk == NodeKind::SubTask &&
                     (tk == NodeKind::SubTask || tk == NodeKind::CapabilityConstraint)) ||
                    (fk != NodeKind::SubTask && tk == NodeKind::SubTask);
    if (!ok)
      throw ValidationError(where + "edge " + from + " -> " + to + " joins a " + to_string(fk) +
                            " to a " + to_string(tk));
  }

  for (const auto& [id, n] : nodes_) {
    if (n.kind != NodeKind::CapabilityConstraint) continue;
    const bool attached = std::any_of(edges_.begin(), edges_.end(), [&](const Edge& e) {
      return (e.first == id && nodes_.at(e.second).kind == NodeKind::SubTask) ||
             (e.second == id && nodes_.at(e.first).kind == NodeKind::SubTask);
    });
    if (!attached) throw ValidationError(where + "constraint '" + id + "' is not attached to a subtask");
  }

  // Kahn's algorithm; leftovers mean a cycle.
  std::map<std::string, int> indegree;
  for (const auto& [id, _] : nodes_) indegree[id] = 0;
  for (const auto& e : edges_) indegree[e.second] += 1;
  std::deque<std::string> queue;
  for (const auto& [id, d] : indegree)
    if (d == 0) queue.push_back(id);
  std::size_t visited = 0;
  while (!queue.empty()) {
    const auto cur = queue.front();
    queue.pop_front();
    ++visited;
    for (auto it = edges_.lower_bound({cur, ""}); it != edges_.end() && it->first == cur; ++it)
      if (--indegree[it->second] == 0) queue.push_back(it->second);
  }
  if (visited != nodes_.size()) throw ValidationError(where + "relationship graph has a cycle");

  if (rule_) {
    for (const auto& s : rule_->subtasks()) {
      auto it = nodes_.find(s);
      if (it == nodes_.end() || it->second.kind != NodeKind::SubTask)
        throw ValidationError(where + "satisfaction rule names unknown subtask '" + s + "'");
    }
  }
}

std::vector<std::string> TaskGraph::subtasks() const {
  std::vector<std::string> out;
  for (const auto& [id, n] : nodes_)
    if (n.kind == NodeKind::SubTask) out.push_back(id);
  return out;
}

std::vector<std::string> TaskGraph::predecessors(const std::string& subtask) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : edges_)
    if (to == subtask && nodes_.at(from).kind == NodeKind::SubTask) out.push_back(from);
  return out;
}

std::set<std::string> TaskGraph::referenced_streams() const {
  std::set<std::string> out;
  for (const auto& [_, n] : nodes_)
    if (n.condition) out.insert(n.condition->streams().begin(), n.condition->streams().end());
  return out;
}

bool TaskGraph::is_satisfied(const CompletionState& done) const {
  const auto subs = subtasks();
  for (const auto& s : subs)
    if (!done.contains(s)) throw ValidationError("completion state lacks subtask '" + s + "'");
  switch (kind_) {
    case TaskKind::Elemental: return done.at(subs.front());
    case TaskKind::Compound:
      return std::all_of(subs.begin(), subs.end(), [&](const auto& s) { return done.at(s); });
    case TaskKind::Complex: return rule_->evaluate(done);
  }
  return false;
}

bool TaskGraph::condition_holds(const GraphNode& node, const StreamState& streams) const {
  expr::Resolver resolve = [&](const std::string& name) -> const expr::Value* {
    auto it = streams.find(name);
    if (it == streams.end()) throw LookupError("stream state lacks '" + name + "'");
    return it->second ? &*it->second : nullptr;
  };
  try {
    return node.condition->evaluate_bool(resolve);
  } catch (const LookupError&) {
    throw;
  } catch (const EvalError&) {
    return false;
  }
}

std::vector<std::string> TaskGraph::ready_subtasks(const StreamState& streams,
                                                   const CompletionState& done) const {
  for (const auto& s : referenced_streams())
    if (!streams.contains(s)) throw LookupError("stream state lacks '" + s + "'");

  // Subtasks blocked by a failing condition; context conditions propagate
  // down SubTask -> SubTask edges.
  std::set<std::string> blocked;
  for (const auto& [id, n] : nodes_) {
    if (n.kind != NodeKind::PreCondition && n.kind != NodeKind::ContextCondition) continue;
    if (condition_holds(n, streams)) continue;
    std::deque<std::string> frontier;
    for (auto it = edges_.lower_bound({id, ""}); it != edges_.end() && it->first == id; ++it)
      frontier.push_back(it->second);
    while (!frontier.empty()) {
      const auto cur = frontier.front();
      frontier.pop_front();
      if (!blocked.insert(cur).second || n.kind == NodeKind::PreCondition) continue;
      for (auto it = edges_.lower_bound({cur, ""}); it != edges_.end() && it->first == cur; ++it)
        if (nodes_.at(it->second).kind == NodeKind::SubTask) frontier.push_back(it->second);
    }
  }

  auto is_done = [&](const std::string& s) {
    auto it = done.find(s);
    return it != done.end() && it->second;
  };
  std::vector<std::string> out;
  for (const auto& s : subtasks()) {
    if (is_done(s) || blocked.contains(s)) continue;
    const auto preds = predecessors(s);
    if (std::all_of(preds.begin(), preds.end(), is_done)) out.push_back(s);
  }
  return out;
}

bool TaskGraph::context_allows(const StreamState& streams) const {
  for (const auto& [_, n] : nodes_)
    if (n.kind == NodeKind::ContextCondition && !condition_holds(n, streams)) return false;
  return true;
}

double TaskGraph::gated_weight(const StreamState& streams, double weight) const {
  std::optional<double> forced;
  for (const auto& [_, n] : nodes_) {
    if (n.kind != NodeKind::ContextCondition || condition_holds(n, streams)) continue;
    const double v = n.weight_override.value_or(0.0);
    forced = forced ? std::min(*forced, v) : v;
  }
  return forced.value_or(weight);
}

std::pair<int, double> TaskGraph::peak_constraint() const {
  std::pair<int, double> peak{0, 0.0};
  for (const auto& [_, n] : nodes_) {
    if (n.kind != NodeKind::CapabilityConstraint) continue;
    peak.first = std::max(peak.first, n.cores);
    peak.second = std::max(peak.second, n.memory_mb);
  }
  return peak;
}

TaskGraph apply_overlay(const TaskGraph& graph, const ContextOverlay& overlay) {
  if (overlay.target_task != graph.task_id())
    throw ValidationError("overlay targets '" + overlay.target_task + "' but graph is '" +
                          graph.task_id() + "'");
  TaskGraph g = graph;
  std::set<std::string> added;
  for (auto n : overlay.nodes) {
    if (n.kind != NodeKind::ContextCondition)
      throw ValidationError("overlay node '" + n.id + "' is not a context condition");
    if (!n.weight_override) n.weight_override = overlay.weight_override;
    const std::string id = n.id;
    added.insert(id);
    if (!g.nodes_.emplace(id, std::move(n)).second)
      throw ValidationError("overlay node '" + id + "' clashes with an existing node");
  }
  for (const auto& e : overlay.edges) {
    if (!added.contains(e.first))
      throw ValidationError("overlay edge " + e.first + " -> " + e.second +
                            " must start at an overlay node");
    if (!g.edges_.insert(e).second)
      throw ValidationError("overlay edge " + e.first + " -> " + e.second + " already exists");
  }
  g.validate(nullptr);
  return g;
}

TaskGraph remove_overlay(const TaskGraph& graph, const ContextOverlay& overlay) {
  if (overlay.target_task != graph.task_id())
    throw ValidationError("overlay targets '" + overlay.target_task + "' but graph is '" +
                          graph.task_id() + "'");
  TaskGraph g = graph;
  for (const auto& e : overlay.edges) g.edges_.erase(e);
  for (const auto& n : overlay.nodes) g.nodes_.erase(n.id);
  g.validate(nullptr);
  return g;
}

const TaskGraph& TaskGraphRegistry::add(TaskGraph graph) {
  const auto id = graph.task_id();
  auto [it, inserted] = graphs_.emplace(id, std::move(graph));
  if (!inserted) throw RegistrationError("task graph '" + id + "' already registered");
  return it->second;
}

const TaskGraph& TaskGraphRegistry::get(const std::string& task_id) const {
  auto it = graphs_.find(task_id);
  if (it == graphs_.end()) throw LookupError("unknown task graph '" + task_id + "'");
  return it->second;
}

void TaskGraphRegistry::replace(TaskGraph graph) {
  auto it = graphs_.find(graph.task_id());
  if (it == graphs_.end()) throw LookupError("unknown task graph '" + graph.task_id() + "'");
  it->second = std::move(graph);
}

}  // namespace ctxsched
