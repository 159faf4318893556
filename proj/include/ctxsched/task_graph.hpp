#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ctxsched/expr.hpp"

namespace ctxsched {

enum class TaskKind { Elemental, Compound, Complex };
enum class NodeKind { SubTask, PreCondition, CapabilityConstraint, ContextCondition };

const char* to_string(TaskKind kind);
const char* to_string(NodeKind kind);
TaskKind parse_task_kind(const std::string& text);
NodeKind parse_node_kind(const std::string& text);

/// Satisfaction rule for complex tasks over subtask ids:
///
///   rule := or
///   or   := and ('or' and)*
///   and  := atom ('and' atom)*
///   atom := 'not' atom | id | '(' rule ')' | INT 'of' '(' rule (',' rule)* ')'
///
/// "2 of (a, b, c)" holds when at least two of a, b, c are done.
class SatisfactionRule {
 public:
  static SatisfactionRule parse(const std::string& text);

  bool evaluate(const std::map<std::string, bool>& done) const;
  const std::string& source() const noexcept { return source_; }
  const std::set<std::string>& subtasks() const noexcept { return ids_; }

  friend bool operator==(const SatisfactionRule& a, const SatisfactionRule& b) {
    return a.source_ == b.source_;
  }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
  std::set<std::string> ids_;
};

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::SubTask;
  int cores = 0;             // constraints only
  double memory_mb = 0.0;    // constraints only
  std::optional<expr::Expression> condition;  // pre/context conditions
  std::optional<double> weight_override;      // context conditions only

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

using Edge = std::pair<std::string, std::string>;

/// Manually authored description of a task and its relationship graph.
struct TaskDescription {
  std::string task_id;
  TaskKind kind = TaskKind::Compound;
  std::string satisfaction_rule;  // complex tasks only
  std::vector<GraphNode> nodes;
  std::vector<Edge> edges;
};

/// Context condition nodes and edges grafted onto a task graph.
struct ContextOverlay {
  std::string target_task;
  std::vector<GraphNode> nodes;
  std::vector<Edge> edges;
  std::optional<double> weight_override;
};

/// Latest value of each referenced stream; nullopt = no event yet.
using StreamState = std::map<std::string, std::optional<nlohmann::json>>;
using CompletionState = std::map<std::string, bool>;

/// A task as (subtasks, relationship graph). Immutable; overlays produce new
/// values.
///
/// Edge semantics: SubTask -> SubTask is precedence; a PreCondition gates the
/// subtask it points at; a ContextCondition gates the subtask it points at and
/// every subtask downstream of it; constraints attach to a subtask in either
/// direction.
class TaskGraph {
 public:
  /// Validates the description. If `known_streams` is given, every stream
  /// referenced by a condition must be in it. Throws ValidationError.
  static TaskGraph build(const TaskDescription& desc,
                         const std::set<std::string>* known_streams = nullptr);

  const std::string& task_id() const noexcept { return task_id_; }
  TaskKind kind() const noexcept { return kind_; }
  const std::optional<SatisfactionRule>& rule() const noexcept { return rule_; }
  const std::map<std::string, GraphNode>& nodes() const noexcept { return nodes_; }
  const std::set<Edge>& edges() const noexcept { return edges_; }

  std::vector<std::string> subtasks() const;
  std::vector<std::string> predecessors(const std::string& subtask) const;
  std::set<std::string> referenced_streams() const;

  /// Throws ValidationError if the state lacks a subtask.
  bool is_satisfied(const CompletionState& done) const;

  /// Subtasks not yet done whose predecessors are done and whose pre- and
  /// context conditions hold. Throws LookupError if a referenced stream is
  /// missing from `streams`.
  std::vector<std::string> ready_subtasks(const StreamState& streams,
                                          const CompletionState& done) const;

  /// False when any context condition currently fails.
  bool context_allows(const StreamState& streams) const;

  /// `weight` when every context condition holds, otherwise the lowest
  /// override among failing conditions (0 when none is given).
  double gated_weight(const StreamState& streams, double weight) const;

  /// Largest single capability constraint, as (cores, memory_mb).
  std::pair<int, double> peak_constraint() const;

  friend bool operator==(const TaskGraph&, const TaskGraph&) = default;

 private:
  void validate(const std::set<std::string>* known_streams) const;
  bool condition_holds(const GraphNode& node, const StreamState& streams) const;

  std::string task_id_;
  TaskKind kind_ = TaskKind::Compound;
  std::optional<SatisfactionRule> rule_;
  std::map<std::string, GraphNode> nodes_;
  std::set<Edge> edges_;

  friend TaskGraph apply_overlay(const TaskGraph&, const ContextOverlay&);
  friend TaskGraph remove_overlay(const TaskGraph&, const ContextOverlay&);
};

/// Returns a copy with the overlay's context nodes and edges added. Throws
/// ValidationError on a target mismatch, id clash or a resulting cycle.
TaskGraph apply_overlay(const TaskGraph& graph, const ContextOverlay& overlay);

/// Inverse of apply_overlay.
TaskGraph remove_overlay(const TaskGraph& graph, const ContextOverlay& overlay);

/// Registry of built graphs keyed by task id.
class TaskGraphRegistry {
 public:
  const TaskGraph& add(TaskGraph graph);
  const TaskGraph& get(const std::string& task_id) const;
  void replace(TaskGraph graph);
  bool contains(const std::string& task_id) const { return graphs_.contains(task_id); }
  const std::map<std::string, TaskGraph>& all() const noexcept { return graphs_; }

 private:
  std::map<std::string, TaskGraph> graphs_;
};

}  // namespace ctxsched
