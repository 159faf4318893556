#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctxsched/allocation.hpp"
#include "ctxsched/backend.hpp"
#include "ctxsched/config.hpp"
#include "ctxsched/pubsub.hpp"
#include "ctxsched/reactive.hpp"
#include "ctxsched/task_graph.hpp"

namespace ctxsched {

/// The backend refused an assignment; the assignment travels with the error.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, ScheduleAssignment assignment)
      : Error(what), assignment_(std::move(assignment)) {}
  const ScheduleAssignment& assignment() const noexcept { return assignment_; }

 private:
  ScheduleAssignment assignment_;
};

/// Replaces the weight of every module targeted by an active rule with the
/// rule's forced value; with several active rules on one module the lowest
/// forced value wins. Rules missing from `active` count as inactive.
std::vector<SchedulingScore> apply_context_rules(std::span<const SchedulingScore> scores,
                                                 std::span<const ContextRule> rules,
                                                 const std::map<std::string, bool>& active);

/// Registers the config's sensor, topic and derived streams. Topics are
/// wrapped through `bus` when given (created with schema tag "json" if
/// missing); otherwise they become plain pubsub-kind streams. Returned
/// subscriptions keep topic wrappers alive.
std::vector<TopicSubscription> create_input_streams(const ControllerConfig& config,
                                                    StreamRegistry& registry, Bus* bus = nullptr);

/// Stream ids used for a module's score and a rule's condition.
std::string score_stream_id(const std::string& module);
std::string rule_stream_id(const std::string& rule);
inline constexpr const char* kAggregatedScoresStream = "scores";

/// Builds one score stream per module (priority * score_expr) and combines
/// them into the aggregated score-set stream, whose payload is an array of
/// weights in module order. Constant expressions get a private source
/// stream; emit_constant_sources() fires them. Returns the aggregated
/// stream id. Throws LookupError if a referenced stream is not registered.
std::string instantiate_scores(const ControllerConfig& config, StreamRegistry& registry);

/// Emits the private sources of constant score and rule expressions.
void emit_constant_sources(const ControllerConfig& config, StreamRegistry& registry,
                           std::int64_t time_us);

/// Event-driven controller. Owns the score and rule pipelines for one config
/// and pushes a new assignment to the backend whenever an event changes the
/// effective weight of any module.
///
/// Single-threaded: on_event must not be re-entered.
class Controller {
 public:
  Controller(ControllerConfig config, StreamRegistry& registry, ScheduleBackend& backend,
             Bus* bus = nullptr);

  /// Creates streams, score functions and context graphs, then applies the
  /// initial policy (weights = priorities) as epoch 0.
  ScheduleAssignment initialize(std::int64_t time_us = 0);

  /// Feeds one event. Returns the new assignment, or nothing when no
  /// effective weight changed (or the score set is still incomplete, or the
  /// recompute interval has not elapsed). Throws BackendError if the backend
  /// rejects the assignment.
  std::optional<ScheduleAssignment> on_event(const std::string& stream, nlohmann::json payload,
                                             std::int64_t time_us);

  /// Applies a change held back by the recompute interval, if any.
  std::optional<ScheduleAssignment> flush(std::int64_t time_us);

  bool initialized() const noexcept { return initialized_; }
  const ControllerConfig& config() const noexcept { return config_; }

  /// Weights from the aggregated stream, before context rules; nullopt
  /// until every score stream has emitted.
  const std::optional<std::vector<SchedulingScore>>& raw_scores() const noexcept { return raw_; }
  std::optional<std::vector<SchedulingScore>> effective_scores() const;

  std::map<std::string, bool> rule_states() const { return rule_states_; }

  /// True while an active context rule targets the module.
  bool is_gated(const std::string& module) const;

  /// Module's task graph with context-rule overlays applied, or null.
  const TaskGraph* context_graph(const std::string& module) const;

  /// Latest value of every config stream (nullopt before its first event).
  StreamState stream_state() const;

  /// Streams whose events can change a score or rule state.
  const std::set<std::string>& relevant_streams() const noexcept { return relevant_; }

  std::uint64_t epoch() const noexcept { return epoch_; }
  /// Assignments pushed after the initial policy.
  std::size_t recompute_count() const noexcept { return recomputes_; }
  const std::optional<ScheduleAssignment>& last_assignment() const noexcept { return last_; }

 private:
  ScheduleAssignment compute(std::span<const SchedulingScore> weights) const;
  std::optional<ScheduleAssignment> maybe_assign(std::int64_t time_us, bool force);
  ScheduleAssignment push(ScheduleAssignment a, std::int64_t time_us);

  ControllerConfig config_;
  StreamRegistry& registry_;
  ScheduleBackend& backend_;
  Bus* bus_;
  std::vector<TopicSubscription> topic_wrappers_;
  std::vector<Subscription> subscriptions_;
  std::map<std::string, TaskGraph> graphs_;  // by module
  std::set<std::string> relevant_;

  std::optional<std::vector<SchedulingScore>> raw_;
  std::map<std::string, bool> rule_states_;
  std::optional<std::vector<SchedulingScore>> applied_weights_;
  std::optional<ScheduleAssignment> last_;
  std::optional<std::int64_t> last_push_us_;
  std::uint64_t epoch_ = 0;
  std::size_t recomputes_ = 0;
  bool initialized_ = false;
};

}  // namespace ctxsched
