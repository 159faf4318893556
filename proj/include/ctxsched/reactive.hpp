#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctxsched {

using Payload = std::shared_ptr<const nlohmann::json>;

inline Payload make_payload(nlohmann::json v) {
  return std::make_shared<const nlohmann::json>(std::move(v));
}

/// One value on a stream. Timestamps are virtual microseconds.
struct Event {
  std::string stream_id;
  std::int64_t timestamp_us = 0;
  Payload payload;
};

enum class SourceKind { ExternalInput, Operator, PubsubTopic };

const char* to_string(SourceKind kind);

struct SourceDescriptor {
  SourceKind kind = SourceKind::ExternalInput;
  std::string name;
};

enum class StageKind { Filter, Map, CombineLatest };

/// Read-only view of a registered stream.
struct StreamInfo {
  std::string id;
  SourceKind source = SourceKind::ExternalInput;
  std::vector<std::string> parents;
  std::vector<StageKind> operator_chain;
  std::uint64_t emitted = 0;
  std::uint64_t dropped = 0;
  std::optional<std::int64_t> last_timestamp_us;
};

using Predicate = std::function<bool(const nlohmann::json&)>;
using Transform = std::function<nlohmann::json(const nlohmann::json&)>;
using Callback = std::function<void(const Event&)>;

/// Handle for a stream subscriber. Copies share state; cancel() is final.
class Subscription {
 public:
  Subscription() = default;
  bool active() const noexcept { return state_ && state_->active; }
  void cancel() noexcept {
    if (state_) state_->active = false;
  }
  const std::string& stream_id() const;

 private:
  friend class StreamRegistry;
  struct State {
    std::string stream_id;
    bool active = true;
  };
  std::shared_ptr<State> state_;
};

/// Registry and dispatcher for observable streams.
///
/// Emission is synchronous and depth-first: emit() returns only after every
/// derived stream and subscriber reachable from the source has run, visiting
/// listeners of each stream in registration order. All emissions are
/// serialized through one lock, so producers on other threads see a total
/// order. Predicates and transforms that throw drop the event and bump the
/// stream's `dropped` counter.
class StreamRegistry {
 public:
  StreamRegistry();
  ~StreamRegistry();
  StreamRegistry(const StreamRegistry&) = delete;
  StreamRegistry& operator=(const StreamRegistry&) = delete;

  /// Registers a source stream. The id defaults to the descriptor name.
  /// Throws RegistrationError on a duplicate id; Operator sources must be
  /// created through filter/map/combine_latest.
  const StreamInfo& create_stream(const SourceDescriptor& source, std::string id = {});

  const StreamInfo& filter(const std::string& parent, std::string id, Predicate pred);
  const StreamInfo& map(const std::string& parent, std::string id, Transform fn);

  /// Emits a JSON array holding the latest payload of each parent, in parent
  /// order, once every parent has emitted; afterwards on every parent event.
  const StreamInfo& combine_latest(const std::vector<std::string>& parents, std::string id);

  Subscription subscribe(const std::string& id, Callback cb);

  void emit(const std::string& id, nlohmann::json payload, std::int64_t timestamp_us);

  bool contains(const std::string& id) const;
  const StreamInfo& info(const std::string& id) const;
  std::vector<std::string> stream_ids() const;

  /// Latest payload seen on a stream, or nullptr.
  Payload latest(const std::string& id) const;

  /// Number of active subscribers and derived streams attached to `id`.
  std::size_t listener_count(const std::string& id) const;

  /// Sum of dropped events over all streams.
  std::uint64_t dropped_events() const;

  /// True if `from` reaches `to` through parent links.
  bool depends_on(const std::string& from, const std::string& to) const;

 private:
  struct Stream;
  struct Listener;

  Stream& lookup(const std::string& id);
  const Stream& lookup(const std::string& id) const;
  Stream& add_derived(std::vector<std::string> parents, std::string id, StageKind stage);
  void dispatch(Stream& s, const Event& ev);
  void deliver(Stream& s, const Event& ev);
  void on_parent_event(Stream& child, std::size_t parent_index, const Event& ev);

  mutable std::recursive_mutex mu_;
  std::map<std::string, std::unique_ptr<Stream>> streams_;
};

}  // namespace ctxsched
