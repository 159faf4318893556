#include "ctxsched/reactive.hpp"

#include <algorithm>
#include <set>

#include "ctxsched/error.hpp"

namespace ctxsched {

const char* to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::ExternalInput: return "external-input";
    case SourceKind::Operator: return "operator";
    case SourceKind::PubsubTopic: return "pubsub-topic";
  }
  return "?";
}

const std::string& Subscription::stream_id() const {
  static const std::string none;
  return state_ ? state_->stream_id : none;
}

struct StreamRegistry::Listener {
  Stream* child = nullptr;  // derived stream, or null for a subscriber
  std::size_t parent_index = 0;
  Callback callback;
  std::shared_ptr<Subscription::State> subscription;
};

struct StreamRegistry::Stream {
  StreamInfo info;
  StageKind stage = StageKind::Map;
  Predicate predicate;
  Transform transform;
  std::vector<Payload> parent_latest;  // combine_latest inputs
  Payload latest;
  std::vector<Listener> listeners;
};

StreamRegistry::StreamRegistry() = default;
StreamRegistry::~StreamRegistry() = default;

StreamRegistry::Stream& StreamRegistry::lookup(const std::string& id) {
  auto it = streams_.find(id);
  if (it == streams_.end()) throw LookupError("unknown stream '" + id + "'");
  return *it->second;
}

const StreamRegistry::Stream& StreamRegistry::lookup(const std::string& id) const {
  auto it = streams_.find(id);
  if (it == streams_.end()) throw LookupError("unknown stream '" + id + "'");
  return *it->second;
}

const StreamInfo& StreamRegistry::create_stream(const SourceDescriptor& source, std::string id) {
  std::lock_guard lock(mu_);
  if (source.kind == SourceKind::Operator)
    throw RegistrationError("operator streams are created with filter, map or combine_latest");
  if (id.empty()) id = source.name;
  if (id.empty()) throw RegistrationError("stream id must not be empty");
  if (streams_.contains(id)) throw RegistrationError("stream '" + id + "' already registered");
  auto s = std::make_unique<Stream>();
  s->info.id = id;
  s->info.source = source.kind;
  auto& ref = *s;
  streams_.emplace(std::move(id), std::move(s));
  return ref.info;
}

StreamRegistry::Stream& StreamRegistry::add_derived(std::vector<std::string> parents, std::string id,
                                                    StageKind stage) {
  if (id.empty()) throw RegistrationError("stream id must not be empty");
  if (streams_.contains(id)) throw RegistrationError("stream '" + id + "' already registered");
  std::vector<Stream*> resolved;
  for (const auto& p : parents) {
    resolved.push_back(&lookup(p));
    // A fresh id cannot appear upstream of an existing stream; this guards
    // the invariant should ids ever become reusable.
    if (p == id || depends_on(p, id))
      throw RegistrationError("stream '" + id + "' would depend on itself");
  }
  auto s = std::make_unique<Stream>();
  s->info.id = id;
  s->info.source = SourceKind::Operator;
  s->info.parents = parents;
  s->stage = stage;
  // Chain = the single parent's chain plus this stage; combine starts fresh.
  if (stage != StageKind::CombineLatest && resolved.size() == 1)
    s->info.operator_chain = resolved.front()->info.operator_chain;
  s->info.operator_chain.push_back(stage);
  s->parent_latest.resize(parents.size());
  auto& ref = *s;
  for (std::size_t i = 0; i < resolved.size(); ++i) {
    Listener l;
    l.child = &ref;
    l.parent_index = i;
    resolved[i]->listeners.push_back(std::move(l));
  }
  streams_.emplace(std::move(id), std::move(s));
  return ref;
}

const StreamInfo& StreamRegistry::filter(const std::string& parent, std::string id, Predicate pred) {
  std::lock_guard lock(mu_);
  if (!pred) throw RegistrationError("filter needs a predicate");
  auto& s = add_derived({parent}, std::move(id), StageKind::Filter);
  s.predicate = std::move(pred);
  return s.info;
}

const StreamInfo& StreamRegistry::map(const std::string& parent, std::string id, Transform fn) {
  std::lock_guard lock(mu_);
  if (!fn) throw RegistrationError("map needs a transform");
  auto& s = add_derived({parent}, std::move(id), StageKind::Map);
  s.transform = std::move(fn);
  return s.info;
}

const StreamInfo& StreamRegistry::combine_latest(const std::vector<std::string>& parents,
                                                 std::string id) {
  std::lock_guard lock(mu_);
  if (parents.empty()) throw RegistrationError("combine_latest needs at least one input stream");
  return add_derived(parents, std::move(id), StageKind::CombineLatest).info;
}

Subscription StreamRegistry::subscribe(const std::string& id, Callback cb) {
  std::lock_guard lock(mu_);
  auto& s = lookup(id);
  Subscription sub;
  sub.state_ = std::make_shared<Subscription::State>();
  sub.state_->stream_id = id;
  Listener l;
  l.callback = std::move(cb);
  l.subscription = sub.state_;
  s.listeners.push_back(std::move(l));
  return sub;
}

void StreamRegistry::emit(const std::string& id, nlohmann::json payload, std::int64_t timestamp_us) {
  std::lock_guard lock(mu_);
  auto& s = lookup(id);
  if (s.info.source == SourceKind::Operator)
    throw RegistrationError("cannot emit into derived stream '" + id + "'");
  if (timestamp_us < 0) throw TimestampError("negative timestamp on stream '" + id + "'");
  if (s.info.last_timestamp_us && timestamp_us < *s.info.last_timestamp_us)
    throw TimestampError("timestamp " + std::to_string(timestamp_us) + " precedes " +
                         std::to_string(*s.info.last_timestamp_us) + " on stream '" + id + "'");
  dispatch(s, Event{id, timestamp_us, make_payload(std::move(payload))});
}

void StreamRegistry::dispatch(Stream& s, const Event& ev) {
  s.info.emitted += 1;
  s.info.last_timestamp_us = ev.timestamp_us;
  s.latest = ev.payload;
  deliver(s, ev);
}

void StreamRegistry::deliver(Stream& s, const Event& ev) {
  const std::size_t n = s.listeners.size();
  for (std::size_t i = 0; i < n; ++i) {
    // Copy: a callback may subscribe and grow the vector.
    Listener l = s.listeners[i];
    if (l.child != nullptr) {
      on_parent_event(*l.child, l.parent_index, ev);
    } else if (l.subscription->active) {
      l.callback(ev);
    }
  }
}

void StreamRegistry::on_parent_event(Stream& child, std::size_t parent_index, const Event& ev) {
  switch (child.stage) {
    case StageKind::Filter: {
      bool keep = false;
      try {
        keep = child.predicate(*ev.payload);
      } catch (const std::exception&) {
        child.info.dropped += 1;
        return;
      }
      if (keep) dispatch(child, Event{child.info.id, ev.timestamp_us, ev.payload});
      return;
    }
    case StageKind::Map: {
      nlohmann::json out;
      try {
        out = child.transform(*ev.payload);
      } catch (const std::exception&) {
        child.info.dropped += 1;
        return;
      }
      dispatch(child, Event{child.info.id, ev.timestamp_us, make_payload(std::move(out))});
      return;
    }
    case StageKind::CombineLatest: {
      child.parent_latest[parent_index] = ev.payload;
      for (const auto& p : child.parent_latest)
        if (!p) return;
      auto tuple = nlohmann::json::array();
      for (const auto& p : child.parent_latest) tuple.push_back(*p);
      const auto ts = std::max(ev.timestamp_us, child.info.last_timestamp_us.value_or(0));
      dispatch(child, Event{child.info.id, ts, make_payload(std::move(tuple))});
      return;
    }
  }
}

bool StreamRegistry::contains(const std::string& id) const {
  std::lock_guard lock(mu_);
  return streams_.contains(id);
}

const StreamInfo& StreamRegistry::info(const std::string& id) const {
  std::lock_guard lock(mu_);
  return lookup(id).info;
}

std::vector<std::string> StreamRegistry::stream_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : streams_) ids.push_back(id);
  return ids;
}

Payload StreamRegistry::latest(const std::string& id) const {
  std::lock_guard lock(mu_);
  return lookup(id).latest;
}

std::size_t StreamRegistry::listener_count(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto& s = lookup(id);
  return static_cast<std::size_t>(std::count_if(s.listeners.begin(), s.listeners.end(), [](const Listener& l) {
    return l.child != nullptr || l.subscription->active;
  }));
}

std::uint64_t StreamRegistry::dropped_events() const {
  std::lock_guard lock(mu_);
  std::uint64_t total = 0;
  for (const auto& [_, s] : streams_) total += s->info.dropped;
  return total;
}

bool StreamRegistry::depends_on(const std::string& from, const std::string& to) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> stack{from};
  std::set<std::string> seen;
  while (!stack.empty()) {
    auto cur = std::move(stack.back());
    stack.pop_back();
    auto it = streams_.find(cur);
    if (it == streams_.end()) continue;
    for (const auto& p : it->second->info.parents) {
      if (p == to) return true;
      if (seen.insert(p).second) stack.push_back(p);
    }
  }
  return false;
}

}  // namespace ctxsched
