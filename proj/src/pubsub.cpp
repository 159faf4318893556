#include "ctxsched/pubsub.hpp"

#include "ctxsched/error.hpp"

namespace ctxsched {

nlohmann::json PayloadHandle::decode() const {
  if (!buffer_) return nullptr;
  return nlohmann::json::from_cbor(*buffer_);
}

std::optional<Message> TopicSubscription::poll() {
  if (!state_) return std::nullopt;
  std::lock_guard lock(state_->mu);
  if (state_->queue.empty()) return std::nullopt;
  Message m = std::move(state_->queue.front());
  state_->queue.pop_front();
  return m;
}

std::size_t TopicSubscription::pending() const {
  if (!state_) return 0;
  std::lock_guard lock(state_->mu);
  return state_->queue.size();
}

std::size_t TopicSubscription::high_watermark() const {
  if (!state_) return 0;
  std::lock_guard lock(state_->mu);
  return state_->watermark;
}

bool TopicSubscription::active() const { return state_ && state_->active.load(); }

void TopicSubscription::cancel() {
  if (state_) state_->active = false;
}

const std::string& TopicSubscription::topic() const {
  static const std::string none;
  return state_ ? state_->topic : none;
}

struct Bus::Topic {
  std::string name;
  std::string schema_tag;
  std::mutex delivery;  // serializes publishes on this topic
  std::atomic<std::thread::id> delivering{};
  std::map<std::string, std::uint64_t> sequences;
  std::vector<std::shared_ptr<TopicSubscription::State>> subscribers;
};

Bus::Bus() = default;
Bus::~Bus() = default;

void Bus::create_topic(const std::string& name, const std::string& schema_tag) {
  if (name.empty()) throw RegistrationError("topic name must not be empty");
  std::lock_guard lock(mu_);
  if (topics_.contains(name)) throw RegistrationError("topic '" + name + "' already exists");
  auto t = std::make_unique<Topic>();
  t->name = name;
  t->schema_tag = schema_tag;
  topics_.emplace(name, std::move(t));
}

bool Bus::has_topic(const std::string& name) const {
  std::lock_guard lock(mu_);
  return topics_.contains(name);
}

Bus::Topic& Bus::lookup(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = topics_.find(name);
  if (it == topics_.end()) throw LookupError("unknown topic '" + name + "'");
  return *it->second;
}

const std::string& Bus::schema_tag(const std::string& name) const { return lookup(name).schema_tag; }

Message Bus::publish(const std::string& topic, const std::string& publisher,
                     const std::string& schema_tag, const nlohmann::json& value,
                     std::int64_t timestamp_us) {
  Topic& t = lookup(topic);
  if (t.schema_tag != schema_tag)
    throw ValidationError("topic '" + topic + "' carries '" + t.schema_tag + "', not '" +
                          schema_tag + "'");
  PayloadHandle payload(nlohmann::json::to_cbor(value));
  serializations_ += 1;
  return deliver(t, publisher, schema_tag, std::move(payload), timestamp_us);
}

Message Bus::publish_bytes(const std::string& topic, const std::string& publisher,
                           const std::string& schema_tag, std::vector<std::uint8_t> bytes,
                           std::int64_t timestamp_us) {
  Topic& t = lookup(topic);
  if (t.schema_tag != schema_tag)
    throw ValidationError("topic '" + topic + "' carries '" + t.schema_tag + "', not '" +
                          schema_tag + "'");
  return deliver(t, publisher, schema_tag, PayloadHandle(std::move(bytes)), timestamp_us);
}

Message Bus::deliver(Topic& t, const std::string& publisher, const std::string&,
                     PayloadHandle payload, std::int64_t timestamp_us) {
  if (t.delivering.load() == std::this_thread::get_id())
    throw Error("re-entrant publish to topic '" + t.name + "' from its own subscriber");
  std::lock_guard lock(t.delivery);
  t.delivering = std::this_thread::get_id();
  struct Reset {
    Topic& t;
    ~Reset() { t.delivering = std::thread::id{}; }
  } reset{t};

  Message m;
  m.topic = t.name;
  m.publisher = publisher;
  m.sequence = ++t.sequences[publisher];
  m.timestamp_us = timestamp_us;
  m.payload = std::move(payload);

  std::erase_if(t.subscribers, [](const auto& s) { return !s->active.load(); });
  const auto subscribers = t.subscribers;
  for (const auto& s : subscribers) {
    if (!s->active.load()) continue;
    if (s->callback) {
      s->callback(m);
    } else {
      std::lock_guard qlock(s->mu);
      s->queue.push_back(m);
      s->watermark = std::max(s->watermark, s->queue.size());
    }
  }
  return m;
}

TopicSubscription Bus::subscribe(const std::string& topic) { return subscribe(topic, nullptr); }

TopicSubscription Bus::subscribe(const std::string& topic, MessageCallback callback) {
  Topic& t = lookup(topic);
  TopicSubscription sub;
  sub.state_ = std::make_shared<TopicSubscription::State>();
  sub.state_->topic = topic;
  sub.state_->callback = std::move(callback);
  // Taking the delivery lock orders the subscription against in-flight
  // publishes; a subscriber callback subscribing to its own topic would
  // deadlock, so that case appends without it.
  if (t.delivering.load() == std::this_thread::get_id()) {
    t.subscribers.push_back(sub.state_);
  } else {
    std::lock_guard lock(t.delivery);
    t.subscribers.push_back(sub.state_);
  }
  return sub;
}

TopicSubscription topic_as_stream(Bus& bus, StreamRegistry& registry, const std::string& topic,
                                  std::string stream_id) {
  if (!bus.has_topic(topic)) throw LookupError("unknown topic '" + topic + "'");
  if (stream_id.empty()) stream_id = topic;
  registry.create_stream(SourceDescriptor{SourceKind::PubsubTopic, topic}, stream_id);
  return bus.subscribe(topic, [&registry, stream_id](const Message& m) {
    if (registry.listener_count(stream_id) == 0) return;
    registry.emit(stream_id, m.payload.decode(), m.timestamp_us);
  });
}

}  // namespace ctxsched
