#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ctxsched/reactive.hpp"

namespace ctxsched {

/// Immutable serialized buffer shared by every subscriber of a message.
class PayloadHandle {
 public:
  PayloadHandle() = default;
  explicit PayloadHandle(std::vector<std::uint8_t> bytes)
      : buffer_(std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes))) {}

  std::span<const std::uint8_t> bytes() const noexcept {
    return buffer_ ? std::span<const std::uint8_t>(*buffer_) : std::span<const std::uint8_t>();
  }
  std::size_t size() const noexcept { return buffer_ ? buffer_->size() : 0; }

  /// Identity of the underlying buffer; equal for all views of one publish.
  const void* identity() const noexcept { return buffer_.get(); }

  /// Decodes a payload published with Bus::publish (CBOR).
  nlohmann::json decode() const;

 private:
  std::shared_ptr<const std::vector<std::uint8_t>> buffer_;
};

struct Message {
  std::string topic;
  std::string publisher;
  std::uint64_t sequence = 0;  // per (topic, publisher), starting at 1
  std::int64_t timestamp_us = 0;
  PayloadHandle payload;
};

using MessageCallback = std::function<void(const Message&)>;

/// Subscriber end of a topic. Messages queue until polled unless a callback
/// was given at subscribe time. Copies share state.
class TopicSubscription {
 public:
  TopicSubscription() = default;

  std::optional<Message> poll();
  std::size_t pending() const;
  /// Deepest the queue has been.
  std::size_t high_watermark() const;
  bool active() const;
  void cancel();
  const std::string& topic() const;

 private:
  friend class Bus;
  struct State {
    std::string topic;
    MessageCallback callback;
    mutable std::mutex mu;
    std::deque<Message> queue;
    std::size_t watermark = 0;
    std::atomic<bool> active{true};
  };
  std::shared_ptr<State> state_;
};

/// In-process publish-subscribe medium. publish() may be called from any
/// thread; delivery is serialized per topic. A subscriber callback that
/// publishes to the topic it is being called for is rejected.
class Bus {
 public:
  Bus();
  ~Bus();
  Bus(const Bus&) = delete;
  Bus& operator=(const Bus&) = delete;

  /// Throws RegistrationError if the topic exists.
  void create_topic(const std::string& name, const std::string& schema_tag);
  bool has_topic(const std::string& name) const;
  const std::string& schema_tag(const std::string& name) const;

  /// Serializes `value` once and delivers the shared buffer. Throws
  /// LookupError for an unknown topic and ValidationError on a schema-tag
  /// mismatch.
  Message publish(const std::string& topic, const std::string& publisher,
                  const std::string& schema_tag, const nlohmann::json& value,
                  std::int64_t timestamp_us);

  /// Publishes pre-serialized bytes as-is.
  Message publish_bytes(const std::string& topic, const std::string& publisher,
                        const std::string& schema_tag, std::vector<std::uint8_t> bytes,
                        std::int64_t timestamp_us);

  TopicSubscription subscribe(const std::string& topic);
  TopicSubscription subscribe(const std::string& topic, MessageCallback callback);

  /// Number of payload serializations performed by publish().
  std::uint64_t serializations() const noexcept { return serializations_.load(); }

 private:
  struct Topic;
  Topic& lookup(const std::string& name) const;
  Message deliver(Topic& t, const std::string& publisher, const std::string& schema_tag,
                  PayloadHandle payload, std::int64_t timestamp_us);

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Topic>> topics_;
  std::atomic<std::uint64_t> serializations_{0};
};

/// Wraps a topic as an observable stream so module outputs can feed the
/// controller. Each message becomes one event carrying the decoded payload
/// and the message timestamp. Messages are decoded only while the stream
/// has listeners. The stream id defaults to the topic name.
TopicSubscription topic_as_stream(Bus& bus, StreamRegistry& registry, const std::string& topic,
                                  std::string stream_id = {});

}  // namespace ctxsched
