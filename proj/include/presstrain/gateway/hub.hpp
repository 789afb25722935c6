#pragma once

// Fan-out of outbound messages to stream subscribers. Each subscriber owns
// a bounded queue: state frames are dropped oldest-first when it is full,
// control messages are always kept.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace presstrain::gateway {

enum class Delivery { State, Control };

struct OutboundMessage {
  Delivery delivery = Delivery::State;
  std::shared_ptr<const std::string> text;
};

class Outbox {
 public:
  explicit Outbox(std::size_t state_capacity) : capacity_(state_capacity) {}

  void push(const OutboundMessage& m) {
    std::lock_guard lock(mu_);
    if (m.delivery == Delivery::State) {
      if (state_count_ >= capacity_) {
        for (auto it = queue_.begin(); it != queue_.end(); ++it)
          if (it->delivery == Delivery::State) {
            queue_.erase(it);
            --state_count_;
            ++dropped_;
            break;
          }
      }
      ++state_count_;
    }
    queue_.push_back(m);
  }

  std::optional<OutboundMessage> pop() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    auto m = std::move(queue_.front());
    queue_.pop_front();
    if (m.delivery == Delivery::State) --state_count_;
    return m;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }
  std::uint64_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  mutable std::mutex mu_;
  std::deque<OutboundMessage> queue_;
  std::size_t capacity_;
  std::size_t state_count_ = 0;
  std::uint64_t dropped_ = 0;
};

/// Publisher side used by the driver loop. `notify` is called after a push
/// so the subscriber can schedule its writer; it must not block.
class Hub {
 public:
  using Id = std::uint64_t;

  explicit Hub(std::size_t state_capacity = 256) : capacity_(state_capacity) {}

  Id subscribe(std::shared_ptr<Outbox> box, std::function<void()> notify) {
    std::lock_guard lock(mu_);
    const Id id = next_++;
    subs_[id] = {std::move(box), std::move(notify)};
    return id;
  }

  std::shared_ptr<Outbox> make_outbox() const { return std::make_shared<Outbox>(capacity_); }

  void unsubscribe(Id id) {
    std::lock_guard lock(mu_);
    subs_.erase(id);
  }

  /// Subscribers are notified outside the lock so a notify that drops the
  /// last reference to a subscriber can unsubscribe safely.
  void publish(Delivery d, std::string text) {
    const OutboundMessage m{d, std::make_shared<const std::string>(std::move(text))};
    std::vector<Subscriber> subs;
    {
      std::lock_guard lock(mu_);
      subs.reserve(subs_.size());
      for (const auto& [id, sub] : subs_) subs.push_back(sub);
    }
    for (auto& sub : subs) {
      sub.box->push(m);
      if (sub.notify) sub.notify();
    }
  }

  /// State frames dropped so far across current subscribers.
  std::uint64_t dropped() const {
    std::lock_guard lock(mu_);
    std::uint64_t n = 0;
    for (const auto& [id, sub] : subs_) n += sub.box->dropped();
    return n;
  }

  std::size_t subscribers() const {
    std::lock_guard lock(mu_);
    return subs_.size();
  }

 private:
  struct Subscriber {
    std::shared_ptr<Outbox> box;
    std::function<void()> notify;
  };
  mutable std::mutex mu_;
  std::map<Id, Subscriber> subs_;
  Id next_ = 1;
  std::size_t capacity_;
};

}  // namespace presstrain::gateway
