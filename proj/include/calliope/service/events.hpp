#pragma once

// In-process publish/subscribe channel carrying JSON documents by topic.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace calliope::service {

class Subscription {
 public:
  enum class Status { Message, Timeout, Closed };

  void push(nlohmann::json doc) {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    queue_.push_back(std::move(doc));
    ready_.notify_all();
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    ready_.notify_all();
  }

  /// Queued messages drain before Closed is reported.
  Status next(nlohmann::json& out, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    if (!ready_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; })) return Status::Timeout;
    if (queue_.empty()) return Status::Closed;
    out = std::move(queue_.front());
    queue_.pop_front();
    return Status::Message;
  }

 private:
  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<nlohmann::json> queue_;
  bool closed_ = false;
};

class EventHub {
 public:
  std::shared_ptr<Subscription> subscribe(const std::string& topic) {
    auto sub = std::make_shared<Subscription>();
    std::lock_guard lock(mutex_);
    auto& list = topics_[topic];
    std::erase_if(list, [](const auto& w) { return w.expired(); });
    list.push_back(sub);
    return sub;
  }

  void publish(const std::string& topic, const nlohmann::json& doc) {
    for (auto& sub : live(topic)) sub->push(doc);
  }

  /// Ends the current subscribers' streams; later subscribers start fresh.
  void close(const std::string& topic) {
    std::vector<std::shared_ptr<Subscription>> subs;
    {
      std::lock_guard lock(mutex_);
      auto it = topics_.find(topic);
      if (it == topics_.end()) return;
      for (auto& w : it->second)
        if (auto s = w.lock()) subs.push_back(std::move(s));
      topics_.erase(it);
    }
    for (auto& s : subs) s->close();
  }

 private:
  std::vector<std::shared_ptr<Subscription>> live(const std::string& topic) {
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Subscription>> out;
    auto it = topics_.find(topic);
    if (it == topics_.end()) return out;
    for (auto& w : it->second)
      if (auto s = w.lock()) out.push_back(std::move(s));
    return out;
  }

  std::mutex mutex_;
  std::map<std::string, std::vector<std::weak_ptr<Subscription>>> topics_;
};

}  // namespace calliope::service
