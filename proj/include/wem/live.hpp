#pragma once

// Simulation stepped in scaled real time for the operator console. The core
// loop stays single-threaded: API threads only drop keypad and load requests
// into an inbox and read snapshots published at step boundaries.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wem/simulation.hpp"

namespace wem {

class LiveSimulation {
 public:
  /// Default pace: one simulated minute per real second.
  explicit LiveSimulation(ScenarioSpec spec, SimOptions options = {}, double sim_seconds_per_second = 60.0)
      : sim_(std::move(spec), std::move(options)), pace_(sim_seconds_per_second) {
    if (!(pace_ > 0)) throw std::invalid_argument("live pace must be > 0");
    ids_ = sim_.meter_ids();
    publish();
  }

  ~LiveSimulation() { stop(); }

  LiveSimulation(const LiveSimulation&) = delete;
  LiveSimulation& operator=(const LiveSimulation&) = delete;

  void start() {
    if (thread_.joinable()) return;
    stopping_ = false;
    thread_ = std::thread([this] { loop(); });
  }

  void stop() {
    {
      std::lock_guard lock(wake_mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  /// Steps synchronously; only valid while the background loop is not running.
  void advance(std::int64_t steps) {
    for (std::int64_t i = 0; i < steps && !sim_.finished(); ++i) step_once();
  }

  bool has_meter(std::string_view id) const {
    return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
  }

  const std::vector<std::string>& meter_ids() const { return ids_; }

  bool queue_key(std::string_view id, Key key) {
    if (!has_meter(id)) return false;
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back({std::string(id), key, std::nullopt, false});
    return true;
  }

  bool set_load(std::string_view id, std::optional<std::int64_t> power_w) {
    if (!has_meter(id)) return false;
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back({std::string(id), std::nullopt, power_w, true});
    return true;
  }

  std::optional<PanelSnapshot> panel(std::string_view id) const {
    std::lock_guard lock(snapshot_mutex_);
    auto it = snapshots_.find(std::string(id));
    if (it == snapshots_.end()) return std::nullopt;
    return it->second;
  }

  std::int64_t sim_time() const { return sim_time_.load(); }
  std::shared_ptr<BaseStation> base_station() const { return sim_.shared_base_station(); }

 private:
  struct Request {
    std::string meter_id;
    std::optional<Key> key;
    std::optional<std::int64_t> power_w;
    bool is_load = false;
  };

  void step_once() {
    std::vector<Request> requests;
    {
      std::lock_guard lock(inbox_mutex_);
      requests.swap(inbox_);
    }
    for (const auto& r : requests) {
      if (r.is_load) sim_.set_load_override(r.meter_id, r.power_w);
      else if (r.key) sim_.queue_key(r.meter_id, *r.key);
    }
    sim_.step();
    publish();
  }

  void publish() {
    std::map<std::string, PanelSnapshot> fresh;
    for (const auto& id : ids_) fresh.emplace(id, *sim_.panel(id));
    std::lock_guard lock(snapshot_mutex_);
    snapshots_ = std::move(fresh);
    sim_time_ = sim_.now();
  }

  void loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration<double>(1.0 / pace_);
    auto next = clock::now();
    while (!sim_.finished()) {
      next += std::chrono::duration_cast<clock::duration>(period);
      std::unique_lock lock(wake_mutex_);
      if (wake_.wait_until(lock, next, [this] { return stopping_; })) return;
      lock.unlock();
      step_once();
    }
  }

  Simulation sim_;
  double pace_;
  std::vector<std::string> ids_;

  std::mutex inbox_mutex_;
  std::vector<Request> inbox_;

  mutable std::mutex snapshot_mutex_;
  std::map<std::string, PanelSnapshot> snapshots_;
  std::atomic<std::int64_t> sim_time_{0};

  std::mutex wake_mutex_;
  std::condition_variable wake_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace wem
