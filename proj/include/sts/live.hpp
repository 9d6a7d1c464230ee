#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stop_token>
#include <thread>
#include <vector>

#include "sts/acquisition.hpp"
#include "sts/channel.hpp"
#include "sts/sensor_model.hpp"

namespace sts {

struct LiveEvent {
  std::int64_t t_ms = 0;
  ChannelId channel = ChannelId::FrontLeft;
  double kg = 0.0;
};

/// Fan-out point between an active device session and stream subscribers.
/// A subscriber sees the current session from its first event; per-channel
/// order is the publish order.
class LiveHub {
public:
  struct Cursor {
    std::uint64_t session = 0;
    std::size_t next = 0;
  };

  enum class Poll { Events, Ended, Timeout };

  std::uint64_t start_session() {
    std::lock_guard lock(mu_);
    ++session_;
    active_ = true;
    events_.clear();
    cv_.notify_all();
    return session_;
  }

  void publish(const LiveEvent& e) {
    std::lock_guard lock(mu_);
    if (!active_) return;
    events_.push_back(e);
    cv_.notify_all();
  }

  void end_session() {
    std::lock_guard lock(mu_);
    active_ = false;
    cv_.notify_all();
  }

  bool active() const {
    std::lock_guard lock(mu_);
    return active_;
  }

  std::optional<Cursor> subscribe() const {
    std::lock_guard lock(mu_);
    if (!active_) return std::nullopt;
    return Cursor{session_, 0};
  }

  /// Appends pending events to `out`. Returns Ended once the subscribed
  /// session is over and fully drained.
  Poll poll(Cursor& cur, std::vector<LiveEvent>& out, std::chrono::milliseconds wait) const {
    std::unique_lock lock(mu_);
    auto ready = [&] { return cur.session != session_ || !active_ || cur.next < events_.size(); };
    cv_.wait_for(lock, wait, ready);
    if (cur.session != session_) return Poll::Ended;
    if (cur.next < events_.size()) {
      out.insert(out.end(), events_.begin() + static_cast<std::ptrdiff_t>(cur.next), events_.end());
      cur.next = events_.size();
      return Poll::Events;
    }
    return active_ ? Poll::Timeout : Poll::Ended;
  }

private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::uint64_t session_ = 0;
  bool active_ = false;
  std::vector<LiveEvent> events_;
};

/// Calibrated events of a recording in arrival order.
inline std::vector<LiveEvent> live_events(const PerChannel<ChannelStream>& corrected, const ChairCalibration& cal) {
  std::vector<LiveEvent> ev;
  for (ChannelId c : kChannels) {
    const Calibration& k = cal[index_of(c)];
    for (const RawSample& s : corrected[index_of(c)]) {
      const double kg = static_cast<double>(s.counts - k.tare_counts) / k.scale_counts_per_kg;
      ev.push_back({s.t_ms, c, kg});
    }
  }
  std::stable_sort(ev.begin(), ev.end(), [](const LiveEvent& a, const LiveEvent& b) { return a.t_ms < b.t_ms; });
  return ev;
}

/// Replays a simulated chair into a hub at `speed` times real time, then
/// ends the session. Runs on its own thread; destruction stops it early.
class DeviceSession {
public:
  DeviceSession(LiveHub& hub, const MotionProfile& profile, const DriftModel& drift, double duration_s, int rate,
                std::uint64_t seed, double speed = 1.0)
      : hub_(hub) {
    const ChairCalibration cal = default_calibration();
    const auto rec = simulate_chair(profile, cal, drift, duration_s, rate, seed);
    auto events = live_events(corrected_streams(rec), cal);
    hub_.start_session();
    worker_ = std::jthread([this, events = std::move(events), speed](std::stop_token st) {
      const auto t0 = std::chrono::steady_clock::now();
      for (const LiveEvent& e : events) {
        const auto due = t0 + std::chrono::microseconds(static_cast<std::int64_t>(e.t_ms * 1000.0 / speed));
        while (!st.stop_requested() && std::chrono::steady_clock::now() < due)
          std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
              due - std::chrono::steady_clock::now(), std::chrono::milliseconds(20)));
        if (st.stop_requested()) break;
        hub_.publish(e);
      }
      hub_.end_session();
    });
  }

  DeviceSession(const DeviceSession&) = delete;
  DeviceSession& operator=(const DeviceSession&) = delete;

  void wait() {
    if (worker_.joinable()) worker_.join();
  }

private:
  LiveHub& hub_;
  std::jthread worker_;
};

}  // namespace sts
