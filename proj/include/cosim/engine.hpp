#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cosim {

/// Fatal error raised by the scheduler: scheduling into the past or a failing
/// event handler. The message names the offending event.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulation clock value. One grid step spans kStepMs milliseconds of
/// network time; offset_ms is always normalized to [0, kStepMs).
struct SimTime {
  static constexpr std::uint64_t kStepMs = 1000;

  std::uint64_t step = 0;
  std::uint32_t offset_ms = 0;

  static constexpr SimTime from_ms(std::uint64_t ms) {
    return SimTime{ms / kStepMs, static_cast<std::uint32_t>(ms % kStepMs)};
  }
  static constexpr SimTime at_step(std::uint64_t s, std::uint32_t off = 0) {
    return from_ms(s * kStepMs + off);
  }
  constexpr std::uint64_t to_ms() const { return step * kStepMs + offset_ms; }
  constexpr SimTime plus_ms(std::uint64_t ms) const { return from_ms(to_ms() + ms); }

  friend constexpr auto operator<=>(const SimTime&, const SimTime&) = default;
};

using EventHandler = std::function<void()>;

struct Event {
  SimTime due;
  std::uint64_t seq = 0;
  std::string target;
  std::string kind;
  EventHandler action;
};

struct RunSummary {
  std::uint64_t events_processed = 0;
  SimTime final_clock;
};

/// Derives an independent component seed from the root seed and a component
/// name, so adding a component never perturbs another component's stream.
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view component);

/// Uniform double in [0, 1) from 53 random bits; independent of the
/// standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Single-threaded discrete-event scheduler. Events are dispatched in strict
/// (due, seq) order; seq is the insertion counter.
class Scheduler {
 public:
  explicit Scheduler(std::uint64_t root_seed = 0) : root_seed_(root_seed) {}

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  /// Enqueues an event. Throws SimulationError if `due` precedes the clock.
  std::uint64_t schedule(SimTime due, std::string target, std::string kind, EventHandler action);

  std::uint64_t schedule_in(std::uint64_t delay_ms, std::string target, std::string kind,
                            EventHandler action) {
    return schedule(now_.plus_ms(delay_ms), std::move(target), std::move(kind), std::move(action));
  }

  /// Dispatches every queued event with due <= until. The clock rests at the
  /// last dispatched event.
  RunSummary run(SimTime until);

  SimTime now() const { return now_; }
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t seed_for(std::string_view component) const {
    return derive_seed(root_seed_, component);
  }

  /// Trace lines `step,offset_ms,seq,target,kind`, recorded only when enabled.
  void enable_trace(bool on = true) { tracing_ = on; }
  const std::string& trace() const { return trace_; }
  static constexpr std::string_view kTraceHeader = "step,offset_ms,seq,target,kind";

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.due != b.due) return a.due > b.due;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  SimTime now_{};
  std::uint64_t next_seq_ = 0;
  std::uint64_t root_seed_;
  bool tracing_ = false;
  std::string trace_;
};

}  // namespace cosim
