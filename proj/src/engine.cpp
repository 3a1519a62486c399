#include "cosim/engine.hpp"

#include <exception>

namespace cosim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string describe(const Event& e) {
  return "event seq=" + std::to_string(e.seq) + " target=" + e.target + " kind=" + e.kind +
         " at " + std::to_string(e.due.step) + ":" + std::to_string(e.due.offset_ms);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view component) {
  return splitmix64(splitmix64(root_seed) ^ fnv1a(component));
}

std::uint64_t Scheduler::schedule(SimTime due, std::string target, std::string kind,
                                  EventHandler action) {
  if (due < now_) {
    throw SimulationError("cannot schedule " + kind + " for " + target + " at " +
                          std::to_string(due.to_ms()) + " ms, clock is already at " +
                          std::to_string(now_.to_ms()) + " ms");
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(Event{due, seq, std::move(target), std::move(kind), std::move(action)});
  return seq;
}

RunSummary Scheduler::run(SimTime until) {
  RunSummary summary;
  while (!queue_.empty() && queue_.top().due <= until) {
    // priority_queue::top is const; the event is moved out before pop.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    now_ = ev.due;
    if (tracing_) {
      trace_ += std::to_string(ev.due.step);
      trace_ += ',';
      trace_ += std::to_string(ev.due.offset_ms);
      trace_ += ',';
      trace_ += std::to_string(ev.seq);
      trace_ += ',';
      trace_ += ev.target;
      trace_ += ',';
      trace_ += ev.kind;
      trace_ += '\n';
    }
    try {
      if (ev.action) ev.action();
    } catch (const SimulationError& err) {
      throw SimulationError(describe(ev) + ": " + err.what());
    } catch (const std::exception& err) {
      throw SimulationError(describe(ev) + " failed: " + err.what());
    }
    ++summary.events_processed;
  }
  summary.final_clock = now_;
  return summary;
}

}  // namespace cosim
