#include "doctest.h"

#include <string>
#include <vector>

#include "cosim/engine.hpp"

using namespace cosim;

TEST_SUITE("engine") {

TEST_CASE("events scheduled from a handler run after all earlier steps") {
  Scheduler s;
  std::vector<std::string> order;
  s.schedule(SimTime::at_step(3), "a", "spawn", [&] {
    order.push_back("3a");
    s.schedule(SimTime::at_step(5), "c", "late", [&] { order.push_back("5c"); });
  });
  s.schedule(SimTime::at_step(3, 500), "b", "x", [&] { order.push_back("3b"); });
  s.schedule(SimTime::at_step(4), "b", "x", [&] { order.push_back("4b"); });
  s.schedule(SimTime::at_step(4, 999), "b", "x", [&] { order.push_back("4c"); });
  s.run(SimTime::at_step(10));
  CHECK(order == std::vector<std::string>{"3a", "3b", "4b", "4c", "5c"});
}

TEST_CASE("equal due times dispatch in insertion order") {
  Scheduler s;
  std::vector<int> order;
  for (int i = 0; i < 20; ++i) s.schedule(SimTime::at_step(1, 7), "t", "k", [&order, i] { order.push_back(i); });
  s.run(SimTime::at_step(2));
  for (int i = 0; i < 20; ++i) CHECK(order[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("empty queue leaves the clock at zero") {
  Scheduler s;
  const auto r = s.run(SimTime::at_step(100));
  CHECK(r.events_processed == 0);
  CHECK(s.now() == SimTime{});
  CHECK(r.final_clock == SimTime{});
}

TEST_CASE("run counts dispatched events and respects until") {
  Scheduler s;
  for (int i = 1; i <= 3; ++i) s.schedule(SimTime::at_step(static_cast<std::uint64_t>(i)), "t", "k", [] {});
  CHECK(s.run(SimTime::at_step(10)).events_processed == 3);

  Scheduler later;
  later.schedule(SimTime::at_step(5), "t", "k", [] {});
  CHECK(later.run(SimTime::at_step(4, 999)).events_processed == 0);
  CHECK(later.pending() == 1);
}

TEST_CASE("an event exactly at until is dispatched") {
  Scheduler s;
  s.schedule(SimTime::at_step(2, 10), "t", "k", [] {});
  CHECK(s.run(SimTime::at_step(2, 10)).events_processed == 1);
}

TEST_CASE("scheduling into the past is a simulation error") {
  Scheduler s;
  s.schedule(SimTime::at_step(5), "t", "k", [&] { s.schedule(SimTime::at_step(4), "t", "past", [] {}); });
  CHECK_THROWS_AS(s.run(SimTime::at_step(10)), SimulationError);
}

TEST_CASE("handler exceptions name the failing event") {
  Scheduler s;
  s.schedule(SimTime::at_step(1), "rtu9", "report", [] { throw std::runtime_error("boom"); });
  try {
    s.run(SimTime::at_step(2));
    FAIL("expected an exception");
  } catch (const SimulationError& e) {
    const std::string what = e.what();
    CHECK(what.find("rtu9") != std::string::npos);
    CHECK(what.find("report") != std::string::npos);
    CHECK(what.find("boom") != std::string::npos);
  }
}

TEST_CASE("identical seeds give identical traces") {
  auto trace = [](std::uint64_t seed) {
    Scheduler s(seed);
    s.enable_trace();
    std::mt19937_64 rng(s.seed_for("jitter"));
    for (int i = 0; i < 200; ++i) {
      const auto at = rng() % 50'000;
      s.schedule(SimTime::from_ms(at), "n" + std::to_string(i % 7), "ev", [] {});
    }
    s.run(SimTime::at_step(100));
    return s.trace();
  };
  CHECK(trace(42) == trace(42));
  CHECK(trace(42) != trace(43));
}

TEST_CASE("derived seeds depend on both root and component") {
  CHECK(derive_seed(1, "network") == derive_seed(1, "network"));
  CHECK(derive_seed(1, "network") != derive_seed(2, "network"));
  CHECK(derive_seed(1, "network") != derive_seed(1, "grid"));
}

TEST_CASE("unit_uniform stays in [0, 1)") {
  std::mt19937_64 rng(9);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const double u = unit_uniform(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("SimTime normalizes offsets") {
  CHECK(SimTime::from_ms(2500) == SimTime{2, 500});
  CHECK(SimTime::at_step(1, 1500) == SimTime{2, 500});
  CHECK(SimTime{3, 999}.plus_ms(1) == SimTime{4, 0});
  CHECK(SimTime{3, 0} < SimTime{3, 1});
}

}
