#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "cosim/network.hpp"

using namespace cosim;
using namespace cosim::net;

namespace {

IctTopology star(bool span = true, double loss = 0.0) {
  IctTopology t;
  t.nodes = {{"mtu", NodeKind::Host, "10.0.0.1"},
             {"rtu", NodeKind::Host, "10.0.1.1"},
             {"ids", NodeKind::Host, "10.0.0.9"},
             {"sw", NodeKind::Switch, ""}};
  t.links = {{"l_mtu", "mtu", "sw", 10, loss, 1'000'000, true},
             {"l_rtu", "rtu", "sw", 2, 0.0, 10'000'000, true},
             {"l_ids", "ids", "sw", 1, 0.0, 100'000'000, true}};
  if (span) t.span = SpanSpec{"sw", "ids"};
  return t;
}

Packet packet(std::string src, std::string dst, std::uint32_t len = 125) {
  Packet p;
  p.src = std::move(src);
  p.dst = std::move(dst);
  p.protocol = Protocol::Scada;
  p.length_bytes = len;
  return p;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("serialization time rounds up to whole milliseconds") {
  CHECK(serialization_ms(125, 1'000'000) == 1);
  CHECK(serialization_ms(126, 1'000'000) == 2);
  CHECK(serialization_ms(61, 10'000'000) == 1);
  CHECK(serialization_ms(1250, 10'000'000) == 1);
}

TEST_CASE("125 bytes over 10 ms at 1 Mbit/s arrive after 11 ms") {
  Scheduler s;
  Network n(s, star());
  n.record_transits();
  const auto r = n.transmit(packet("10.0.0.1", "10.0.1.1"), "l_mtu", "mtu");
  REQUIRE(r.delivered);
  CHECK(r.delivery_time->to_ms() == 11);
  CHECK(n.transits().front().delivered_ms - n.transits().front().enqueued_ms == 11);
}

TEST_CASE("end-to-end delivery through the switch") {
  Scheduler s;
  Network n(s, star());
  std::vector<Packet> got;
  n.attach("10.0.1.1", [&](const Packet& p) { got.push_back(p); });
  n.send(packet("10.0.0.1", "10.0.1.1"));
  s.run(SimTime::at_step(1));
  REQUIRE(got.size() == 1);
  // 1 ms + 10 ms on the MTU link, then 1 ms + 2 ms on the RTU link
  CHECK(got[0].delivered_at->to_ms() == 14);
  CHECK(n.stats().delivered == 1);
}

TEST_CASE("down links drop without scheduling a delivery") {
  Scheduler s;
  Network n(s, star());
  n.set_link_state("l_mtu", false);
  const auto before = s.pending();
  CHECK_FALSE(n.transmit(packet("10.0.0.1", "10.0.1.1"), "l_mtu", "mtu").delivered);
  CHECK(s.pending() == before);
  CHECK(n.stats().dropped_link_down == 1);

  n.set_link_state("l_mtu", true);
  CHECK(n.transmit(packet("10.0.0.1", "10.0.1.1"), "l_mtu", "mtu").delivered);
}

TEST_CASE("scheduled link toggles appear in the trace") {
  Scheduler s;
  s.enable_trace();
  Network n(s, star());
  n.schedule_link_state(SimTime::at_step(2, 250), "l_rtu", false);
  n.schedule_link_state(SimTime::at_step(4), "l_rtu", true);
  s.run(SimTime::at_step(3));
  CHECK_FALSE(n.link_up("l_rtu"));
  s.run(SimTime::at_step(5));
  CHECK(n.link_up("l_rtu"));
  CHECK(s.trace().find("2,250,0,l_rtu,link_down") != std::string::npos);
  CHECK(s.trace().find("4,0,1,l_rtu,link_up") != std::string::npos);
}

TEST_CASE("zero loss always delivers") {
  Scheduler s;
  Network n(s, star());
  int got = 0;
  n.attach("10.0.1.1", [&](const Packet&) { ++got; });
  for (int i = 0; i < 500; ++i) n.send(packet("10.0.0.1", "10.0.1.1"));
  s.run(SimTime::at_step(100));
  CHECK(got == 500);
}

TEST_CASE("unknown links and non-endpoints are configuration errors") {
  Scheduler s;
  Network n(s, star());
  CHECK_THROWS_AS(n.transmit(packet("10.0.0.1", "10.0.1.1"), "nope", "mtu"), ConfigError);
  CHECK_THROWS_AS(n.transmit(packet("10.0.0.1", "10.0.1.1"), "l_rtu", "mtu"), ConfigError);
}

TEST_CASE("one mirror copy per forwarded packet, in order") {
  Scheduler s;
  Network n(s, star());
  std::vector<std::uint64_t> mirrored, sent;
  n.set_monitor([&](const Packet& p) { mirrored.push_back(p.id); });
  for (int i = 0; i < 100; ++i) {
    sent.push_back(n.send(packet(i % 2 ? "10.0.0.1" : "10.0.1.1", i % 2 ? "10.0.1.1" : "10.0.0.1", 61)));
  }
  s.run(SimTime::at_step(10));
  CHECK(mirrored.size() == 100);
  CHECK(n.stats().span_forwarded == 100);
  // Packets from one sender share a FIFO path, so their mirror order is their send order.
  std::vector<std::uint64_t> from_mtu, mirrored_mtu;
  for (std::size_t i = 0; i < sent.size(); ++i) {
    if (i % 2) from_mtu.push_back(sent[i]);
  }
  for (auto id : mirrored) {
    if (id % 2 == 0) mirrored_mtu.push_back(id);
  }
  CHECK(mirrored_mtu == from_mtu);
}

TEST_CASE("no span, no mirror copies") {
  Scheduler s;
  Network n(s, star(false));
  int mirrored = 0;
  n.set_monitor([&](const Packet&) { ++mirrored; });
  n.send(packet("10.0.0.1", "10.0.1.1"));
  s.run(SimTime::at_step(1));
  CHECK(mirrored == 0);
}

TEST_CASE("FIFO queueing delays back-to-back packets") {
  Scheduler s;
  Network n(s, star());
  n.record_transits();
  for (int i = 0; i < 3; ++i) n.transmit(packet("10.0.0.1", "10.0.1.1", 250), "l_mtu", "mtu");
  const auto& t = n.transits();
  REQUIRE(t.size() == 3);
  CHECK(t[0].delivered_ms == 12);
  CHECK(t[1].delivered_ms == 14);
  CHECK(t[2].delivered_ms == 16);
  CHECK(t[2].start_ms == 4);
}

TEST_CASE("empirical loss rate is within 3 standard errors") {
  const double p = 0.2;
  Scheduler s(5);
  Network n(s, star(true, p));
  const int trials = 10'000;
  for (int i = 0; i < trials; ++i) n.transmit(packet("10.0.0.1", "10.0.1.1", 20), "l_mtu", "mtu");
  const double rate = static_cast<double>(n.stats().dropped_loss) / trials;
  const double se = std::sqrt(p * (1 - p) / trials);
  CHECK(std::abs(rate - p) < 3 * se);
}

TEST_CASE("firewall drops blocked prefixes") {
  IctTopology t = star(false);
  t.nodes.push_back({"fw", NodeKind::RouterFirewall, ""});
  t.nodes.push_back({"corp", NodeKind::Host, "192.168.1.5"});
  t.links.push_back({"l_fw", "fw", "sw", 1, 0.0, 100'000'000, true});
  t.links.push_back({"l_corp", "corp", "fw", 1, 0.0, 100'000'000, true});
  t.blocked_prefixes = {"192.168."};
  Scheduler s;
  Network n(s, t);
  int got = 0;
  n.attach("10.0.1.1", [&](const Packet&) { ++got; });
  n.send(packet("192.168.1.5", "10.0.1.1"));
  s.run(SimTime::at_step(1));
  CHECK(got == 0);
  CHECK(n.stats().dropped_firewall == 1);
}

TEST_CASE("topology validation lists every problem") {
  IctTopology t = star();
  t.links.push_back({"bad", "ghost", "sw", 1, 1.5, 1000, true});
  try {
    t.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("ghost") != std::string::npos);
    CHECK(what.find("bad") != std::string::npos);
  }
}

}
