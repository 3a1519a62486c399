#include "doctest.h"

#include "cosim/vulnhost.hpp"

using namespace cosim;
using namespace cosim::vuln;

namespace {

HostConfig rtu1() {
  HostConfig c;
  c.id = "rtu1";
  c.services = {{22, net::Protocol::Ssh, RceSpec{RceMethod::KnownCredentials, User::Operator, {"maint", "pw"}}, "OpenSSH"},
                {23, net::Protocol::Telnet, std::nullopt, "telnetd"},
                {80, net::Protocol::Http, RceSpec{RceMethod::CmdParam, User::WwwData, {}}, "nginx"}};
  c.pe_paths = {PeMethod::SuidBinary};
  return c;
}

ServiceRequest req(RequestKind kind, std::uint16_t port) {
  ServiceRequest r;
  r.kind = kind;
  r.port = port;
  return r;
}

std::uint64_t http_session(VulnerableHost& h) {
  auto r = req(RequestKind::HttpCommand, 80);
  r.command = "whoami";
  return h.handle_connection(80, r).session;
}

}  // namespace

TEST_SUITE("vulnhost") {

TEST_CASE("cmd_param on port 80 runs whoami as www-data") {
  VulnerableHost h(rtu1());
  auto r = req(RequestKind::HttpCommand, 80);
  r.command = "whoami";
  const auto resp = h.handle_connection(80, r);
  CHECK(resp.kind == ResponseKind::Output);
  CHECK(resp.text == "www-data");
  CHECK(resp.user == User::WwwData);
}

TEST_CASE("closed ports refuse") {
  VulnerableHost h(rtu1());
  CHECK(h.handle_connection(8080, req(RequestKind::Probe, 8080)).kind == ResponseKind::Refused);
  CHECK(h.handle_connection(22, req(RequestKind::Probe, 22)).kind == ResponseKind::PortOpen);
}

TEST_CASE("known credentials open an operator session, wrong ones do not") {
  VulnerableHost h(rtu1());
  auto r = req(RequestKind::LoginCredentials, 22);
  r.credentials = {"maint", "pw"};
  const auto ok = h.handle_connection(22, r);
  CHECK(ok.kind == ResponseKind::SessionOpened);
  CHECK(h.session(ok.session)->user == User::Operator);
  r.credentials = {"maint", "wrong"};
  CHECK(h.handle_connection(22, r).kind == ResponseKind::LoginFailed);
  r.credentials = {"maint", "pw"};
  CHECK(h.handle_connection(23, r).kind == ResponseKind::LoginFailed);  // no rce on telnet
}

TEST_CASE("whoami follows the session's privilege") {
  VulnerableHost h(rtu1());
  const auto s = http_session(h);
  CHECK(h.exec_command(s, "whoami").output == "www-data");
  CHECK(h.escalate(s, PeMethod::SuidBinary) == User::Root);
  CHECK(h.exec_command(s, "whoami").output == "root");
  CHECK(h.escalate(s, PeMethod::SuidBinary) == User::Root);
}

TEST_CASE("commands on closed sessions are rejected") {
  VulnerableHost h(rtu1());
  const auto s = http_session(h);
  h.close(s);
  CHECK_FALSE(h.exec_command(s, "whoami").ok);
  CHECK_THROWS(h.escalate(s, PeMethod::SuidBinary));
}

TEST_CASE("escalation without a configured path fails and is logged") {
  auto cfg = rtu1();
  cfg.pe_paths.clear();
  VulnerableHost h(cfg);
  const auto s = http_session(h);
  CHECK(h.escalate(s, PeMethod::SuidBinary) == User::WwwData);
  CHECK(h.escalate(s, PeMethod::SudoersScript) == User::WwwData);
  REQUIRE(h.escalation_log().size() == 2);
  CHECK(h.escalation_log()[1].after == User::WwwData);
}

TEST_CASE("sudoers path only works when configured") {
  auto cfg = rtu1();
  cfg.pe_paths = {PeMethod::SudoersScript};
  VulnerableHost h(cfg);
  const auto s = http_session(h);
  CHECK(h.escalate(s, PeMethod::SuidBinary) == User::WwwData);
  CHECK(h.escalate(s, PeMethod::SudoersScript) == User::Root);
}

TEST_CASE("apply_compromise reaches the hook with the caller's privilege") {
  VulnerableHost h(rtu1());
  bool seen_root = true;
  h.set_compromise_hook([&](const scada::CompromiseEffect&, bool root) {
    seen_root = root;
    return root;
  });
  const auto s = http_session(h);
  scada::CompromiseEffect dos;
  CHECK_FALSE(h.exec_command(s, "apply_compromise", dos).ok);
  CHECK_FALSE(seen_root);
  h.escalate(s, PeMethod::SuidBinary);
  CHECK(h.exec_command(s, "apply_compromise", dos).ok);
  CHECK(seen_root);
}

TEST_CASE("wire sizes follow the exchange kind") {
  VulnerableHost h(rtu1());
  net::Packet p;
  p.src = "10.0.0.66";
  p.dst = "10.0.1.11";
  p.payload = req(RequestKind::Probe, 80);
  auto out = h.on_packet(p);
  CHECK(out->length_bytes == wire::kProbeOpenBytes);
  CHECK(out->protocol == net::Protocol::ScanProbe);
  p.payload = req(RequestKind::Probe, 81);
  out = h.on_packet(p);
  CHECK(out->length_bytes == wire::kRefusalBytes);
  CHECK(out->protocol == net::Protocol::Other);
  auto cmd = req(RequestKind::HttpCommand, 80);
  cmd.command = "whoami";
  p.payload = cmd;
  out = h.on_packet(p);
  CHECK(out->length_bytes == wire::kHttpResponseBytes);
  CHECK(out->protocol == net::Protocol::Http);
  CHECK(out->dst == "10.0.0.66");
}

TEST_CASE("invalid host configurations are refused") {
  auto cfg = rtu1();
  cfg.services.push_back({80, net::Protocol::Http, std::nullopt, "dup"});
  CHECK_THROWS_AS(VulnerableHost{cfg}, ConfigError);
  auto bad = rtu1();
  bad.services[2].rce = RceSpec{RceMethod::KnownCredentials, User::Operator, {"a", "b"}};
  CHECK_THROWS_AS(VulnerableHost{bad}, ConfigError);
}

}
