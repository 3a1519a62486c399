#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cosim/engine.hpp"
#include "cosim/network.hpp"
#include "cosim/scada.hpp"
#include "cosim/vulnhost.hpp"

namespace cosim::attack {

enum class Stage { S1Scan, S2Rce, S3Pe, S4Impact, Done, Failed };

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

struct AttackGoal {
  scada::EffectKind kind = scada::EffectKind::Dos;
  /// "*" selects every rooted host, otherwise a comma-free list of addresses.
  std::vector<std::string> targets{"*"};
  std::map<grid::Quantity, scada::AffineTransform> manipulation;

  void validate() const;
  bool selects(const std::string& address) const;
};

struct ActionRecord {
  std::uint64_t time_ms = 0;
  Stage stage = Stage::S1Scan;
  std::string action;
  std::string target;
  std::string outcome;
};

struct ImpactRecord {
  std::string address;
  scada::EffectKind kind = scada::EffectKind::Dos;
  SimTime activated_at;
};

struct DiscoveredPort {
  std::uint16_t port = 0;
  std::optional<net::Protocol> protocol_guess;
  friend auto operator<=>(const DiscoveredPort& a, const DiscoveredPort& b) { return a.port <=> b.port; }
  friend bool operator==(const DiscoveredPort& a, const DiscoveredPort& b) { return a.port == b.port; }
};

struct AttackerState {
  Stage stage = Stage::S1Scan;
  std::map<std::string, std::set<DiscoveredPort>> discovered;
  std::map<std::string, vuln::Session> sessions;
  std::set<std::string> rooted;
  std::vector<ActionRecord> action_log;
};

struct AttackerConfig {
  std::string id = "attacker";
  std::string address;
  AttackGoal goal;
  std::vector<std::string> address_range;
  std::vector<std::uint16_t> ports;  // scanned in ascending order
  vuln::Credentials credentials{"operator", "operator"};
  SimTime start_at;
  std::uint32_t probe_interval_ms = 2;
  std::uint32_t probe_timeout_ms = 100;
  std::uint32_t unreachable_after = 3;
  std::uint32_t exchange_timeout_ms = 500;
  std::uint32_t think_ms = 10;
};

/// Guess used to pick an exploit for an open port.
std::optional<net::Protocol> guess_protocol(std::uint16_t port);

namespace action {
struct Probe { std::string address; std::uint16_t port; };
struct AwaitScan { std::string address; };
struct Rce { std::string address; std::uint16_t port; net::Protocol protocol; };
struct CheckPrivilege { std::string address; };
struct Escalate { std::string address; vuln::PeMethod method; };
struct Impact { std::string address; };
struct Finish { Stage outcome; std::string reason; };
}  // namespace action

using Action = std::variant<action::Probe, action::AwaitScan, action::Rce, action::CheckPrivilege,
                            action::Escalate, action::Impact, action::Finish>;

/// Four-stage attacker: scan, remote code execution, privilege escalation,
/// impact. Stages only move forward; within a stage hosts are handled in
/// scan order and ports in ascending order, with no retries.
class Attacker {
 public:
  Attacker(Scheduler& scheduler, net::Network& network, AttackerConfig config);

  Attacker(const Attacker&) = delete;
  Attacker& operator=(const Attacker&) = delete;

  /// Schedules the first action at config.start_at and attaches to the network.
  void start();
  void on_packet(const net::Packet& packet);

  /// Decides the next action from the current state, recording stage
  /// transitions. Deterministic given the state.
  Action plan_next();

  const AttackerState& state() const { return state_; }
  const std::vector<ImpactRecord>& impacts() const { return impacts_; }
  const AttackerConfig& config() const { return config_; }
  std::optional<SimTime> stage_entered(Stage s) const;

  static constexpr std::string_view kCsvHeader = "time_ms,stage,action,target,outcome";
  std::string action_log_csv() const;

 private:
  enum class ScanPhase { Initial, Rest };
  enum class Pending { None, ScanWait, RceHttp, LoginHello, LoginCredentials, Whoami, Escalate, Impact };

  void step();
  void execute(const Action& a);
  void enter(Stage s);
  void log(std::string action, std::string target, std::string outcome);
  void send_request(const std::string& address, std::uint16_t port, net::Protocol protocol,
                    std::uint32_t length, vuln::ServiceRequest request);
  void expect(Pending kind, const std::string& address, std::uint16_t port);
  void complete_exchange();
  void on_scan_check(std::uint64_t token);
  void finish_scan_host(const std::string& outcome);
  void on_exchange_timeout(std::uint64_t exchange);
  void handle_response(const vuln::ServiceResponse& resp);
  void schedule_step(std::uint32_t delay_ms);
  std::vector<std::string> impact_targets() const;

  Scheduler& sched_;
  net::Network& net_;
  AttackerConfig config_;
  AttackerState state_;
  std::vector<ImpactRecord> impacts_;
  std::map<Stage, SimTime> entered_;

  // S1 cursors
  std::size_t scan_addr_ = 0;
  std::size_t scan_port_ = 0;
  ScanPhase scan_phase_ = ScanPhase::Initial;
  std::set<std::string> responded_;
  std::map<std::uint64_t, std::pair<std::string, std::uint16_t>> probes_;
  std::vector<std::string> scan_order_;
  // S2 cursors
  std::vector<action::Rce> rce_queue_;
  std::size_t rce_i_ = 0;
  bool rce_built_ = false;
  // S3 cursors
  std::vector<std::string> pe_hosts_;
  std::size_t pe_i_ = 0;
  std::size_t pe_step_ = 0;
  bool pe_built_ = false;
  // S4 cursors
  std::vector<std::string> impact_hosts_;
  std::size_t impact_i_ = 0;
  bool impact_built_ = false;

  Pending pending_ = Pending::None;
  std::string pending_addr_;
  std::uint16_t pending_port_ = 0;
  net::Protocol pending_proto_ = net::Protocol::Other;
  std::uint64_t next_exchange_ = 1;
  std::uint64_t pending_exchange_ = 0;
  std::uint64_t scan_token_ = 0;
};

}  // namespace cosim::attack
