#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cosim/network.hpp"
#include "cosim/scada.hpp"

namespace cosim::vuln {

/// Three-level user lattice; Root dominates both others.
enum class User { WwwData, Operator, Root };
enum class RceMethod { CmdParam, KnownCredentials };
enum class PeMethod { SuidBinary, SudoersScript };

std::string_view to_string(User u);
std::optional<User> parse_user(std::string_view s);
std::string_view to_string(RceMethod m);
std::optional<RceMethod> parse_rce_method(std::string_view s);
std::string_view to_string(PeMethod m);
std::optional<PeMethod> parse_pe_method(std::string_view s);

/// Escalation methods in the order an intruder tries them.
inline constexpr PeMethod kPeOrder[] = {PeMethod::SuidBinary, PeMethod::SudoersScript};

struct Credentials {
  std::string user;
  std::string password;
  friend bool operator==(const Credentials&, const Credentials&) = default;
};

struct RceSpec {
  RceMethod method = RceMethod::CmdParam;
  User executing_user = User::WwwData;
  Credentials credentials;  // KnownCredentials only
};

struct HostService {
  std::uint16_t port = 0;
  net::Protocol protocol = net::Protocol::Http;
  std::optional<RceSpec> rce;
  std::string banner;
};

struct HostConfig {
  std::string id;
  std::vector<HostService> services;
  std::set<PeMethod> pe_paths;

  void validate() const;
};

struct Session {
  std::uint64_t id = 0;
  std::string host;
  User user = User::WwwData;
  std::uint16_t port = 0;
  net::Protocol protocol = net::Protocol::Http;
  bool open = true;
};

// Wire-level exchange messages carried as packet payloads.

enum class RequestKind { Probe, HttpCommand, LoginHello, LoginCredentials, Exec, Escalate, Close };

struct ServiceRequest {
  std::uint64_t exchange = 0;
  std::uint16_t port = 0;
  RequestKind kind = RequestKind::Probe;
  std::string command;  // HttpCommand / Exec
  Credentials credentials;
  std::uint64_t session = 0;
  std::optional<PeMethod> method;
  std::optional<scada::CompromiseEffect> effect;  // Exec "apply_compromise"
};

enum class ResponseKind { PortOpen, Refused, Banner, SessionOpened, LoginFailed, Output, Error };

struct ServiceResponse {
  std::uint64_t exchange = 0;
  ResponseKind kind = ResponseKind::Error;
  std::string text;
  std::uint64_t session = 0;
  std::optional<User> user;
};

/// Protocol-typical packet sizes for abstracted handshakes.
namespace wire {
constexpr std::uint32_t kProbeBytes = 60;
constexpr std::uint32_t kProbeOpenBytes = 60;
constexpr std::uint32_t kRefusalBytes = 54;
constexpr std::uint32_t kHttpRequestBytes = 300;
constexpr std::uint32_t kHttpResponseBytes = 500;
constexpr std::uint32_t kLoginHelloBytes = 100;
constexpr std::uint32_t kLoginBannerBytes = 150;
constexpr std::uint32_t kLoginCredentialBytes = 120;
constexpr std::uint32_t kLoginResultBytes = 200;
constexpr std::uint32_t kShellRequestBytes = 120;
constexpr std::uint32_t kShellResponseBytes = 180;
}  // namespace wire

struct CommandResult {
  bool ok = false;
  std::string output;
};

struct EscalationAttempt {
  std::uint64_t session = 0;
  PeMethod method = PeMethod::SuidBinary;
  User before = User::WwwData;
  User after = User::WwwData;
};

/// Callback delivering an impact command to the host's application layer;
/// returns whether the effect was accepted.
using CompromiseHook = std::function<bool(const scada::CompromiseEffect&, bool caller_is_root)>;

/// A simulated host: its services, vulnerabilities and open sessions.
class VulnerableHost {
 public:
  explicit VulnerableHost(HostConfig config);

  const HostService* service(std::uint16_t port) const;

  /// Connection-level handling. Exploit-matching requests create sessions.
  ServiceResponse handle_connection(std::uint16_t port, const ServiceRequest& request);
  CommandResult exec_command(std::uint64_t session, const std::string& cmd,
                             const std::optional<scada::CompromiseEffect>& effect = std::nullopt);
  /// Returns the session user after the attempt; Root only via a configured path.
  User escalate(std::uint64_t session, PeMethod method);
  void close(std::uint64_t session);

  /// Network-facing: answers one request packet with one response packet
  /// whose protocol and length follow the wire size table.
  std::optional<net::Packet> on_packet(const net::Packet& request);

  void set_compromise_hook(CompromiseHook hook) { hook_ = std::move(hook); }
  const Session* session(std::uint64_t id) const;
  const std::vector<EscalationAttempt>& escalation_log() const { return escalations_; }
  const HostConfig& config() const { return config_; }

 private:
  Session& open_session(std::uint16_t port, net::Protocol protocol, User user);

  HostConfig config_;
  std::map<std::uint64_t, Session> sessions_;
  std::uint64_t next_session_ = 1;
  std::vector<EscalationAttempt> escalations_;
  CompromiseHook hook_;
};

}  // namespace cosim::vuln
