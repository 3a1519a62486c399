#include "cosim/vulnhost.hpp"

#include <stdexcept>

namespace cosim::vuln {

std::string_view to_string(User u) {
  switch (u) {
    case User::WwwData: return "www-data";
    case User::Operator: return "operator";
    case User::Root: return "root";
  }
  return "?";
}

std::optional<User> parse_user(std::string_view s) {
  for (auto u : {User::WwwData, User::Operator, User::Root}) {
    if (to_string(u) == s) return u;
  }
  return std::nullopt;
}

std::string_view to_string(RceMethod m) {
  return m == RceMethod::CmdParam ? "cmd_param" : "known_credentials";
}

std::optional<RceMethod> parse_rce_method(std::string_view s) {
  if (s == "cmd_param") return RceMethod::CmdParam;
  if (s == "known_credentials") return RceMethod::KnownCredentials;
  return std::nullopt;
}

std::string_view to_string(PeMethod m) {
  return m == PeMethod::SuidBinary ? "suid_binary" : "sudoers_script";
}

std::optional<PeMethod> parse_pe_method(std::string_view s) {
  if (s == "suid_binary") return PeMethod::SuidBinary;
  if (s == "sudoers_script") return PeMethod::SudoersScript;
  return std::nullopt;
}

void HostConfig::validate() const {
  std::vector<std::string> errors;
  std::set<std::uint16_t> ports;
  for (const auto& s : services) {
    if (s.port == 0) errors.push_back("host '" + id + "': port 0 is out of range");
    if (!ports.insert(s.port).second) {
      errors.push_back("host '" + id + "': more than one service on port " + std::to_string(s.port));
    }
    if (s.rce) {
      const bool http = s.protocol == net::Protocol::Http;
      const bool shell = s.protocol == net::Protocol::Ssh || s.protocol == net::Protocol::Telnet;
      if (s.rce->method == RceMethod::CmdParam && !http) {
        errors.push_back("host '" + id + "': cmd_param rce on port " + std::to_string(s.port) +
                         " requires an HTTP service");
      }
      if (s.rce->method == RceMethod::KnownCredentials && !shell) {
        errors.push_back("host '" + id + "': known_credentials rce on port " + std::to_string(s.port) +
                         " requires an SSH or TELNET service");
      }
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid host configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

VulnerableHost::VulnerableHost(HostConfig config) : config_(std::move(config)) {
  config_.validate();
}

const HostService* VulnerableHost::service(std::uint16_t port) const {
  for (const auto& s : config_.services) {
    if (s.port == port) return &s;
  }
  return nullptr;
}

const Session* VulnerableHost::session(std::uint64_t id) const {
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : &it->second;
}

Session& VulnerableHost::open_session(std::uint16_t port, net::Protocol protocol, User user) {
  const auto id = next_session_++;
  return sessions_[id] = Session{id, config_.id, user, port, protocol, true};
}

ServiceResponse VulnerableHost::handle_connection(std::uint16_t port, const ServiceRequest& request) {
  ServiceResponse resp{request.exchange, ResponseKind::Error, {}, 0, std::nullopt};
  const auto* svc = service(port);
  if (!svc) {
    resp.kind = ResponseKind::Refused;
    resp.text = "connection refused";
    return resp;
  }
  switch (request.kind) {
    case RequestKind::Probe:
      resp.kind = ResponseKind::PortOpen;
      resp.text = svc->banner;
      return resp;
    case RequestKind::HttpCommand: {
      if (svc->protocol != net::Protocol::Http) {
        resp.text = "protocol mismatch";
        return resp;
      }
      if (!svc->rce || svc->rce->method != RceMethod::CmdParam) {
        resp.kind = ResponseKind::Banner;
        resp.text = "404 Not Found (" + svc->banner + ")";
        return resp;
      }
      auto& s = open_session(port, svc->protocol, svc->rce->executing_user);
      const auto result = exec_command(s.id, request.command);
      resp.kind = ResponseKind::Output;
      resp.text = result.output;
      resp.session = s.id;
      resp.user = s.user;
      return resp;
    }
    case RequestKind::LoginHello:
      if (svc->protocol != net::Protocol::Ssh && svc->protocol != net::Protocol::Telnet) {
        resp.text = "protocol mismatch";
        return resp;
      }
      resp.kind = ResponseKind::Banner;
      resp.text = svc->banner;
      return resp;
    case RequestKind::LoginCredentials: {
      if (svc->protocol != net::Protocol::Ssh && svc->protocol != net::Protocol::Telnet) {
        resp.text = "protocol mismatch";
        return resp;
      }
      if (svc->rce && svc->rce->method == RceMethod::KnownCredentials &&
          svc->rce->credentials == request.credentials) {
        auto& s = open_session(port, svc->protocol, svc->rce->executing_user);
        resp.kind = ResponseKind::SessionOpened;
        resp.session = s.id;
        resp.user = s.user;
        resp.text = "login ok";
      } else {
        resp.kind = ResponseKind::LoginFailed;
        resp.text = "login incorrect";
      }
      return resp;
    }
    case RequestKind::Exec:
    case RequestKind::Escalate:
    case RequestKind::Close:
      break;
  }

  const auto* s = session(request.session);
  if (!s || !s->open || s->port != port) {
    resp.text = "no such session";
    return resp;
  }
  if (request.kind == RequestKind::Close) {
    close(request.session);
    resp.kind = ResponseKind::Output;
    resp.text = "bye";
    return resp;
  }
  if (request.kind == RequestKind::Escalate) {
    if (!request.method) {
      resp.text = "missing escalation method";
      return resp;
    }
    const User after = escalate(request.session, *request.method);
    resp.kind = ResponseKind::Output;
    resp.user = after;
    resp.text = std::string(to_string(after));
    resp.session = request.session;
    return resp;
  }
  const auto result = exec_command(request.session, request.command, request.effect);
  resp.kind = result.ok ? ResponseKind::Output : ResponseKind::Error;
  resp.text = result.output;
  resp.session = request.session;
  resp.user = sessions_.at(request.session).user;
  return resp;
}

CommandResult VulnerableHost::exec_command(std::uint64_t id, const std::string& cmd,
                                           const std::optional<scada::CompromiseEffect>& effect) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end() || !it->second.open) return {false, "session closed"};
  const Session& s = it->second;
  if (cmd == "whoami") return {true, std::string(to_string(s.user))};
  if (cmd == "id") {
    switch (s.user) {
      case User::Root: return {true, "uid=0(root) gid=0(root)"};
      case User::Operator: return {true, "uid=1000(operator) gid=1000(operator)"};
      case User::WwwData: return {true, "uid=33(www-data) gid=33(www-data)"};
    }
  }
  if (cmd == "list_pe") {
    std::string out;
    for (auto m : config_.pe_paths) {
      if (!out.empty()) out += ' ';
      out += m == PeMethod::SuidBinary ? "/usr/local/bin/rtu-maint(suid)" : "/etc/sudoers.d/rtu-restart";
    }
    return {true, out};
  }
  if (cmd == "apply_compromise") {
    if (!effect || !hook_) return {false, "apply_compromise: nothing to apply"};
    const bool accepted = hook_(*effect, s.user == User::Root);
    return {accepted, accepted ? "applied" : "permission denied"};
  }
  return {false, cmd + ": command not found"};
}

User VulnerableHost::escalate(std::uint64_t id, PeMethod method) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end() || !it->second.open) {
    throw std::invalid_argument("escalation on closed or unknown session " + std::to_string(id));
  }
  Session& s = it->second;
  const User before = s.user;
  if (config_.pe_paths.contains(method)) s.user = User::Root;
  escalations_.push_back(EscalationAttempt{id, method, before, s.user});
  return s.user;
}

void VulnerableHost::close(std::uint64_t id) {
  const auto it = sessions_.find(id);
  if (it != sessions_.end()) it->second.open = false;
}

std::optional<net::Packet> VulnerableHost::on_packet(const net::Packet& request) {
  const auto* req = std::any_cast<ServiceRequest>(&request.payload);
  if (!req) return std::nullopt;
  const ServiceResponse resp = handle_connection(req->port, *req);

  net::Packet out;
  out.src = request.dst;
  out.dst = request.src;
  out.origin_actor = request.origin_actor;
  const auto* svc = service(req->port);
  const net::Protocol proto = svc ? svc->protocol : net::Protocol::Other;
  if (resp.kind == ResponseKind::Refused) {
    out.protocol = net::Protocol::Other;
    out.length_bytes = wire::kRefusalBytes;
  } else {
    switch (req->kind) {
      case RequestKind::Probe:
        out.protocol = net::Protocol::ScanProbe;
        out.length_bytes = wire::kProbeOpenBytes;
        break;
      case RequestKind::HttpCommand:
        out.protocol = proto;
        out.length_bytes = wire::kHttpResponseBytes;
        break;
      case RequestKind::LoginHello:
        out.protocol = proto;
        out.length_bytes = wire::kLoginBannerBytes;
        break;
      case RequestKind::LoginCredentials:
        out.protocol = proto;
        out.length_bytes = wire::kLoginResultBytes;
        break;
      case RequestKind::Exec:
      case RequestKind::Escalate:
      case RequestKind::Close:
        out.protocol = proto;
        out.length_bytes = proto == net::Protocol::Http ? wire::kHttpResponseBytes : wire::kShellResponseBytes;
        break;
    }
  }
  out.payload = resp;
  return out;
}

}  // namespace cosim::vuln
