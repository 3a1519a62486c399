#include "cosim/attacker.hpp"

#include <algorithm>

namespace cosim::attack {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::S1Scan: return "S1";
    case Stage::S2Rce: return "S2";
    case Stage::S3Pe: return "S3";
    case Stage::S4Impact: return "S4";
    case Stage::Done: return "done";
    case Stage::Failed: return "failed";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (auto st : {Stage::S1Scan, Stage::S2Rce, Stage::S3Pe, Stage::S4Impact, Stage::Done, Stage::Failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

void AttackGoal::validate() const {
  if (kind == scada::EffectKind::Manipulate && manipulation.empty()) {
    throw ConfigError("manipulate goal needs a manipulation spec");
  }
  if (kind == scada::EffectKind::Dos && !manipulation.empty()) {
    throw ConfigError("dos goal must not carry a manipulation spec");
  }
  if (targets.empty()) throw ConfigError("attack goal selects no target");
}

bool AttackGoal::selects(const std::string& address) const {
  return std::any_of(targets.begin(), targets.end(),
                     [&](const std::string& t) { return t == "*" || t == address; });
}

std::optional<net::Protocol> guess_protocol(std::uint16_t port) {
  switch (port) {
    case 22: return net::Protocol::Ssh;
    case 23: return net::Protocol::Telnet;
    case 80:
    case 8080: return net::Protocol::Http;
    case 2404: return net::Protocol::Scada;
    default: return std::nullopt;
  }
}

Attacker::Attacker(Scheduler& scheduler, net::Network& network, AttackerConfig config)
    : sched_(scheduler), net_(network), config_(std::move(config)) {
  config_.goal.validate();
  std::sort(config_.ports.begin(), config_.ports.end());
  config_.ports.erase(std::unique(config_.ports.begin(), config_.ports.end()), config_.ports.end());
}

void Attacker::start() {
  net_.attach(config_.address, [this](const net::Packet& p) { on_packet(p); });
  sched_.schedule(config_.start_at, config_.id, "attack_start", [this] {
    enter(Stage::S1Scan);
    step();
  });
}

std::optional<SimTime> Attacker::stage_entered(Stage s) const {
  const auto it = entered_.find(s);
  if (it == entered_.end()) return std::nullopt;
  return it->second;
}

void Attacker::log(std::string action, std::string target, std::string outcome) {
  state_.action_log.push_back(ActionRecord{sched_.now().to_ms(), state_.stage, std::move(action),
                                           std::move(target), std::move(outcome)});
}

void Attacker::enter(Stage s) {
  state_.stage = s;
  entered_.emplace(s, sched_.now());
  log("enter_stage", "*", std::string(to_string(s)));
}

void Attacker::schedule_step(std::uint32_t delay_ms) {
  sched_.schedule_in(delay_ms, config_.id, "attack_step", [this] { step(); });
}

void Attacker::step() {
  if (state_.stage == Stage::Done || state_.stage == Stage::Failed) return;
  execute(plan_next());
}

std::vector<std::string> Attacker::impact_targets() const {
  std::vector<std::string> out;
  for (const auto& a : scan_order_) {
    if (state_.rooted.contains(a) && config_.goal.selects(a)) out.push_back(a);
  }
  return out;
}

Action Attacker::plan_next() {
  for (;;) {
    switch (state_.stage) {
      case Stage::S1Scan: {
        if (scan_addr_ >= config_.address_range.size()) {
          enter(Stage::S2Rce);
          continue;
        }
        const auto& addr = config_.address_range[scan_addr_];
        const std::size_t limit = scan_phase_ == ScanPhase::Initial
                                      ? std::min<std::size_t>(config_.unreachable_after, config_.ports.size())
                                      : config_.ports.size();
        if (scan_port_ < limit) return action::Probe{addr, config_.ports[scan_port_++]};
        return action::AwaitScan{addr};
      }
      case Stage::S2Rce: {
        if (!rce_built_) {
          rce_built_ = true;
          for (const auto& addr : scan_order_) {
            for (const auto& dp : state_.discovered[addr]) {
              rce_queue_.push_back(action::Rce{addr, dp.port, dp.protocol_guess.value_or(net::Protocol::Other)});
            }
          }
        }
        while (rce_i_ < rce_queue_.size()) {
          const auto cand = rce_queue_[rce_i_++];
          if (state_.sessions.contains(cand.address)) continue;
          const bool exploitable = cand.protocol == net::Protocol::Http ||
                                   cand.protocol == net::Protocol::Ssh ||
                                   cand.protocol == net::Protocol::Telnet;
          if (!exploitable) {
            log("rce_skip", cand.address + ":" + std::to_string(cand.port), "no_exploit");
            continue;
          }
          return cand;
        }
        if (state_.sessions.empty()) return action::Finish{Stage::Failed, "no_session"};
        enter(Stage::S3Pe);
        continue;
      }
      case Stage::S3Pe: {
        if (!pe_built_) {
          pe_built_ = true;
          for (const auto& addr : scan_order_) {
            if (state_.sessions.contains(addr)) pe_hosts_.push_back(addr);
          }
        }
        if (pe_i_ >= pe_hosts_.size()) {
          if (state_.rooted.empty()) return action::Finish{Stage::Failed, "no_root"};
          enter(Stage::S4Impact);
          continue;
        }
        const auto& host = pe_hosts_[pe_i_];
        if (pe_step_ == 0) return action::CheckPrivilege{host};
        if (pe_step_ <= std::size(vuln::kPeOrder)) return action::Escalate{host, vuln::kPeOrder[pe_step_ - 1]};
        ++pe_i_;
        pe_step_ = 0;
        continue;
      }
      case Stage::S4Impact: {
        if (!impact_built_) {
          impact_built_ = true;
          impact_hosts_ = impact_targets();
          if (impact_hosts_.empty()) return action::Finish{Stage::Failed, "no_rooted_target"};
        }
        if (impact_i_ < impact_hosts_.size()) return action::Impact{impact_hosts_[impact_i_++]};
        if (impacts_.empty()) return action::Finish{Stage::Failed, "impact_denied"};
        return action::Finish{Stage::Done, "goal_reached"};
      }
      case Stage::Done:
      case Stage::Failed:
        return action::Finish{state_.stage, ""};
    }
  }
}

void Attacker::send_request(const std::string& address, std::uint16_t port, net::Protocol protocol,
                            std::uint32_t length, vuln::ServiceRequest request) {
  request.port = port;
  net::Packet p;
  p.src = config_.address;
  p.dst = address;
  p.protocol = protocol;
  p.length_bytes = length;
  p.origin_actor = config_.id;
  p.payload = std::move(request);
  net_.send(std::move(p));
}

void Attacker::expect(Pending kind, const std::string& address, std::uint16_t port) {
  pending_ = kind;
  pending_addr_ = address;
  pending_port_ = port;
  const auto ex = pending_exchange_;
  sched_.schedule_in(config_.exchange_timeout_ms, config_.id, "exchange_timeout",
                     [this, ex] { on_exchange_timeout(ex); });
}

void Attacker::execute(const Action& a) {
  using namespace vuln;
  std::visit(
      [this](const auto& act) {
        using T = std::decay_t<decltype(act)>;
        if constexpr (std::is_same_v<T, action::Probe>) {
          const auto ex = next_exchange_++;
          probes_[ex] = {act.address, act.port};
          log("probe", act.address + ":" + std::to_string(act.port), "sent");
          ServiceRequest req;
          req.exchange = ex;
          req.kind = RequestKind::Probe;
          send_request(act.address, act.port, net::Protocol::ScanProbe, wire::kProbeBytes, req);
          schedule_step(config_.probe_interval_ms);
        } else if constexpr (std::is_same_v<T, action::AwaitScan>) {
          const auto token = ++scan_token_;
          sched_.schedule_in(config_.probe_timeout_ms, config_.id, "scan_check",
                             [this, token] { on_scan_check(token); });
        } else if constexpr (std::is_same_v<T, action::Rce>) {
          pending_exchange_ = next_exchange_++;
          pending_proto_ = act.protocol;
          ServiceRequest req;
          req.exchange = pending_exchange_;
          if (act.protocol == net::Protocol::Http) {
            req.kind = RequestKind::HttpCommand;
            req.command = "whoami";
            send_request(act.address, act.port, net::Protocol::Http, wire::kHttpRequestBytes, req);
            expect(Pending::RceHttp, act.address, act.port);
          } else {
            req.kind = RequestKind::LoginHello;
            send_request(act.address, act.port, act.protocol, wire::kLoginHelloBytes, req);
            expect(Pending::LoginHello, act.address, act.port);
          }
        } else if constexpr (std::is_same_v<T, action::CheckPrivilege> ||
                             std::is_same_v<T, action::Escalate> || std::is_same_v<T, action::Impact>) {
          const auto& s = state_.sessions.at(act.address);
          pending_exchange_ = next_exchange_++;
          ServiceRequest req;
          req.exchange = pending_exchange_;
          req.session = s.id;
          Pending kind = Pending::Whoami;
          if constexpr (std::is_same_v<T, action::CheckPrivilege>) {
            req.kind = RequestKind::Exec;
            req.command = "whoami";
          } else if constexpr (std::is_same_v<T, action::Escalate>) {
            req.kind = RequestKind::Escalate;
            req.method = act.method;
            kind = Pending::Escalate;
          } else {
            req.kind = RequestKind::Exec;
            req.command = "apply_compromise";
            scada::CompromiseEffect effect;
            effect.kind = config_.goal.kind;
            if (effect.kind == scada::EffectKind::Manipulate) effect.transform = config_.goal.manipulation;
            effect.active_from = sched_.now();
            req.effect = effect;
            kind = Pending::Impact;
          }
          const bool http = s.protocol == net::Protocol::Http;
          send_request(act.address, s.port, s.protocol,
                       http ? wire::kHttpRequestBytes : wire::kShellRequestBytes, req);
          expect(kind, act.address, s.port);
        } else if constexpr (std::is_same_v<T, action::Finish>) {
          if (state_.stage != Stage::Done && state_.stage != Stage::Failed) {
            state_.stage = act.outcome;
            entered_.emplace(act.outcome, sched_.now());
            log("finish", "*", act.reason);
          }
        }
      },
      a);
}

void Attacker::on_scan_check(std::uint64_t token) {
  if (token != scan_token_ || state_.stage != Stage::S1Scan) return;
  const auto& addr = config_.address_range[scan_addr_];
  if (scan_phase_ == ScanPhase::Initial) {
    if (!responded_.contains(addr)) {
      finish_scan_host("unreachable");
      return;
    }
    if (scan_port_ < config_.ports.size()) {
      scan_phase_ = ScanPhase::Rest;
      schedule_step(0);
      return;
    }
  }
  std::string open;
  const auto it = state_.discovered.find(addr);
  if (it != state_.discovered.end()) {
    for (const auto& dp : it->second) {
      open += open.empty() ? "open:" : ";";
      open += std::to_string(dp.port);
    }
  }
  finish_scan_host(open.empty() ? "no_open_ports" : open);
}

void Attacker::finish_scan_host(const std::string& outcome) {
  const auto& addr = config_.address_range[scan_addr_];
  log("host_scan", addr, outcome);
  if (state_.discovered.contains(addr)) scan_order_.push_back(addr);
  ++scan_addr_;
  scan_port_ = 0;
  scan_phase_ = ScanPhase::Initial;
  schedule_step(0);
}

void Attacker::on_packet(const net::Packet& packet) {
  const auto* resp = std::any_cast<vuln::ServiceResponse>(&packet.payload);
  if (!resp) return;
  const auto probe = probes_.find(resp->exchange);
  if (probe != probes_.end()) {
    const auto [addr, port] = probe->second;
    probes_.erase(probe);
    responded_.insert(addr);
    if (resp->kind == vuln::ResponseKind::PortOpen) {
      state_.discovered[addr].insert(DiscoveredPort{port, guess_protocol(port)});
    }
    return;
  }
  if (pending_ != Pending::None && resp->exchange == pending_exchange_) handle_response(*resp);
}

void Attacker::complete_exchange() {
  pending_ = Pending::None;
  schedule_step(config_.think_ms);
}

void Attacker::handle_response(const vuln::ServiceResponse& resp) {
  using vuln::ResponseKind;
  const std::string target = pending_addr_ + ":" + std::to_string(pending_port_);
  const std::string rce_action = "rce_" + std::string(net::to_string(pending_proto_));
  switch (pending_) {
    case Pending::RceHttp:
    case Pending::LoginCredentials: {
      const bool ok = resp.kind == ResponseKind::Output || resp.kind == ResponseKind::SessionOpened;
      std::string action = rce_action;
      std::transform(action.begin(), action.end(), action.begin(), ::tolower);
      if (ok && resp.user) {
        state_.sessions[pending_addr_] =
            vuln::Session{resp.session, pending_addr_, *resp.user, pending_port_, pending_proto_, true};
        log(action, target, "session:" + std::string(vuln::to_string(*resp.user)) +
                                (resp.kind == ResponseKind::Output ? ";output:" + resp.text : ""));
      } else {
        log(action, target, "failed");
      }
      complete_exchange();
      return;
    }
    case Pending::LoginHello: {
      if (resp.kind != ResponseKind::Banner) {
        std::string action = rce_action;
        std::transform(action.begin(), action.end(), action.begin(), ::tolower);
        log(action, target, "failed");
        complete_exchange();
        return;
      }
      pending_exchange_ = next_exchange_++;
      vuln::ServiceRequest req;
      req.exchange = pending_exchange_;
      req.kind = vuln::RequestKind::LoginCredentials;
      req.credentials = config_.credentials;
      send_request(pending_addr_, pending_port_, pending_proto_, vuln::wire::kLoginCredentialBytes, req);
      expect(Pending::LoginCredentials, pending_addr_, pending_port_);
      return;
    }
    case Pending::Whoami: {
      const auto user = resp.user.value_or(vuln::User::WwwData);
      log("whoami", pending_addr_, resp.kind == ResponseKind::Output ? resp.text : "error");
      state_.sessions[pending_addr_].user = user;
      if (user == vuln::User::Root) {
        state_.rooted.insert(pending_addr_);
        ++pe_i_;
        pe_step_ = 0;
      } else {
        pe_step_ = 1;
      }
      complete_exchange();
      return;
    }
    case Pending::Escalate: {
      const auto method = vuln::kPeOrder[pe_step_ - 1];
      const bool root = resp.user == vuln::User::Root;
      log("pe_" + std::string(vuln::to_string(method)), pending_addr_, root ? "root" : "failed");
      if (root) {
        state_.sessions[pending_addr_].user = vuln::User::Root;
        state_.rooted.insert(pending_addr_);
        ++pe_i_;
        pe_step_ = 0;
      } else {
        ++pe_step_;
      }
      complete_exchange();
      return;
    }
    case Pending::Impact: {
      const bool applied = resp.kind == ResponseKind::Output;
      log("impact_" + std::string(scada::to_string(config_.goal.kind)), pending_addr_,
          applied ? "applied" : "denied");
      if (applied) impacts_.push_back(ImpactRecord{pending_addr_, config_.goal.kind, sched_.now()});
      complete_exchange();
      return;
    }
    case Pending::None:
    case Pending::ScanWait:
      return;
  }
}

void Attacker::on_exchange_timeout(std::uint64_t exchange) {
  if (pending_ == Pending::None || exchange != pending_exchange_) return;
  const std::string target = pending_addr_ + ":" + std::to_string(pending_port_);
  switch (pending_) {
    case Pending::Whoami:
    case Pending::Escalate:
      log(pending_ == Pending::Whoami ? "whoami" : "pe_attempt", pending_addr_, "timeout");
      ++pe_i_;
      pe_step_ = 0;
      break;
    case Pending::Impact:
      log("impact_" + std::string(scada::to_string(config_.goal.kind)), pending_addr_, "timeout");
      break;
    default:
      log("rce_attempt", target, "timeout");
      break;
  }
  complete_exchange();
}

std::string Attacker::action_log_csv() const {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : state_.action_log) {
    out += std::to_string(r.time_ms) + ',' + std::string(to_string(r.stage)) + ',' + r.action + ',' +
           r.target + ',' + r.outcome + '\n';
  }
  return out;
}

}  // namespace cosim::attack
