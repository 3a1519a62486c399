#include "cosim/network.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace cosim::net {

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::Scada: return "SCADA";
    case Protocol::Http: return "HTTP";
    case Protocol::Ssh: return "SSH";
    case Protocol::Telnet: return "TELNET";
    case Protocol::ScanProbe: return "SCAN_PROBE";
    case Protocol::Other: return "OTHER";
  }
  return "OTHER";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  for (auto p : {Protocol::Scada, Protocol::Http, Protocol::Ssh, Protocol::Telnet,
                 Protocol::ScanProbe, Protocol::Other}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Host: return "host";
    case NodeKind::Switch: return "switch";
    case NodeKind::RouterFirewall: return "router_firewall";
  }
  return "host";
}

std::optional<NodeKind> parse_node_kind(std::string_view s) {
  for (auto k : {NodeKind::Host, NodeKind::Switch, NodeKind::RouterFirewall}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::uint64_t serialization_ms(std::uint32_t length_bytes, std::uint64_t bandwidth_bits_per_s) {
  const std::uint64_t bit_ms = static_cast<std::uint64_t>(length_bytes) * 8ULL * 1000ULL;
  return (bit_ms + bandwidth_bits_per_s - 1) / bandwidth_bits_per_s;
}

const NodeSpec* IctTopology::find_node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const NodeSpec* IctTopology::find_address(std::string_view address) const {
  for (const auto& n : nodes) {
    if (!n.address.empty() && n.address == address) return &n;
  }
  return nullptr;
}

void IctTopology::validate() const {
  std::vector<std::string> errors;
  std::map<std::string, std::size_t> index;
  std::set<std::string> addresses;
  for (const auto& n : nodes) {
    if (!index.emplace(n.id, index.size()).second) errors.push_back("node '" + n.id + "' defined twice");
    if (n.kind == NodeKind::Host && n.address.empty()) {
      errors.push_back("host '" + n.id + "' has no address");
    }
    if (!n.address.empty() && !addresses.insert(n.address).second) {
      errors.push_back("address '" + n.address + "' of node '" + n.id + "' is not unique");
    }
  }

  std::set<std::string> link_ids;
  std::map<std::string, int> host_links;
  std::vector<std::size_t> parent(index.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& l : links) {
    if (!link_ids.insert(l.id).second) errors.push_back("link '" + l.id + "' defined twice");
    const auto a = index.find(l.endpoint_a);
    const auto b = index.find(l.endpoint_b);
    if (a == index.end()) errors.push_back("link '" + l.id + "' references unknown node '" + l.endpoint_a + "'");
    if (b == index.end()) errors.push_back("link '" + l.id + "' references unknown node '" + l.endpoint_b + "'");
    if (!(l.loss_probability >= 0.0 && l.loss_probability <= 1.0)) {
      errors.push_back("link '" + l.id + "': loss_probability " + std::to_string(l.loss_probability) +
                       " outside [0, 1]");
    }
    if (l.bandwidth_bits_per_s == 0) errors.push_back("link '" + l.id + "': bandwidth must be > 0");
    if (a == index.end() || b == index.end()) continue;
    if (a->second == b->second) {
      errors.push_back("link '" + l.id + "' connects node '" + l.endpoint_a + "' to itself");
      continue;
    }
    for (const auto* end : {&l.endpoint_a, &l.endpoint_b}) {
      if (nodes[index[*end]].kind == NodeKind::Host) ++host_links[*end];
    }
    const auto ra = find(a->second);
    const auto rb = find(b->second);
    if (ra == rb) {
      errors.push_back("link '" + l.id + "' closes a loop; the switch fabric must be a tree");
    } else {
      parent[ra] = rb;
    }
  }
  for (const auto& n : nodes) {
    if (n.kind != NodeKind::Host) continue;
    const int count = host_links.count(n.id) ? host_links[n.id] : 0;
    if (count != 1) {
      errors.push_back("host '" + n.id + "' must be attached by exactly one link, found " +
                       std::to_string(count));
    }
  }
  if (span) {
    const auto* sw = find_node(span->switch_id);
    if (!sw || sw->kind != NodeKind::Switch) {
      errors.push_back("span source '" + span->switch_id + "' is not a switch");
    }
    const auto* mon = find_node(span->monitor_node_id);
    if (!mon || mon->kind != NodeKind::Host) {
      errors.push_back("span monitor '" + span->monitor_node_id + "' is not a host");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid ict topology:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

Network::Network(Scheduler& scheduler, IctTopology topology)
    : sched_(scheduler), topo_(std::move(topology)), rng_(scheduler.seed_for("network")) {
  topo_.validate();
  node_links_.resize(topo_.nodes.size());
  fdb_.resize(topo_.nodes.size());
  for (std::size_t i = 0; i < topo_.nodes.size(); ++i) {
    node_by_id_.emplace(topo_.nodes[i].id, i);
    if (topo_.nodes[i].kind == NodeKind::Host) host_by_address_.emplace(topo_.nodes[i].address, i);
  }
  for (const auto& spec : topo_.links) {
    LinkState st{spec, node_by_id_.at(spec.endpoint_a), node_by_id_.at(spec.endpoint_b), {0, 0}};
    link_by_id_.emplace(spec.id, links_.size());
    node_links_[st.a].push_back(links_.size());
    node_links_[st.b].push_back(links_.size());
    links_.push_back(std::move(st));
  }
  if (topo_.span) span_switch_ = node_by_id_.at(topo_.span->switch_id);

  if (topo_.static_forwarding) {
    // Tree walk from every host fills each node's table with the link toward it.
    for (const auto& [address, host] : host_by_address_) {
      std::vector<std::size_t> frontier{host};
      std::vector<bool> seen(topo_.nodes.size(), false);
      seen[host] = true;
      for (std::size_t head = 0; head < frontier.size(); ++head) {
        const auto u = frontier[head];
        for (auto li : node_links_[u]) {
          const auto v = links_[li].a == u ? links_[li].b : links_[li].a;
          if (seen[v]) continue;
          seen[v] = true;
          fdb_[v][address] = li;
          frontier.push_back(v);
        }
      }
    }
  }
}

std::size_t Network::link_index(const std::string& link_id) const {
  const auto it = link_by_id_.find(link_id);
  if (it == link_by_id_.end()) throw ConfigError("unknown link '" + link_id + "'");
  return it->second;
}

void Network::attach(const std::string& address, Receiver receiver) {
  const auto it = host_by_address_.find(address);
  if (it == host_by_address_.end()) throw ConfigError("no host with address '" + address + "'");
  receivers_[it->second] = std::move(receiver);
}

std::uint64_t Network::send(Packet packet) {
  const auto host = host_by_address_.find(packet.src);
  if (host == host_by_address_.end()) {
    throw ConfigError("packet source '" + packet.src + "' is not a host address");
  }
  if (packet.length_bytes < kMinPacketBytes) {
    throw std::invalid_argument("packet shorter than " + std::to_string(kMinPacketBytes) + " bytes");
  }
  packet.id = next_packet_id_++;
  packet.sent_at = sched_.now();
  packet.delivered_at.reset();
  ++stats_.sent;
  const auto li = node_links_[host->second].front();
  transmit(packet, links_[li].spec.id, topo_.nodes[host->second].id);
  return packet.id;
}

TransmitResult Network::transmit(const Packet& packet, const std::string& link_id,
                                 const std::string& from_node) {
  const auto li = link_index(link_id);
  auto& link = links_[li];
  const auto from = node_by_id_.find(from_node);
  if (from == node_by_id_.end() || (from->second != link.a && from->second != link.b)) {
    throw ConfigError("node '" + from_node + "' is not an endpoint of link '" + link_id + "'");
  }
  if (!link.spec.up) {
    ++stats_.dropped_link_down;
    return {};
  }
  if (link.spec.loss_probability > 0.0 && unit_uniform(rng_) < link.spec.loss_probability) {
    ++stats_.dropped_loss;
    return {};
  }
  const int dir = from->second == link.a ? 0 : 1;
  const std::size_t to = dir == 0 ? link.b : link.a;
  const std::uint64_t now = sched_.now().to_ms();
  const std::uint64_t ser = serialization_ms(packet.length_bytes, link.spec.bandwidth_bits_per_s);
  const std::uint64_t start = std::max(now, link.busy_until_ms[dir]);
  link.busy_until_ms[dir] = start + ser;
  const std::uint64_t arrival = start + ser + link.spec.latency_ms;
  if (record_transits_) {
    transits_.push_back(LinkTransit{packet.id, link.spec.id, from_node, now, start, arrival, ser,
                                    link.spec.latency_ms});
  }
  const SimTime at = SimTime::from_ms(arrival);
  sched_.schedule(at, link.spec.id, "deliver", [this, p = packet, to, li]() mutable {
    arrive(std::move(p), to, li);
  });
  return TransmitResult{true, at};
}

bool Network::blocked(const Packet& packet) const {
  for (const auto& prefix : topo_.blocked_prefixes) {
    if (packet.src.starts_with(prefix) || packet.dst.starts_with(prefix)) return true;
  }
  return false;
}

void Network::arrive(Packet packet, std::size_t node, std::size_t via_link) {
  if (topo_.nodes[node].kind == NodeKind::Host) {
    if (topo_.nodes[node].address != packet.dst) return;  // flooded copy, not ours
    packet.delivered_at = sched_.now();
    ++stats_.delivered;
    const auto it = receivers_.find(node);
    if (it != receivers_.end() && it->second) it->second(packet);
    return;
  }
  forward(packet, node, via_link);
}

void Network::forward(const Packet& packet, std::size_t node, std::size_t ingress_link) {
  if (topo_.nodes[node].kind == NodeKind::RouterFirewall && blocked(packet)) {
    ++stats_.dropped_firewall;
    return;
  }
  auto& table = fdb_[node];
  if (!topo_.static_forwarding) table[packet.src] = ingress_link;

  std::vector<std::size_t> egress;
  const auto known = table.find(packet.dst);
  if (known != table.end()) {
    if (known->second != ingress_link) egress.push_back(known->second);
  } else {
    for (auto li : node_links_[node]) {
      if (li != ingress_link) egress.push_back(li);
    }
  }

  if (span_switch_ && *span_switch_ == node) {
    ++stats_.span_forwarded;
    if (monitor_) {
      Packet mirror = packet;
      mirror.delivered_at = sched_.now();
      ++stats_.mirrored;
      monitor_(mirror);
    }
  }
  for (auto li : egress) transmit(packet, links_[li].spec.id, topo_.nodes[node].id);
}

void Network::set_link_state(const std::string& link_id, bool up) {
  links_[link_index(link_id)].spec.up = up;
}

void Network::schedule_link_state(SimTime at, const std::string& link_id, bool up) {
  link_index(link_id);
  sched_.schedule(at, link_id, up ? "link_up" : "link_down",
                  [this, link_id, up] { set_link_state(link_id, up); });
}

bool Network::link_up(const std::string& link_id) const {
  return links_[link_index(link_id)].spec.up;
}

}  // namespace cosim::net
