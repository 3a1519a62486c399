#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cosim/engine.hpp"
#include "cosim/powergrid.hpp"

namespace cosim::net {

enum class NodeKind { Host, Switch, RouterFirewall };
enum class Protocol { Scada, Http, Ssh, Telnet, ScanProbe, Other };

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);
std::string_view to_string(NodeKind k);
std::optional<NodeKind> parse_node_kind(std::string_view s);

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Host;
  std::string address;  // hosts only; opaque dotted-quad style identifier
};

struct LinkSpec {
  std::string id;
  std::string endpoint_a;
  std::string endpoint_b;
  std::uint32_t latency_ms = 1;
  double loss_probability = 0.0;
  std::uint64_t bandwidth_bits_per_s = 100'000'000;
  bool up = true;
};

struct SpanSpec {
  std::string switch_id;
  std::string monitor_node_id;
};

struct IctTopology {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::optional<SpanSpec> span;
  /// Address prefixes dropped by router/firewall nodes.
  std::vector<std::string> blocked_prefixes;
  /// Pre-populate switch forwarding tables instead of learning them.
  bool static_forwarding = false;

  /// Throws ConfigError listing every violated invariant.
  void validate() const;
  const NodeSpec* find_node(std::string_view id) const;
  const NodeSpec* find_address(std::string_view address) const;
};

struct Packet {
  std::uint64_t id = 0;
  SimTime sent_at;
  std::optional<SimTime> delivered_at;
  std::string src;
  std::string dst;
  Protocol protocol = Protocol::Other;
  std::uint32_t length_bytes = 20;
  std::any payload;
  /// Component that initiated the exchange; responses inherit it.
  std::string origin_actor;
};

constexpr std::uint32_t kMinPacketBytes = 20;

/// Serialization time in whole milliseconds: ceil(bits / bandwidth * 1000).
std::uint64_t serialization_ms(std::uint32_t length_bytes, std::uint64_t bandwidth_bits_per_s);

/// One hop of one packet across one link, for delay-law checks.
struct LinkTransit {
  std::uint64_t packet_id = 0;
  std::string link_id;
  std::string from_node;
  std::uint64_t enqueued_ms = 0;
  std::uint64_t start_ms = 0;  // serialization start (after FIFO queueing)
  std::uint64_t delivered_ms = 0;
  std::uint64_t serialization_ms = 0;
  std::uint32_t latency_ms = 0;
};

struct TransmitResult {
  bool delivered = false;
  std::optional<SimTime> delivery_time;
};

struct NetworkStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;        // reached the addressed host
  std::uint64_t dropped_link_down = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_firewall = 0;
  std::uint64_t span_forwarded = 0;   // distinct packets forwarded by the SPAN switch
  std::uint64_t mirrored = 0;
};

/// Emulated process network driven by the scheduler. Hosts send through
/// their single access link; switches learn source ports and flood unknown
/// destinations; the SPAN switch mirrors every packet it forwards once.
class Network {
 public:
  using Receiver = std::function<void(const Packet&)>;

  Network(Scheduler& scheduler, IctTopology topology);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// Registers the receive handler of the host owning `address`.
  void attach(const std::string& address, Receiver receiver);
  /// Sink for SPAN mirror copies; called at mirror time with delivered_at set.
  void set_monitor(Receiver receiver) { monitor_ = std::move(receiver); }

  /// Host-side send: stamps id and sent_at, then transmits on the access link.
  std::uint64_t send(Packet packet);

  /// Puts `packet` on `link_id` leaving `from_node`. Throws ConfigError on an
  /// unknown link or a node that is not an endpoint of it.
  TransmitResult transmit(const Packet& packet, const std::string& link_id,
                          const std::string& from_node);

  /// Applies immediately; deliveries already scheduled still complete.
  void set_link_state(const std::string& link_id, bool up);
  /// Schedules a link state change as an engine event (appears in the trace).
  void schedule_link_state(SimTime at, const std::string& link_id, bool up);
  bool link_up(const std::string& link_id) const;

  void record_transits(bool on = true) { record_transits_ = on; }
  const std::vector<LinkTransit>& transits() const { return transits_; }
  const NetworkStats& stats() const { return stats_; }
  const IctTopology& topology() const { return topo_; }
  Scheduler& scheduler() { return sched_; }

 private:
  struct LinkState {
    LinkSpec spec;
    std::size_t a = 0;
    std::size_t b = 0;
    std::uint64_t busy_until_ms[2] = {0, 0};  // per direction: 0 = a->b, 1 = b->a
  };

  std::size_t link_index(const std::string& link_id) const;
  void arrive(Packet packet, std::size_t node, std::size_t via_link);
  void forward(const Packet& packet, std::size_t node, std::size_t ingress_link);
  bool blocked(const Packet& packet) const;

  Scheduler& sched_;
  IctTopology topo_;
  std::vector<LinkState> links_;
  std::vector<std::vector<std::size_t>> node_links_;
  std::map<std::string, std::size_t, std::less<>> node_by_id_;
  std::map<std::string, std::size_t, std::less<>> link_by_id_;
  std::map<std::string, std::size_t, std::less<>> host_by_address_;
  std::vector<std::map<std::string, std::size_t, std::less<>>> fdb_;  // per node: address -> link
  std::map<std::size_t, Receiver> receivers_;
  std::optional<std::size_t> span_switch_;
  Receiver monitor_;
  std::mt19937_64 rng_;
  std::uint64_t next_packet_id_ = 1;
  bool record_transits_ = false;
  std::vector<LinkTransit> transits_;
  NetworkStats stats_;
};

}  // namespace cosim::net
