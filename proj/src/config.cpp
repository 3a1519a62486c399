#include "cosim/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace cosim::config {

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = std::to_string(errors.size()) + " configuration error" + (errors.size() == 1 ? "" : "s") + ":";
  for (const auto& e : errors) msg += "\n  " + e;
  return msg;
}

template <typename T>
std::string type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
  else if constexpr (std::is_integral_v<T>) return "an integer";
  else return "a string";
}

class Reader {
 public:
  std::vector<std::string> errors;

  void error(const YAML::Node& n, const std::string& path, const std::string& msg) {
    std::string loc = path;
    if (n.IsDefined() && n.Mark().line >= 0) loc += " (line " + std::to_string(n.Mark().line + 1) + ")";
    errors.push_back(loc + ": " + msg);
  }

  bool map(const YAML::Node& n, const std::string& path, bool required = false) {
    if (!n.IsDefined() || n.IsNull()) {
      if (required) errors.push_back(path + ": missing required section");
      return false;
    }
    if (!n.IsMap()) {
      error(n, path, "expected a mapping");
      return false;
    }
    return true;
  }

  bool seq(const YAML::Node& n, const std::string& path, bool required = false) {
    if (!n.IsDefined() || n.IsNull()) {
      if (required) errors.push_back(path + ": missing required list");
      return false;
    }
    if (!n.IsSequence()) {
      error(n, path, "expected a list");
      return false;
    }
    return true;
  }

  void known_keys(const YAML::Node& n, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!n.IsMap()) return;
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        error(kv.first, path + "." + key, "unknown key");
      }
    }
  }

  template <typename T>
  bool get(const YAML::Node& parent, const char* key, const std::string& path, T& out, bool required = false) {
    const YAML::Node n = parent[key];
    const std::string where = path + "." + key;
    if (!n.IsDefined() || n.IsNull()) {
      if (required) error(parent, where, "missing required key");
      return false;
    }
    if (!n.IsScalar()) {
      error(n, where, "expected " + type_name<T>());
      return false;
    }
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!n.Scalar().empty() && n.Scalar().front() == '-') {
        error(n, where, "expected " + type_name<T>() + ", found '" + n.Scalar() + "'");
        return false;
      }
    }
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      error(n, where, "expected " + type_name<T>() + ", found '" + n.Scalar() + "'");
      return false;
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(out)) {
        error(n, where, "must be finite");
        return false;
      }
    }
    return true;
  }

  template <typename T>
  void range(const YAML::Node& parent, const char* key, const std::string& path, T value, T lo, T hi) {
    if (value < lo || value > hi) {
      std::ostringstream msg;
      msg << "value " << value << " out of range [" << lo << ", " << hi << "]";
      error(parent[key], path + "." + key, msg.str());
    }
  }
};

// Child values override base values; nested maps merge, everything else is replaced.
YAML::Node merge(const YAML::Node& base, const YAML::Node& child) {
  if (!base.IsMap() || !child.IsMap()) return YAML::Clone(child);
  YAML::Node out = YAML::Clone(base);
  for (const auto& kv : child) {
    const auto key = kv.first.as<std::string>();
    if (out[key] && out[key].IsMap() && kv.second.IsMap()) {
      out[key] = merge(out[key], kv.second);
    } else {
      out[key] = YAML::Clone(kv.second);
    }
  }
  return out;
}

YAML::Node load_with_extends(const YAML::Node& doc, const std::filesystem::path& base_dir,
                             std::vector<std::filesystem::path>& chain) {
  if (!doc.IsMap() || !doc["extends"]) return doc;
  const auto parent_path = base_dir / doc["extends"].as<std::string>();
  const auto canonical = std::filesystem::weakly_canonical(parent_path);
  if (std::find(chain.begin(), chain.end(), canonical) != chain.end()) {
    throw ConfigErrors({"extends: cycle through " + parent_path.string()});
  }
  if (!std::filesystem::exists(parent_path)) {
    throw ConfigErrors({"extends (line " + std::to_string(doc["extends"].Mark().line + 1) +
                        "): base file not found: " + parent_path.string()});
  }
  chain.push_back(canonical);
  YAML::Node parent;
  try {
    parent = YAML::LoadFile(parent_path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigErrors({parent_path.string() + ": " + e.what()});
  }
  parent = load_with_extends(parent, parent_path.parent_path(), chain);
  YAML::Node child = YAML::Clone(doc);
  child.remove("extends");
  return merge(parent, child);
}

void read_grid(Reader& r, const YAML::Node& n, GridSection& g) {
  const std::string p = "grid";
  if (!r.map(n, p, true)) return;
  r.known_keys(n, p, {"buses", "lines", "transformer", "loads", "ders", "load_profile"});
  if (r.seq(n["buses"], p + ".buses", true)) {
    std::size_t i = 0;
    for (const auto& b : n["buses"]) {
      const std::string bp = p + ".buses[" + std::to_string(i++) + "]";
      if (!r.map(b, bp)) continue;
      r.known_keys(b, bp, {"id", "nominal_kv"});
      grid::Bus bus;
      r.get(b, "id", bp, bus.id, true);
      r.get(b, "nominal_kv", bp, bus.nominal_kv, true);
      g.model.buses.push_back(bus);
    }
  }
  const auto t = n["transformer"];
  if (r.map(t, p + ".transformer", true)) {
    const std::string tp = p + ".transformer";
    r.known_keys(t, tp, {"id", "hv_bus", "lv_bus", "rating_kva", "r_ohm", "x_ohm"});
    r.get(t, "id", tp, g.model.transformer.id, true);
    r.get(t, "hv_bus", tp, g.model.transformer.hv_bus, true);
    r.get(t, "lv_bus", tp, g.model.transformer.lv_bus, true);
    r.get(t, "rating_kva", tp, g.model.transformer.rating_kva, true);
    r.get(t, "r_ohm", tp, g.model.transformer.r_ohm);
    r.get(t, "x_ohm", tp, g.model.transformer.x_ohm);
  }
  if (r.seq(n["lines"], p + ".lines")) {
    std::size_t i = 0;
    for (const auto& l : n["lines"]) {
      const std::string lp = p + ".lines[" + std::to_string(i++) + "]";
      if (!r.map(l, lp)) continue;
      r.known_keys(l, lp, {"id", "from", "to", "r_ohm", "x_ohm", "rating_kva"});
      grid::Line line;
      r.get(l, "id", lp, line.id, true);
      r.get(l, "from", lp, line.from_bus, true);
      r.get(l, "to", lp, line.to_bus, true);
      r.get(l, "r_ohm", lp, line.r_ohm, true);
      r.get(l, "x_ohm", lp, line.x_ohm, true);
      r.get(l, "rating_kva", lp, line.rating_kva, true);
      g.model.lines.push_back(line);
    }
  }
  if (r.seq(n["loads"], p + ".loads")) {
    std::size_t i = 0;
    for (const auto& l : n["loads"]) {
      const std::string lp = p + ".loads[" + std::to_string(i++) + "]";
      if (!r.map(l, lp)) continue;
      r.known_keys(l, lp, {"id", "bus", "p_kw", "q_kvar"});
      grid::Load load;
      r.get(l, "id", lp, load.id, true);
      r.get(l, "bus", lp, load.bus, true);
      r.get(l, "p_kw", lp, load.p_kw, true);
      r.get(l, "q_kvar", lp, load.q_kvar);
      g.model.loads.push_back(load);
    }
  }
  if (r.seq(n["ders"], p + ".ders")) {
    std::size_t i = 0;
    for (const auto& d : n["ders"]) {
      const std::string dp = p + ".ders[" + std::to_string(i++) + "]";
      if (!r.map(d, dp)) continue;
      r.known_keys(d, dp, {"id", "bus", "p_kw"});
      grid::Der der;
      r.get(d, "id", dp, der.id, true);
      r.get(d, "bus", dp, der.bus, true);
      r.get(d, "p_kw", dp, der.p_kw, true);
      g.model.ders.push_back(der);
    }
  }
  const auto lp = n["load_profile"];
  if (r.map(lp, p + ".load_profile")) {
    const std::string pp = p + ".load_profile";
    r.known_keys(lp, pp, {"day_length_steps", "noise_amplitude"});
    if (r.get(lp, "day_length_steps", pp, g.day_length_steps) && g.day_length_steps == 0) {
      r.error(lp["day_length_steps"], pp + ".day_length_steps", "must be > 0");
    }
    if (r.get(lp, "noise_amplitude", pp, g.noise_amplitude)) {
      r.range(lp, "noise_amplitude", pp, g.noise_amplitude, 0.0, 1.0);
    }
  }
}

void read_ict(Reader& r, const YAML::Node& n, net::IctTopology& ict) {
  const std::string p = "ict";
  if (!r.map(n, p, true)) return;
  r.known_keys(n, p, {"nodes", "links", "span", "blocked_prefixes", "static_forwarding"});
  if (r.seq(n["nodes"], p + ".nodes", true)) {
    std::size_t i = 0;
    for (const auto& x : n["nodes"]) {
      const std::string np = p + ".nodes[" + std::to_string(i++) + "]";
      if (!r.map(x, np)) continue;
      r.known_keys(x, np, {"id", "kind", "address"});
      net::NodeSpec node;
      r.get(x, "id", np, node.id, true);
      std::string kind = "host";
      r.get(x, "kind", np, kind);
      if (const auto k = net::parse_node_kind(kind)) {
        node.kind = *k;
      } else {
        r.error(x["kind"], np + ".kind", "unknown node kind '" + kind + "' (host, switch, router_firewall)");
      }
      r.get(x, "address", np, node.address);
      ict.nodes.push_back(node);
    }
  }
  if (r.seq(n["links"], p + ".links", true)) {
    std::size_t i = 0;
    for (const auto& x : n["links"]) {
      const std::string lp = p + ".links[" + std::to_string(i++) + "]";
      if (!r.map(x, lp)) continue;
      r.known_keys(x, lp, {"id", "a", "b", "latency_ms", "loss_probability", "bandwidth_bits_per_s", "up"});
      net::LinkSpec link;
      r.get(x, "id", lp, link.id, true);
      r.get(x, "a", lp, link.endpoint_a, true);
      r.get(x, "b", lp, link.endpoint_b, true);
      r.get(x, "latency_ms", lp, link.latency_ms);
      if (r.get(x, "loss_probability", lp, link.loss_probability)) {
        r.range(x, "loss_probability", lp, link.loss_probability, 0.0, 1.0);
        link.loss_probability = std::clamp(link.loss_probability, 0.0, 1.0);
      }
      if (r.get(x, "bandwidth_bits_per_s", lp, link.bandwidth_bits_per_s) && link.bandwidth_bits_per_s == 0) {
        r.error(x["bandwidth_bits_per_s"], lp + ".bandwidth_bits_per_s", "must be > 0");
        link.bandwidth_bits_per_s = 1;
      }
      r.get(x, "up", lp, link.up);
      ict.links.push_back(link);
    }
  }
  const auto span = n["span"];
  if (r.map(span, p + ".span")) {
    r.known_keys(span, p + ".span", {"switch", "monitor"});
    net::SpanSpec s;
    r.get(span, "switch", p + ".span", s.switch_id, true);
    r.get(span, "monitor", p + ".span", s.monitor_node_id, true);
    ict.span = s;
  }
  if (r.seq(n["blocked_prefixes"], p + ".blocked_prefixes")) {
    for (const auto& b : n["blocked_prefixes"]) ict.blocked_prefixes.push_back(b.as<std::string>());
  }
  r.get(n, "static_forwarding", p, ict.static_forwarding);
}

void read_scada(Reader& r, const YAML::Node& n, MtuSection& mtu, std::vector<RtuSection>& rtus) {
  const std::string p = "scada";
  if (!r.map(n, p, true)) return;
  r.known_keys(n, p, {"mtu", "rtus"});
  const auto m = n["mtu"];
  if (r.map(m, p + ".mtu", true)) {
    r.known_keys(m, p + ".mtu", {"node", "stale_after_cycles"});
    r.get(m, "node", p + ".mtu", mtu.node, true);
    if (r.get(m, "stale_after_cycles", p + ".mtu", mtu.stale_after_cycles) && mtu.stale_after_cycles == 0) {
      r.error(m["stale_after_cycles"], p + ".mtu.stale_after_cycles", "must be >= 1");
    }
  }
  if (r.seq(n["rtus"], p + ".rtus", true)) {
    std::size_t i = 0;
    for (const auto& x : n["rtus"]) {
      const std::string rp = p + ".rtus[" + std::to_string(i++) + "]";
      if (!r.map(x, rp)) continue;
      r.known_keys(x, rp, {"id", "node", "points"});
      RtuSection rtu;
      r.get(x, "id", rp, rtu.binding.rtu_id, true);
      r.get(x, "node", rp, rtu.node, true);
      if (r.seq(x["points"], rp + ".points", true)) {
        std::size_t j = 0;
        for (const auto& pt : x["points"]) {
          const std::string pp = rp + ".points[" + std::to_string(j++) + "]";
          if (!r.map(pt, pp)) continue;
          r.known_keys(pt, pp, {"id", "element", "quantity"});
          grid::PointBinding b;
          r.get(pt, "id", pp, b.point_id, true);
          r.get(pt, "element", pp, b.element, true);
          std::string q;
          if (r.get(pt, "quantity", pp, q, true)) {
            if (const auto parsed = grid::parse_quantity(q)) {
              b.quantity = *parsed;
            } else {
              r.error(pt["quantity"], pp + ".quantity",
                      "unknown quantity '" + q + "' (loading_percent, P_kW, Q_kvar, V_pu)");
            }
          }
          rtu.binding.points.push_back(b);
        }
      }
      rtus.push_back(std::move(rtu));
    }
  }
}

void read_hosts(Reader& r, const YAML::Node& n, std::vector<HostSection>& hosts) {
  const std::string p = "hosts";
  if (!r.seq(n, p)) return;
  std::size_t i = 0;
  for (const auto& x : n) {
    const std::string hp = p + "[" + std::to_string(i++) + "]";
    if (!r.map(x, hp)) continue;
    r.known_keys(x, hp, {"node", "services", "pe_paths"});
    HostSection h;
    r.get(x, "node", hp, h.node, true);
    h.host.id = h.node;
    if (r.seq(x["services"], hp + ".services")) {
      std::size_t j = 0;
      for (const auto& s : x["services"]) {
        const std::string sp = hp + ".services[" + std::to_string(j++) + "]";
        if (!r.map(s, sp)) continue;
        r.known_keys(s, sp, {"port", "protocol", "banner", "rce"});
        vuln::HostService svc;
        int port = 0;
        if (r.get(s, "port", sp, port, true)) {
          r.range(s, "port", sp, port, 1, 65535);
          svc.port = static_cast<std::uint16_t>(std::clamp(port, 0, 65535));
        }
        std::string proto;
        if (r.get(s, "protocol", sp, proto, true)) {
          if (const auto pr = net::parse_protocol(proto)) {
            svc.protocol = *pr;
          } else {
            r.error(s["protocol"], sp + ".protocol", "unknown protocol '" + proto + "'");
          }
        }
        r.get(s, "banner", sp, svc.banner);
        const auto rce = s["rce"];
        if (r.map(rce, sp + ".rce")) {
          const std::string rp = sp + ".rce";
          r.known_keys(rce, rp, {"method", "user", "credentials"});
          vuln::RceSpec spec;
          std::string method;
          if (r.get(rce, "method", rp, method, true)) {
            if (const auto m = vuln::parse_rce_method(method)) {
              spec.method = *m;
            } else {
              r.error(rce["method"], rp + ".method", "unknown rce method '" + method + "'");
            }
          }
          std::string user = "www-data";
          r.get(rce, "user", rp, user);
          if (const auto u = vuln::parse_user(user)) {
            spec.executing_user = *u;
          } else {
            r.error(rce["user"], rp + ".user", "unknown user '" + user + "'");
          }
          const auto creds = rce["credentials"];
          if (r.map(creds, rp + ".credentials")) {
            r.get(creds, "user", rp + ".credentials", spec.credentials.user, true);
            r.get(creds, "password", rp + ".credentials", spec.credentials.password, true);
          }
          svc.rce = spec;
        }
        h.host.services.push_back(svc);
      }
    }
    if (r.seq(x["pe_paths"], hp + ".pe_paths")) {
      for (const auto& pe : x["pe_paths"]) {
        const auto s = pe.as<std::string>();
        if (const auto m = vuln::parse_pe_method(s)) {
          h.host.pe_paths.insert(*m);
        } else {
          r.error(pe, hp + ".pe_paths", "unknown escalation path '" + s + "' (suid_binary, sudoers_script)");
        }
      }
    }
    hosts.push_back(std::move(h));
  }
}

void read_attacker(Reader& r, const YAML::Node& n, AttackerSection& a) {
  const std::string p = "attacker";
  if (!r.map(n, p, true)) return;
  r.known_keys(n, p, {"id", "node", "goal", "address_range", "ports", "credentials", "start_offset_ms", "timing"});
  auto& c = a.attacker;
  r.get(n, "id", p, c.id);
  r.get(n, "node", p, a.node, true);
  r.get(n, "start_offset_ms", p, a.start_offset_ms);

  const auto goal = n["goal"];
  if (r.map(goal, p + ".goal", true)) {
    const std::string gp = p + ".goal";
    r.known_keys(goal, gp, {"kind", "targets", "manipulation"});
    std::string kind;
    if (r.get(goal, "kind", gp, kind, true)) {
      if (kind == "dos") c.goal.kind = scada::EffectKind::Dos;
      else if (kind == "manipulate") c.goal.kind = scada::EffectKind::Manipulate;
      else r.error(goal["kind"], gp + ".kind", "unknown goal '" + kind + "' (dos, manipulate)");
    }
    if (r.seq(goal["targets"], gp + ".targets")) {
      c.goal.targets.clear();
      for (const auto& t : goal["targets"]) c.goal.targets.push_back(t.as<std::string>());
    }
    const auto manip = goal["manipulation"];
    if (r.map(manip, gp + ".manipulation")) {
      for (const auto& kv : manip) {
        const auto qname = kv.first.as<std::string>();
        const std::string mp = gp + ".manipulation." + qname;
        const auto q = grid::parse_quantity(qname);
        if (!q) {
          r.error(kv.first, mp, "unknown quantity");
          continue;
        }
        if (!r.map(kv.second, mp)) continue;
        r.known_keys(kv.second, mp, {"scale", "offset"});
        scada::AffineTransform t;
        r.get(kv.second, "scale", mp, t.scale);
        r.get(kv.second, "offset", mp, t.offset);
        c.goal.manipulation[*q] = t;
      }
    }
  }

  const auto range = n["address_range"];
  if (r.seq(range, p + ".address_range", true)) {
    for (const auto& x : range) {
      const auto s = x.as<std::string>();
      const auto expanded = expand_address_range(s);
      if (expanded.empty()) r.error(x, p + ".address_range", "malformed address range '" + s + "'");
      c.address_range.insert(c.address_range.end(), expanded.begin(), expanded.end());
    }
  }

  const auto ports = n["ports"];
  if (!ports.IsDefined() || ports.IsNull()) {
    r.error(n, p + ".ports", "missing required key");
  } else {
    std::vector<std::string> specs;
    if (ports.IsSequence()) {
      for (const auto& x : ports) specs.push_back(x.as<std::string>());
    } else {
      specs.push_back(ports.as<std::string>());
    }
    std::set<std::uint16_t> all;
    for (const auto& s : specs) {
      const auto list = expand_port_range(s);
      if (list.empty()) r.error(ports, p + ".ports", "malformed port range '" + s + "' (expected 1-65535)");
      all.insert(list.begin(), list.end());
    }
    c.ports.assign(all.begin(), all.end());
  }

  const auto creds = n["credentials"];
  if (r.map(creds, p + ".credentials")) {
    r.get(creds, "user", p + ".credentials", c.credentials.user, true);
    r.get(creds, "password", p + ".credentials", c.credentials.password, true);
  }

  const auto timing = n["timing"];
  if (r.map(timing, p + ".timing")) {
    const std::string tp = p + ".timing";
    r.known_keys(timing, tp,
                 {"probe_interval_ms", "probe_timeout_ms", "unreachable_after", "exchange_timeout_ms", "think_ms"});
    r.get(timing, "probe_interval_ms", tp, c.probe_interval_ms);
    r.get(timing, "probe_timeout_ms", tp, c.probe_timeout_ms);
    r.get(timing, "unreachable_after", tp, c.unreachable_after);
    r.get(timing, "exchange_timeout_ms", tp, c.exchange_timeout_ms);
    r.get(timing, "think_ms", tp, c.think_ms);
    if (c.probe_timeout_ms == 0) r.error(timing["probe_timeout_ms"], tp + ".probe_timeout_ms", "must be > 0");
    if (c.exchange_timeout_ms == 0) {
      r.error(timing["exchange_timeout_ms"], tp + ".exchange_timeout_ms", "must be > 0");
    }
  }
}

void read_capture(Reader& r, const YAML::Node& n, CaptureSection& c) {
  const std::string p = "capture";
  if (!r.map(n, p)) return;
  r.known_keys(n, p, {"balance_target", "balance_tolerance_pp", "label_manipulated_reports"});
  double target = 0.0;
  if (r.get(n, "balance_target", p, target)) {
    r.range(n, "balance_target", p, target, 0.0, 100.0);
    c.balance_target_pct = target;
  }
  if (r.get(n, "balance_tolerance_pp", p, c.balance_tolerance_pp)) {
    r.range(n, "balance_tolerance_pp", p, c.balance_tolerance_pp, 0.0, 100.0);
  }
  r.get(n, "label_manipulated_reports", p, c.labeling.label_manipulated_reports);
}

void read_ids(Reader& r, const YAML::Node& n, IdsSection& s) {
  const std::string p = "ids";
  if (!r.map(n, p)) return;
  r.known_keys(n, p, {"algorithms", "encoding", "threshold_quantile", "seed", "rf", "knn", "lof", "iforest"});
  if (r.seq(n["algorithms"], p + ".algorithms")) {
    s.algorithms.clear();
    for (const auto& a : n["algorithms"]) {
      const auto name = a.as<std::string>();
      if (const auto algo = ids::parse_algorithm(name)) {
        s.algorithms.push_back(*algo);
      } else {
        r.error(a, p + ".algorithms", "unknown algorithm '" + name + "' (rf, knn, lof, iforest)");
      }
    }
  }
  std::string enc;
  if (r.get(n, "encoding", p, enc)) {
    if (const auto e = capture::parse_encoding(enc)) {
      s.params.encoding = *e;
    } else {
      r.error(n["encoding"], p + ".encoding", "unknown encoding '" + enc + "' (categorical, one_hot)");
    }
  }
  double q = 0.99;
  if (r.get(n, "threshold_quantile", p, q)) {
    r.range(n, "threshold_quantile", p, q, 0.0, 1.0);
    s.params.lof.threshold_quantile = q;
    s.params.iforest.threshold_quantile = q;
  }
  std::uint64_t seed = 0;
  if (r.get(n, "seed", p, seed)) s.seed = seed;

  const auto rf = n["rf"];
  if (r.map(rf, p + ".rf")) {
    const std::string rp = p + ".rf";
    r.known_keys(rf, rp, {"trees", "max_depth", "bootstrap", "max_features", "min_samples_split"});
    if (r.get(rf, "trees", rp, s.params.rf.trees)) r.range(rf, "trees", rp, s.params.rf.trees, 1, 100000);
    if (r.get(rf, "max_depth", rp, s.params.rf.max_depth)) r.range(rf, "max_depth", rp, s.params.rf.max_depth, 0, 1000);
    r.get(rf, "bootstrap", rp, s.params.rf.bootstrap);
    if (r.get(rf, "max_features", rp, s.params.rf.max_features)) {
      r.range(rf, "max_features", rp, s.params.rf.max_features, 0, 100000);
    }
    if (r.get(rf, "min_samples_split", rp, s.params.rf.min_samples_split)) {
      r.range(rf, "min_samples_split", rp, s.params.rf.min_samples_split, 2, 1000000);
    }
  }
  const auto knn = n["knn"];
  if (r.map(knn, p + ".knn")) {
    r.known_keys(knn, p + ".knn", {"k"});
    if (r.get(knn, "k", p + ".knn", s.params.knn.k)) r.range(knn, "k", p + ".knn", s.params.knn.k, 1, 1000000);
  }
  const auto lof = n["lof"];
  if (r.map(lof, p + ".lof")) {
    r.known_keys(lof, p + ".lof", {"k"});
    if (r.get(lof, "k", p + ".lof", s.params.lof.k)) r.range(lof, "k", p + ".lof", s.params.lof.k, 1, 1000000);
  }
  const auto iso = n["iforest"];
  if (r.map(iso, p + ".iforest")) {
    const std::string ip = p + ".iforest";
    r.known_keys(iso, ip, {"trees", "subsample"});
    if (r.get(iso, "trees", ip, s.params.iforest.trees)) r.range(iso, "trees", ip, s.params.iforest.trees, 1, 100000);
    if (r.get(iso, "subsample", ip, s.params.iforest.subsample)) {
      r.range(iso, "subsample", ip, s.params.iforest.subsample, 1, 10000000);
    }
  }
}

void append_config_error(std::vector<std::string>& errors, const std::string& section, const ConfigError& e) {
  std::istringstream in(e.what());
  std::string line;
  bool any = false;
  bool first = true;
  while (std::getline(in, line)) {
    const bool header = first && !line.empty() && line.back() == ':';
    first = false;
    if (header) continue;
    const auto start = line.find_first_not_of(' ');
    if (start == std::string::npos) continue;
    errors.push_back(section + ": " + line.substr(start));
    any = true;
  }
  if (!any) errors.push_back(section + ": " + e.what());
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<std::string> errors)
    : ConfigError(join_errors(errors)), errors_(std::move(errors)) {}

const net::NodeSpec& ScenarioConfig::node(std::string_view id) const {
  const auto* n = ict.find_node(id);
  if (!n) throw ConfigError("unknown node '" + std::string(id) + "'");
  return *n;
}

const std::string& ScenarioConfig::address_of(std::string_view node_id) const { return node(node_id).address; }

ids::IdsParams ScenarioConfig::ids_params() const {
  ids::IdsParams p = ids.params;
  const std::uint64_t base = ids.seed.value_or(derive_seed(seed, "ids"));
  p.rf.seed = derive_seed(base, "rf");
  p.iforest.seed = derive_seed(base, "iforest");
  return p;
}

std::vector<std::string> validation_errors(const ScenarioConfig& c) {
  std::vector<std::string> errors;
  if (c.format_version != ScenarioConfig::kFormatVersion) {
    errors.push_back("format_version: unsupported version " + std::to_string(c.format_version) + " (expected " +
                     std::to_string(ScenarioConfig::kFormatVersion) + ")");
  }
  if (c.durations.attack_window == 0) errors.push_back("durations.attack_window: must be > 0");

  bool grid_ok = true;
  try {
    c.grid.model.validate();
  } catch (const ConfigError& e) {
    grid_ok = false;
    append_config_error(errors, "grid", e);
  }
  try {
    c.ict.validate();
  } catch (const ConfigError& e) {
    append_config_error(errors, "ict", e);
  }

  auto host_node = [&](const std::string& id, const std::string& where) -> const net::NodeSpec* {
    if (id.empty()) return nullptr;
    const auto* n = c.ict.find_node(id);
    if (!n) {
      errors.push_back(where + ": unknown node '" + id + "'");
    } else if (n->kind != net::NodeKind::Host) {
      errors.push_back(where + ": node '" + id + "' is not a host");
      return nullptr;
    }
    return n;
  };

  host_node(c.mtu.node, "scada.mtu.node");
  std::set<std::string> rtu_ids, rtu_nodes;
  for (std::size_t i = 0; i < c.rtus.size(); ++i) {
    const auto& r = c.rtus[i];
    const std::string where = "scada.rtus[" + std::to_string(i) + "]";
    if (!rtu_ids.insert(r.binding.rtu_id).second) errors.push_back(where + ": duplicate rtu id '" + r.binding.rtu_id + "'");
    if (!rtu_nodes.insert(r.node).second) errors.push_back(where + ": node '" + r.node + "' already hosts an rtu");
    if (r.node == c.mtu.node) errors.push_back(where + ": rtu and mtu share node '" + r.node + "'");
    host_node(r.node, where + ".node");
    if (r.binding.points.empty()) errors.push_back(where + ": rtu '" + r.binding.rtu_id + "' binds no points");
    if (grid_ok) {
      try {
        grid::validate_binding(c.grid.model, r.binding);
      } catch (const ConfigError& e) {
        append_config_error(errors, where, e);
      } catch (const std::invalid_argument& e) {
        errors.push_back(where + ": " + e.what());
      }
    }
  }

  std::set<std::string> host_nodes;
  for (std::size_t i = 0; i < c.hosts.size(); ++i) {
    const auto& h = c.hosts[i];
    const std::string where = "hosts[" + std::to_string(i) + "]";
    if (!host_nodes.insert(h.node).second) errors.push_back(where + ": node '" + h.node + "' configured twice");
    host_node(h.node, where + ".node");
    try {
      h.host.validate();
    } catch (const ConfigError& e) {
      append_config_error(errors, where, e);
    }
  }

  const auto& a = c.attacker;
  const auto* an = host_node(a.node, "attacker.node");
  if (an && (rtu_nodes.contains(a.node) || a.node == c.mtu.node)) {
    errors.push_back("attacker.node: node '" + a.node + "' is already a SCADA device");
  }
  if (a.attacker.id.empty()) errors.push_back("attacker.id: must not be empty");
  if (a.attacker.id == c.mtu.node || rtu_ids.contains(a.attacker.id)) {
    errors.push_back("attacker.id: '" + a.attacker.id + "' collides with a SCADA device id");
  }
  try {
    a.attacker.goal.validate();
  } catch (const ConfigError& e) {
    append_config_error(errors, "attacker.goal", e);
  }
  for (const auto& t : a.attacker.goal.targets) {
    if (t != "*" && !c.ict.find_address(t)) errors.push_back("attacker.goal.targets: unknown address '" + t + "'");
  }
  if (a.attacker.address_range.empty()) errors.push_back("attacker.address_range: selects no address");
  if (a.attacker.ports.empty()) errors.push_back("attacker.ports: selects no port");
  if (c.ict.span && c.ict.span->monitor_node_id == a.node) {
    errors.push_back("attacker.node: '" + a.node + "' is the span monitor");
  }
  if (c.ids.algorithms.empty()) errors.push_back("ids.algorithms: selects no algorithm");
  return errors;
}

void validate(const ScenarioConfig& c) {
  auto errors = validation_errors(c);
  if (!errors.empty()) throw ConfigErrors(std::move(errors));
}

ScenarioConfig parse_config(const std::string& yaml_text, const std::string& origin,
                            const std::filesystem::path& base_dir) {
  YAML::Node doc;
  try {
    doc = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigErrors({origin + ": " + e.what()});
  }
  std::vector<std::filesystem::path> chain;
  doc = load_with_extends(doc, base_dir, chain);
  if (!doc.IsMap()) throw ConfigErrors({origin + ": top level must be a mapping"});

  Reader r;
  r.known_keys(doc, "", {"format_version", "name", "seed", "durations", "grid", "ict", "scada", "hosts", "attacker",
                         "capture", "ids"});
  ScenarioConfig c;
  r.get(doc, "format_version", "", c.format_version, true);
  r.get(doc, "name", "", c.name);
  r.get(doc, "seed", "", c.seed);
  const auto d = doc["durations"];
  if (r.map(d, "durations", true)) {
    r.known_keys(d, "durations", {"warmup_steps", "attack_window", "post_steps", "attack_jitter_steps"});
    r.get(d, "warmup_steps", "durations", c.durations.warmup_steps, true);
    r.get(d, "attack_window", "durations", c.durations.attack_window, true);
    r.get(d, "post_steps", "durations", c.durations.post_steps);
    r.get(d, "attack_jitter_steps", "durations", c.durations.attack_jitter_steps);
  }
  read_grid(r, doc["grid"], c.grid);
  read_ict(r, doc["ict"], c.ict);
  read_scada(r, doc["scada"], c.mtu, c.rtus);
  read_hosts(r, doc["hosts"], c.hosts);
  read_attacker(r, doc["attacker"], c.attacker);
  read_capture(r, doc["capture"], c.capture);
  read_ids(r, doc["ids"], c.ids);

  auto errors = std::move(r.errors);
  for (auto& e : errors) {
    if (e.starts_with(".")) e.erase(0, 1);
  }
  for (auto& e : validation_errors(c)) errors.push_back(std::move(e));
  if (!errors.empty()) {
    for (auto& e : errors) e = origin + ": " + e;
    throw ConfigErrors(std::move(errors));
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigErrors({path.string() + ": cannot open scenario file"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), path.parent_path());
}

std::filesystem::path scenario_dir() { return COSIM_SCENARIO_DIR; }

std::filesystem::path resolve_scenario(std::string_view id_or_path) {
  if (id_or_path.size() == 1 && id_or_path[0] >= '1' && id_or_path[0] <= '6') {
    return scenario_dir() / ("scenario" + std::string(id_or_path) + ".yaml");
  }
  if (id_or_path == "reference") return scenario_dir() / "reference.yaml";
  return std::filesystem::path(id_or_path);
}

namespace {

bool parse_u32(std::string_view s, std::uint32_t& v) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::vector<std::string> expand_address_range(std::string_view spec) {
  const auto dash = spec.find('-');
  if (dash == std::string_view::npos) {
    if (spec.empty()) return {};
    return {std::string(spec)};
  }
  const auto left = spec.substr(0, dash);
  const auto dot = left.rfind('.');
  if (dot == std::string_view::npos) return {};
  std::uint32_t lo = 0, hi = 0;
  if (!parse_u32(left.substr(dot + 1), lo) || !parse_u32(spec.substr(dash + 1), hi)) return {};
  if (lo > hi || hi > 255) return {};
  std::vector<std::string> out;
  const std::string prefix(left.substr(0, dot + 1));
  for (std::uint32_t i = lo; i <= hi; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::uint16_t> expand_port_range(std::string_view spec) {
  std::uint32_t lo = 0, hi = 0;
  const auto dash = spec.find('-');
  if (dash == std::string_view::npos) {
    if (!parse_u32(spec, lo)) return {};
    hi = lo;
  } else if (!parse_u32(spec.substr(0, dash), lo) || !parse_u32(spec.substr(dash + 1), hi)) {
    return {};
  }
  if (lo < 1 || hi > 65535 || lo > hi) return {};
  std::vector<std::uint16_t> out;
  for (std::uint32_t p = lo; p <= hi; ++p) out.push_back(static_cast<std::uint16_t>(p));
  return out;
}

}  // namespace cosim::config
