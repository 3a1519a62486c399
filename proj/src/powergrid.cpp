#include "cosim/powergrid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace cosim::grid {

namespace {

using cd = std::complex<double>;

double z_base_ohm(double kv, double s_base_kva) { return kv * kv * 1000.0 / s_base_kva; }

// Stateless 64-bit hash used for random-access noise.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double hash_unit(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t h = mix(mix(mix(a) ^ b) ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

std::optional<std::size_t> GridModel::bus_index(std::string_view id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  return std::nullopt;
}

void GridModel::validate() const {
  std::vector<std::string> errors;
  std::set<std::string> ids;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) errors.push_back("bus '" + b.id + "' defined twice");
    if (!(b.nominal_kv > 0.0)) errors.push_back("bus '" + b.id + "': nominal voltage must be > 0");
  }
  const auto hv = bus_index(transformer.hv_bus);
  const auto lv = bus_index(transformer.lv_bus);
  if (!hv) errors.push_back("transformer '" + transformer.id + "': unknown hv bus '" + transformer.hv_bus + "'");
  if (!lv) errors.push_back("transformer '" + transformer.id + "': unknown lv bus '" + transformer.lv_bus + "'");
  if (hv && lv && *hv == *lv) errors.push_back("transformer '" + transformer.id + "': hv and lv bus coincide");
  if (!(transformer.rating_kva > 0.0)) errors.push_back("transformer '" + transformer.id + "': rating must be > 0");
  if (transformer.r_ohm < 0.0 || transformer.x_ohm < 0.0) {
    errors.push_back("transformer '" + transformer.id + "': impedance must be non-negative");
  }

  for (const auto& l : lines) {
    const auto f = bus_index(l.from_bus);
    const auto t = bus_index(l.to_bus);
    if (!f) errors.push_back("line '" + l.id + "': unknown from bus '" + l.from_bus + "'");
    if (!t) errors.push_back("line '" + l.id + "': unknown to bus '" + l.to_bus + "'");
    if (f && t && *f == *t) errors.push_back("line '" + l.id + "': self loop");
    if (f && t && buses[*f].nominal_kv != buses[*t].nominal_kv) {
      errors.push_back("line '" + l.id + "': endpoints at different nominal voltages");
    }
    if (l.r_ohm < 0.0 || l.x_ohm < 0.0) errors.push_back("line '" + l.id + "': impedance must be non-negative");
    if (!(l.rating_kva > 0.0)) errors.push_back("line '" + l.id + "': rating must be > 0");
  }
  for (const auto& ld : loads) {
    if (!bus_index(ld.bus)) errors.push_back("load '" + ld.id + "': unknown bus '" + ld.bus + "'");
  }
  for (const auto& d : ders) {
    if (!bus_index(d.bus)) errors.push_back("der '" + d.id + "': unknown bus '" + d.bus + "'");
  }

  if (buses.size() >= 2 && lines.size() + 1 != buses.size() - 1) {
    errors.push_back("grid is not radial: " + std::to_string(buses.size()) + " buses need " +
                     std::to_string(buses.size() - 2) + " lines plus the transformer, found " +
                     std::to_string(lines.size()));
  } else if (errors.empty()) {
    {
      // Connectivity from the slack bus over transformer + lines.
      std::vector<std::vector<std::size_t>> adj(buses.size());
      adj[*hv].push_back(*lv);
      adj[*lv].push_back(*hv);
      for (const auto& l : lines) {
        const auto f = *bus_index(l.from_bus);
        const auto t = *bus_index(l.to_bus);
        adj[f].push_back(t);
        adj[t].push_back(f);
      }
      std::vector<bool> seen(buses.size(), false);
      std::vector<std::size_t> stack{*hv};
      seen[*hv] = true;
      while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto v : adj[u]) {
          if (!seen[v]) {
            seen[v] = true;
            stack.push_back(v);
          }
        }
      }
      for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!seen[i]) errors.push_back("bus '" + buses[i].id + "' is disconnected from the slack bus");
      }
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid grid model:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

const BusState* PowerFlowSolution::find_bus(std::string_view id) const {
  for (const auto& b : buses) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

const BranchFlow* PowerFlowSolution::find_line(std::string_view id) const {
  for (const auto& l : lines) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

RadialFeeder::RadialFeeder(GridModel grid) : grid_(std::move(grid)) {
  grid_.validate();
  const double s_base = grid_.transformer.rating_kva;
  slack_ = *grid_.bus_index(grid_.transformer.hv_bus);

  struct Edge {
    std::size_t other;
    cd z;
    double rating;
    std::ptrdiff_t line;
  };
  std::vector<std::vector<Edge>> adj(grid_.buses.size());
  {
    const auto lv = *grid_.bus_index(grid_.transformer.lv_bus);
    const double zb = z_base_ohm(grid_.buses[lv].nominal_kv, s_base);
    const cd z{grid_.transformer.r_ohm / zb, grid_.transformer.x_ohm / zb};
    adj[slack_].push_back({lv, z, grid_.transformer.rating_kva, -1});
    adj[lv].push_back({slack_, z, grid_.transformer.rating_kva, -1});
  }
  for (std::size_t i = 0; i < grid_.lines.size(); ++i) {
    const auto& l = grid_.lines[i];
    const auto f = *grid_.bus_index(l.from_bus);
    const auto t = *grid_.bus_index(l.to_bus);
    const double zb = z_base_ohm(grid_.buses[f].nominal_kv, s_base);
    const cd z{l.r_ohm / zb, l.x_ohm / zb};
    const auto idx = static_cast<std::ptrdiff_t>(i);
    adj[f].push_back({t, z, l.rating_kva, idx});
    adj[t].push_back({f, z, l.rating_kva, idx});
  }

  std::vector<bool> seen(grid_.buses.size(), false);
  std::vector<std::size_t> frontier{slack_};
  seen[slack_] = true;
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    const auto u = frontier[head];
    for (const auto& e : adj[u]) {
      if (seen[e.other]) continue;
      seen[e.other] = true;
      frontier.push_back(e.other);
      branches_.push_back(Branch{u, e.other, e.z, e.rating, e.line});
    }
  }
}

PowerFlowSolution RadialFeeder::solve(std::span<const double> load_scaling,
                                      std::span<const double> der_scaling) const {
  const std::size_t n = grid_.buses.size();
  const double s_base = s_base_kva();
  if (!load_scaling.empty() && load_scaling.size() != grid_.loads.size()) {
    throw std::invalid_argument("load scaling has " + std::to_string(load_scaling.size()) +
                                " entries for " + std::to_string(grid_.loads.size()) + " loads");
  }
  if (!der_scaling.empty() && der_scaling.size() != grid_.ders.size()) {
    throw std::invalid_argument("der scaling size mismatch");
  }

  std::vector<cd> s_net(n, cd{0.0, 0.0});
  for (std::size_t i = 0; i < grid_.loads.size(); ++i) {
    const double f = load_scaling.empty() ? 1.0 : load_scaling[i];
    if (!std::isfinite(f) || f < 0.0) throw std::invalid_argument("load scaling must be finite and >= 0");
    const auto& ld = grid_.loads[i];
    s_net[*grid_.bus_index(ld.bus)] += cd{ld.p_kw * f, ld.q_kvar * f} / s_base;
  }
  for (std::size_t i = 0; i < grid_.ders.size(); ++i) {
    const double f = der_scaling.empty() ? 1.0 : der_scaling[i];
    const auto& d = grid_.ders[i];
    s_net[*grid_.bus_index(d.bus)] -= cd{d.p_kw * f, 0.0} / s_base;
  }

  std::vector<cd> v(n, cd{1.0, 0.0});
  std::vector<cd> acc(n);
  std::vector<cd> j_branch(branches_.size());

  PowerFlowSolution sol;
  for (int it = 1; it <= kMaxSweepIterations; ++it) {
    for (std::size_t b = 0; b < n; ++b) acc[b] = std::conj(s_net[b] / v[b]);
    for (std::size_t k = branches_.size(); k-- > 0;) {
      const auto& br = branches_[k];
      j_branch[k] = acc[br.to];
      acc[br.from] += acc[br.to];
    }
    double max_change = 0.0;
    for (std::size_t k = 0; k < branches_.size(); ++k) {
      const auto& br = branches_[k];
      const cd updated = v[br.from] - br.z_pu * j_branch[k];
      max_change = std::max(max_change, std::abs(updated - v[br.to]));
      v[br.to] = updated;
    }
    sol.iterations = it;
    if (max_change < kSweepTolerancePu) {
      sol.converged = true;
      break;
    }
  }

  // Branch currents consistent with the final voltages' load currents.
  for (std::size_t b = 0; b < n; ++b) acc[b] = std::conj(s_net[b] / v[b]);
  for (std::size_t k = branches_.size(); k-- > 0;) {
    const auto& br = branches_[k];
    j_branch[k] = acc[br.to];
    acc[br.from] += acc[br.to];
  }

  sol.buses.reserve(n);
  for (std::size_t b = 0; b < n; ++b) {
    sol.buses.push_back(BusState{grid_.buses[b].id, std::abs(v[b]), std::arg(v[b])});
  }
  sol.lines.resize(grid_.lines.size());
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const auto& br = branches_[k];
    const cd s = v[br.from] * std::conj(j_branch[k]) * s_base;
    BranchFlow flow{"", s.real(), s.imag(), std::abs(s) / br.rating_kva * 100.0};
    if (br.line < 0) {
      flow.id = grid_.transformer.id;
      sol.transformer = flow;
    } else {
      flow.id = grid_.lines[static_cast<std::size_t>(br.line)].id;
      sol.lines[static_cast<std::size_t>(br.line)] = flow;
    }
  }
  return sol;
}

PowerFlowSolution solve_power_flow(const GridModel& grid, std::span<const double> load_scaling,
                                   std::span<const double> der_scaling) {
  return RadialFeeder(grid).solve(load_scaling, der_scaling);
}

std::vector<double> LoadProfile::sample(std::uint64_t step) const {
  std::vector<double> out(load_count);
  const double day = static_cast<double>(std::max<std::uint64_t>(day_length_steps, 1));
  const double t = static_cast<double>(step % std::max<std::uint64_t>(day_length_steps, 1)) / day;
  for (std::size_t i = 0; i < load_count; ++i) {
    // Per-load phase shift of up to 1/12 day keeps loads correlated but not identical.
    const double phase = hash_unit(seed, 0xA5A5ULL, i) / 12.0;
    const double base = 0.85 + 0.45 * std::sin(2.0 * std::numbers::pi * (t + phase));
    const double noise = noise_amplitude * (2.0 * hash_unit(seed, step + 1, i) - 1.0);
    out[i] = std::clamp(base + noise, kMinScale, kMaxScale);
  }
  return out;
}

std::vector<double> sample_load_profile(const LoadProfile& profile, std::uint64_t step) {
  return profile.sample(step);
}

std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::LoadingPercent: return "loading_percent";
    case Quantity::PKw: return "P_kW";
    case Quantity::QKvar: return "Q_kvar";
    case Quantity::VPu: return "V_pu";
  }
  return "?";
}

std::optional<Quantity> parse_quantity(std::string_view s) {
  if (s == "loading_percent" || s == "transformer_loading_percent") return Quantity::LoadingPercent;
  if (s == "P_kW") return Quantity::PKw;
  if (s == "Q_kvar") return Quantity::QKvar;
  if (s == "V_pu") return Quantity::VPu;
  return std::nullopt;
}

void validate_binding(const GridModel& grid, const RtuBinding& binding) {
  std::vector<std::string> errors;
  std::set<std::string> points;
  for (const auto& p : binding.points) {
    if (!points.insert(p.point_id).second) {
      errors.push_back("rtu '" + binding.rtu_id + "': point '" + p.point_id + "' bound twice");
    }
    const bool is_trafo = p.element == grid.transformer.id;
    const bool is_line = std::any_of(grid.lines.begin(), grid.lines.end(),
                                     [&](const Line& l) { return l.id == p.element; });
    const bool is_bus = grid.bus_index(p.element).has_value();
    if (!is_trafo && !is_line && !is_bus) {
      errors.push_back("rtu '" + binding.rtu_id + "': point '" + p.point_id +
                       "' references unknown grid element '" + p.element + "'");
      continue;
    }
    const bool wants_voltage = p.quantity == Quantity::VPu;
    if (wants_voltage != is_bus) {
      errors.push_back("rtu '" + binding.rtu_id + "': point '" + p.point_id + "' asks for " +
                       std::string(to_string(p.quantity)) + " on element '" + p.element +
                       "' which does not provide it");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid rtu binding:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

std::vector<Measurement> measurements_for(const RtuBinding& binding,
                                          const PowerFlowSolution& solution, SimTime at) {
  if (!solution.converged) {
    throw std::invalid_argument("measurements requested from a non-converged power flow");
  }
  std::vector<Measurement> out;
  out.reserve(binding.points.size());
  for (const auto& p : binding.points) {
    Measurement m{binding.rtu_id, p.point_id, p.quantity, 0.0, at};
    if (p.quantity == Quantity::VPu) {
      const auto* bus = solution.find_bus(p.element);
      if (!bus) throw ConfigError("unknown bus '" + p.element + "' in binding of " + binding.rtu_id);
      m.value = bus->vm_pu;
    } else {
      const BranchFlow* flow = p.element == solution.transformer.id ? &solution.transformer
                                                                   : solution.find_line(p.element);
      if (!flow) throw ConfigError("unknown branch '" + p.element + "' in binding of " + binding.rtu_id);
      switch (p.quantity) {
        case Quantity::LoadingPercent: m.value = flow->loading_percent; break;
        case Quantity::PKw: m.value = flow->p_kw; break;
        case Quantity::QKvar: m.value = flow->q_kvar; break;
        case Quantity::VPu: break;
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace cosim::grid
