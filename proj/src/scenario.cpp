#include "cosim/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "cosim/powergrid.hpp"
#include "cosim/vulnhost.hpp"

namespace cosim::sim {

namespace {

std::string format_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

CalibrationError::CalibrationError(const std::string& scenario, double achieved_pct, double target_pct,
                                   double tolerance_pp)
    : std::runtime_error("scenario " + scenario + ": attack share " + format_pct(achieved_pct) +
                         "% is off the target " + format_pct(target_pct) + "% by more than " +
                         format_pct(tolerance_pp) + " pp"),
      achieved_(achieved_pct),
      target_(target_pct) {}

bool ScenarioRun::calibrated() const {
  if (!balance_target_pct) return true;
  return std::abs(dataset.balance.attack_pct - *balance_target_pct) <= balance_tolerance_pp;
}

ScenarioRun run_scenario(const config::ScenarioConfig& cfg, const RunOptions& options) {
  config::validate(cfg);
  const std::uint64_t seed = options.seed.value_or(cfg.seed);

  ScenarioRun run;
  run.scenario = cfg.name;
  run.seed = seed;
  run.balance_target_pct = cfg.capture.balance_target_pct;
  run.balance_tolerance_pp = cfg.capture.balance_tolerance_pp;

  Scheduler sched(seed);
  sched.enable_trace(options.trace);
  const grid::RadialFeeder feeder(cfg.grid.model);
  grid::LoadProfile profile;
  profile.seed = sched.seed_for("load_profile");
  profile.day_length_steps = cfg.grid.day_length_steps;
  profile.noise_amplitude = cfg.grid.noise_amplitude;
  profile.load_count = cfg.grid.model.loads.size();

  net::Network network(sched, cfg.ict);
  network.record_transits(options.record_transits);
  capture::Collector collector;
  if (cfg.ict.span) network.set_monitor([&collector](const net::Packet& p) { collector.on_mirror(p); });

  const std::string& mtu_address = cfg.address_of(cfg.mtu.node);
  scada::Mtu mtu(cfg.mtu.node, mtu_address, cfg.mtu.stale_after_cycles);

  std::vector<std::unique_ptr<scada::Rtu>> rtus;
  std::map<std::string, scada::Rtu*> rtu_by_node;
  for (const auto& r : cfg.rtus) {
    rtus.push_back(std::make_unique<scada::Rtu>(r.binding.rtu_id, cfg.address_of(r.node), mtu_address, r.binding));
    rtu_by_node[r.node] = rtus.back().get();
    run.rtu_address[r.binding.rtu_id] = cfg.address_of(r.node);
  }

  // Every host but the attacker answers connection attempts; unconfigured
  // hosts expose no services and refuse everything.
  std::map<std::string, std::unique_ptr<vuln::VulnerableHost>> hosts;
  for (const auto& n : cfg.ict.nodes) {
    if (n.kind != net::NodeKind::Host || n.id == cfg.attacker.node) continue;
    vuln::HostConfig hc;
    hc.id = n.id;
    for (const auto& h : cfg.hosts) {
      if (h.node == n.id) hc = h.host;
    }
    auto host = std::make_unique<vuln::VulnerableHost>(hc);
    if (const auto it = rtu_by_node.find(n.id); it != rtu_by_node.end()) {
      scada::Rtu* rtu = it->second;
      host->set_compromise_hook([rtu, &sched](const scada::CompromiseEffect& effect, bool root) {
        auto applied = effect;
        applied.active_from = sched.now();
        return rtu->apply_compromise(applied, root);
      });
    }
    hosts[n.id] = std::move(host);
  }

  for (const auto& [node_id, host_ptr] : hosts) {
    vuln::VulnerableHost* host = host_ptr.get();
    scada::Rtu* rtu = rtu_by_node.contains(node_id) ? rtu_by_node[node_id] : nullptr;
    const bool is_mtu = node_id == cfg.mtu.node;
    network.attach(cfg.address_of(node_id), [&, host, rtu, is_mtu](const net::Packet& p) {
      if (const auto* frame = std::any_cast<scada::TelemetryFrame>(&p.payload)) {
        if (is_mtu) {
          if (auto ack = mtu.on_packet(p, sched.now())) network.send(std::move(*ack));
        } else if (rtu && frame->kind == scada::FrameKind::Ack && rtu->service_running(sched.now())) {
          rtu->handle_ack(*frame);
        }
        return;
      }
      if (auto resp = host->on_packet(p)) network.send(std::move(*resp));
    });
  }

  const auto& d = cfg.durations;
  const std::uint64_t jitter =
      d.attack_jitter_steps == 0 ? 0 : sched.seed_for("attack_jitter") % (d.attack_jitter_steps + 1);
  run.attack_start = SimTime::at_step(d.warmup_steps + jitter).plus_ms(cfg.attacker.start_offset_ms);
  run.attack_window_end = SimTime::at_step(d.warmup_steps + jitter + d.attack_window);
  run.total_steps = d.warmup_steps + d.attack_jitter_steps + d.attack_window + d.post_steps;
  run.end = SimTime::from_ms(run.total_steps * SimTime::kStepMs - 1);

  attack::AttackerConfig ac = cfg.attacker.attacker;
  ac.address = cfg.address_of(cfg.attacker.node);
  ac.start_at = run.attack_start;
  attack::Attacker attacker(sched, network, ac);
  attacker.start();

  std::function<void(std::uint64_t)> grid_step = [&](std::uint64_t step) {
    const auto now = sched.now();
    const auto scaling = profile.sample(step);
    const auto solution = feeder.solve(scaling);
    if (!solution.converged) ++run.grid_nonconverged_steps;
    for (auto& rtu : rtus) {
      rtu->update_measurements(solution, now);
      if (auto pkt = rtu->report_cycle(now)) rtu->note_sent(network.send(std::move(*pkt)));
    }
    mtu.check_staleness(now);
    if (step + 1 < run.total_steps) {
      sched.schedule(SimTime::at_step(step + 1), "grid", "power_flow", [&grid_step, step] { grid_step(step + 1); });
    }
  };
  sched.schedule(SimTime::at_step(0), "grid", "power_flow", [&grid_step] { grid_step(0); });

  run.engine = sched.run(run.end);

  run.captured = collector.collect();
  run.action_log = attacker.state().action_log;
  run.action_log_csv = attacker.action_log_csv();
  run.final_stage = attacker.state().stage;
  for (auto s : {attack::Stage::S1Scan, attack::Stage::S2Rce, attack::Stage::S3Pe, attack::Stage::S4Impact,
                 attack::Stage::Done, attack::Stage::Failed}) {
    if (const auto t = attacker.stage_entered(s)) run.stage_entered[s] = *t;
  }
  run.impacts = attacker.impacts();
  for (const auto& rtu : rtus) {
    run.compromise_log.insert(run.compromise_log.end(), rtu->compromise_log().begin(), rtu->compromise_log().end());
    run.reports[rtu->id()] = rtu->reports();
  }
  run.network = network.stats();
  run.transits = network.transits();
  if (options.trace) run.trace = sched.trace();

  // Join MTU rows with what the station actually measured for that report.
  std::map<std::pair<std::string, std::uint64_t>, const scada::ReportRecord*> by_seq;
  for (const auto& [id, reports] : run.reports) {
    for (const auto& r : reports) by_seq[{id, r.sequence_no}] = &r;
  }
  for (const auto& row : mtu.rows()) {
    ObservedPoint o{row.step, row.station, row.point_id, row.quantity, row.value, row.value, row.stale, false};
    if (const auto it = by_seq.find({row.station, row.sequence_no}); it != by_seq.end()) {
      o.manipulated = it->second->manipulated;
      for (const auto& tp : it->second->true_points) {
        if (tp.point_id == row.point_id) o.true_value = tp.value;
      }
    }
    run.observed.push_back(std::move(o));
  }

  const auto labeled = capture::label(run.captured, run.action_log, run.compromise_log, cfg.capture.labeling);
  run.dataset = capture::make_dataset(cfg.name, seed, labeled);
  return run;
}

void check_calibration(const ScenarioRun& run) {
  if (!run.calibrated()) {
    throw CalibrationError(run.scenario, run.dataset.balance.attack_pct, *run.balance_target_pct,
                           run.balance_tolerance_pp);
  }
}

capture::LabeledDataset make_scenario(int scenario_id, std::uint64_t seed) {
  if (scenario_id < 1 || scenario_id > 6) {
    throw std::invalid_argument("scenario id " + std::to_string(scenario_id) + " is not in 1..6");
  }
  const auto cfg = config::load_config(config::resolve_scenario(std::to_string(scenario_id)));
  RunOptions opt;
  opt.seed = seed;
  auto run = run_scenario(cfg, opt);
  check_calibration(run);
  return std::move(run.dataset);
}

std::string ScenarioRun::measurement_csv() const {
  std::string out(kMeasurementHeader);
  out += '\n';
  for (const auto& o : observed) {
    out += std::to_string(o.step) + ',' + o.station + ',' + o.point_id + ',' + std::string(grid::to_string(o.quantity)) +
           ',' + scada::format_value(o.received) + ',' + scada::format_value(o.true_value) + ',' +
           (o.manipulated ? "1" : "0") + ',' + (o.stale ? "1" : "0") + '\n';
  }
  return out;
}

nlohmann::json ScenarioRun::summary() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["total_steps"] = total_steps;
  j["attack_start_ms"] = attack_start.to_ms();
  j["attack_window_end_ms"] = attack_window_end.to_ms();
  j["end_ms"] = end.to_ms();
  j["events_processed"] = engine.events_processed;

  std::uint64_t attacks = 0;
  for (const auto& r : dataset.records) attacks += r.label == capture::Label::Attack ? 1 : 0;
  j["records"] = dataset.records.size();
  j["attack_records"] = attacks;
  j["normal_records"] = dataset.records.size() - attacks;
  j["attack_pct"] = dataset.balance.attack_pct;
  j["normal_pct"] = dataset.balance.normal_pct;
  if (balance_target_pct) {
    j["balance_target_pct"] = *balance_target_pct;
    j["balance_tolerance_pp"] = balance_tolerance_pp;
  }
  j["calibrated"] = calibrated();
  j["split"] = {{"train", {dataset.split.train.front().begin, dataset.split.train.front().end}},
                {"test", {dataset.split.test.front().begin, dataset.split.test.front().end}}};

  j["final_stage"] = std::string(attack::to_string(final_stage));
  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [s, t] : stage_entered) stages[std::string(attack::to_string(s))] = t.to_ms();
  j["stage_entered_ms"] = stages;
  nlohmann::json impacts_json = nlohmann::json::array();
  for (const auto& i : impacts) {
    impacts_json.push_back({{"address", i.address},
                            {"kind", std::string(scada::to_string(i.kind))},
                            {"activated_ms", i.activated_at.to_ms()}});
  }
  j["impacts"] = impacts_json;
  j["grid_nonconverged_steps"] = grid_nonconverged_steps;
  j["network"] = {{"sent", network.sent},
                  {"delivered", network.delivered},
                  {"dropped_link_down", network.dropped_link_down},
                  {"dropped_loss", network.dropped_loss},
                  {"dropped_firewall", network.dropped_firewall},
                  {"span_forwarded", network.span_forwarded},
                  {"mirrored", network.mirrored}};
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_artifacts(const ScenarioRun& run, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  capture::export_csv(run.dataset, out_dir / "dataset.csv");
  write_file(out_dir / "actions.csv", run.action_log_csv);
  write_file(out_dir / "measurements.csv", run.measurement_csv());
  write_file(out_dir / "summary.json", run.summary().dump(2) + "\n");
  if (!run.trace.empty()) {
    write_file(out_dir / "trace.csv", std::string(Scheduler::kTraceHeader) + "\n" + run.trace);
  }
}

}  // namespace cosim::sim
