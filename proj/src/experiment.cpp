#include "cosim/experiment.hpp"

#include <algorithm>
#include <cstdio>

#include "cosim/config.hpp"
#include "cosim/scenario.hpp"

namespace cosim::experiment {

std::string warmup_name(const std::string& scenario) { return scenario + ":warmup"; }
std::string remainder_name(const std::string& scenario) { return scenario + ":remainder"; }

double ProtocolResult::f1_of(ids::Algorithm a, const std::string& scenario) const {
  for (const auto& r : f1) {
    if (r.algorithm == a && r.scenario == scenario) return r.f1;
  }
  throw std::out_of_range("no F1 row for " + std::string(ids::to_string(a)) + " on scenario " + scenario);
}

double ProtocolResult::mean_f1(const std::vector<std::string>& scenarios) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : f1) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) != scenarios.end()) {
      sum += r.f1;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::string ProtocolResult::f1_csv() const {
  std::string out(kF1Header);
  out += '\n';
  char buf[64];
  for (const auto& r : f1) {
    std::snprintf(buf, sizeof buf, "%.6f", r.f1);
    out += std::string(ids::to_string(r.algorithm)) + ',' + r.scenario + ',' + buf + ',' + std::to_string(r.cells) +
           '\n';
  }
  return out;
}

nlohmann::json ProtocolResult::to_json() const {
  nlohmann::json j = report.to_json();
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : f1) {
    rows.push_back({{"algorithm", std::string(ids::to_string(r.algorithm))},
                    {"scenario", r.scenario},
                    {"f1", r.f1},
                    {"cells", r.cells}});
  }
  j["f1"] = rows;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : self_checks) {
    checks.push_back({{"algorithm", std::string(ids::to_string(c.algorithm))},
                      {"scenario", c.scenario},
                      {"self_f1", c.self_f1},
                      {"best_held_out_f1", c.best_held_out_f1},
                      {"holds", c.holds()}});
  }
  j["self_checks"] = checks;
  return j;
}

ProtocolResult run_protocol(const std::vector<ScenarioData>& scenarios, const std::vector<ids::Algorithm>& algorithms,
                            const ids::IdsParams& params) {
  ProtocolResult out;
  for (const auto algo : algorithms) {
    if (ids::is_supervised(algo)) {
      std::map<std::string, std::pair<double, std::size_t>> per_test;
      for (const auto& train : scenarios) {
        const auto model = ids::train(algo, train.dataset.records, params);
        const auto self = ids::evaluate(model.predict(train.dataset.records), ids::labels_of(train.dataset.records));
        out.report.cells.push_back({algo, train.id, train.id, self});
        SelfCheck check{algo, train.id, self.f1, 0.0};
        for (const auto& test : scenarios) {
          if (test.id == train.id || test.family != train.family) continue;
          const auto r = ids::evaluate(model.predict(test.dataset.records), ids::labels_of(test.dataset.records));
          out.report.cells.push_back({algo, train.id, test.id, r});
          check.best_held_out_f1 = std::max(check.best_held_out_f1, r.f1);
          per_test[test.id].first += r.f1;
          per_test[test.id].second += 1;
        }
        out.self_checks.push_back(check);
      }
      for (const auto& s : scenarios) {
        const auto it = per_test.find(s.id);
        if (it == per_test.end()) continue;
        out.f1.push_back({algo, s.id, it->second.first / static_cast<double>(it->second.second), it->second.second});
      }
    } else {
      for (const auto& s : scenarios) {
        const auto train = capture::slice(s.dataset, s.dataset.split.train);
        const auto test = capture::slice(s.dataset, s.dataset.split.test);
        const auto model = ids::train(algo, train, params);
        const auto r = ids::evaluate(model.predict(test), ids::labels_of(test));
        out.report.cells.push_back({algo, warmup_name(s.id), remainder_name(s.id), r});
        out.f1.push_back({algo, s.id, r.f1, 1});
      }
    }
  }
  return out;
}

ProtocolResult run_reference_experiment(std::uint64_t seed, const std::vector<ids::Algorithm>& algorithms,
                                        std::vector<ScenarioData>* datasets) {
  std::vector<ScenarioData> scenarios;
  ids::IdsParams params;
  for (int id = 1; id <= 6; ++id) {
    auto cfg = config::load_config(config::resolve_scenario(std::to_string(id)));
    cfg.seed = seed;
    if (id == 1) params = cfg.ids_params();
    auto run = sim::run_scenario(cfg);
    sim::check_calibration(run);
    const auto family = cfg.attacker.attacker.goal.kind == scada::EffectKind::Dos ? "dos" : "manipulate";
    scenarios.push_back({std::to_string(id), family, std::move(run.dataset)});
  }
  auto result = run_protocol(scenarios, algorithms, params);
  if (datasets) *datasets = std::move(scenarios);
  return result;
}

void write_report(const ProtocolResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  sim::write_file(out_dir / "report.json", result.to_json().dump(2) + "\n");
  sim::write_file(out_dir / "report.txt", result.report.table());
  sim::write_file(out_dir / "f1.csv", result.f1_csv());
}

}  // namespace cosim::experiment
