#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cosim/capture.hpp"
#include "cosim/ids.hpp"

namespace cosim::experiment {

/// A dataset tagged with its attack family. Supervised models only cross
/// scenarios within one family.
struct ScenarioData {
  std::string id;
  std::string family;  // "dos" or "manipulate"
  capture::LabeledDataset dataset;
};

struct F1Row {
  ids::Algorithm algorithm = ids::Algorithm::RandomForest;
  std::string scenario;
  double f1 = 0.0;
  std::size_t cells = 0;
};

/// A supervised model scored on its own training data versus held-out data.
struct SelfCheck {
  ids::Algorithm algorithm = ids::Algorithm::RandomForest;
  std::string scenario;
  double self_f1 = 0.0;
  double best_held_out_f1 = 0.0;
  bool holds() const { return self_f1 >= best_held_out_f1; }
};

struct ProtocolResult {
  ids::EvalReport report;     // every evaluated cell, self-evaluation cells included
  std::vector<F1Row> f1;      // one row per (algorithm, scenario)
  std::vector<SelfCheck> self_checks;

  double f1_of(ids::Algorithm a, const std::string& scenario) const;
  double mean_f1(const std::vector<std::string>& scenarios) const;

  static constexpr std::string_view kF1Header = "algorithm,scenario,f1,cells";
  std::string f1_csv() const;
  nlohmann::json to_json() const;
};

/// Supervised: train on each scenario, test on every other scenario of the
/// same family; a scenario's F1 is the mean over the cells testing on it.
/// Semi-supervised: train on a scenario's attack-free warm-up prefix and test
/// on the remainder of the same scenario.
ProtocolResult run_protocol(const std::vector<ScenarioData>& scenarios, const std::vector<ids::Algorithm>& algorithms,
                            const ids::IdsParams& params);

/// Cell label for the warm-up training slice and the remaining test slice.
std::string warmup_name(const std::string& scenario);
std::string remainder_name(const std::string& scenario);

/// Runs the six shipped scenarios with `seed`, then the protocol. Throws
/// sim::CalibrationError if any scenario misses its balance target.
ProtocolResult run_reference_experiment(std::uint64_t seed, const std::vector<ids::Algorithm>& algorithms,
                                        std::vector<ScenarioData>* datasets = nullptr);

void write_report(const ProtocolResult& result, const std::filesystem::path& out_dir);

}  // namespace cosim::experiment
