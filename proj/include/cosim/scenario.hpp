#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cosim/attacker.hpp"
#include "cosim/capture.hpp"
#include "cosim/config.hpp"
#include "cosim/engine.hpp"
#include "cosim/network.hpp"
#include "cosim/scada.hpp"

namespace cosim::sim {

/// Achieved attack share is off the configured balance target.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& scenario, double achieved_pct, double target_pct, double tolerance_pp);
  double achieved_pct() const { return achieved_; }
  double target_pct() const { return target_; }

 private:
  double achieved_;
  double target_;
};

struct RunOptions {
  bool trace = false;
  bool record_transits = false;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

/// One MTU-ingested point joined with the value the RTU actually measured.
struct ObservedPoint {
  std::uint64_t step = 0;
  std::string station;
  std::string point_id;
  grid::Quantity quantity = grid::Quantity::PKw;
  double received = 0.0;
  double true_value = 0.0;
  bool stale = false;
  bool manipulated = false;
};

struct ScenarioRun {
  std::string scenario;
  std::uint64_t seed = 0;
  std::uint64_t total_steps = 0;
  SimTime attack_start;
  SimTime attack_window_end;
  SimTime end;

  std::vector<capture::CapturedPacket> captured;
  capture::LabeledDataset dataset;
  std::vector<attack::ActionRecord> action_log;
  std::string action_log_csv;
  attack::Stage final_stage = attack::Stage::S1Scan;
  std::map<attack::Stage, SimTime> stage_entered;
  std::vector<attack::ImpactRecord> impacts;
  std::vector<scada::CompromiseRecord> compromise_log;
  std::map<std::string, std::vector<scada::ReportRecord>> reports;  // by RTU id
  std::map<std::string, std::string> rtu_address;                    // RTU id -> address
  std::vector<ObservedPoint> observed;
  std::uint64_t grid_nonconverged_steps = 0;
  net::NetworkStats network;
  std::vector<net::LinkTransit> transits;
  RunSummary engine;
  std::string trace;  // empty unless traced

  std::optional<double> balance_target_pct;
  double balance_tolerance_pp = 3.0;
  bool calibrated() const;

  static constexpr std::string_view kMeasurementHeader =
      "step,station,point,quantity,received,true_value,manipulated,stale";
  std::string measurement_csv() const;
  nlohmann::json summary() const;
};

ScenarioRun run_scenario(const config::ScenarioConfig& config, const RunOptions& options = {});

/// Throws CalibrationError when the run misses its balance target.
void check_calibration(const ScenarioRun& run);

/// Runs shipped fixture `scenario_id` (1..6) with `seed` and checks calibration.
capture::LabeledDataset make_scenario(int scenario_id, std::uint64_t seed);

/// Writes dataset.csv, actions.csv, measurements.csv and summary.json (plus
/// trace.csv when the run was traced).
void write_artifacts(const ScenarioRun& run, const std::filesystem::path& out_dir);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cosim::sim
