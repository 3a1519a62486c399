// Command-line entry point: simulate scenarios, export datasets, train and
// evaluate detectors, and produce the cross-scenario F1 report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cosim/config.hpp"
#include "cosim/experiment.hpp"
#include "cosim/ids.hpp"
#include "cosim/scenario.hpp"

namespace fs = std::filesystem;
using namespace cosim;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kCalibrationFailure = 3,
  kIdsViolation = 4,
  kDataError = 5,
};

std::vector<ids::Algorithm> parse_algorithms(const std::vector<std::string>& names) {
  std::vector<ids::Algorithm> out;
  for (const auto& list : names) {
    std::size_t start = 0;
    while (start <= list.size()) {
      const auto comma = list.find(',', start);
      const auto token = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!token.empty()) {
        const auto a = ids::parse_algorithm(token);
        if (!a) throw CLI::ValidationError("--algo", "unknown algorithm '" + token + "' (rf, knn, lof, iforest)");
        out.push_back(*a);
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

capture::LabeledDataset load_dataset(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("dataset not found: " + path);
  return capture::import_csv(path, capture::DatasetMeta{fs::path(path).stem().string(), 0});
}

struct Options {
  std::string scenario = "reference";
  std::optional<std::uint64_t> seed;
  std::string out;
  bool trace = false;
  std::string slice = "all";
  std::vector<std::string> algos;
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::vector<std::string> models;
  bool warmup = false;
};

int cmd_simulate(const Options& o) {
  const auto cfg = config::load_config(config::resolve_scenario(o.scenario));
  sim::RunOptions ro;
  ro.trace = o.trace;
  ro.seed = o.seed;
  const auto run = sim::run_scenario(cfg, ro);
  sim::write_artifacts(run, o.out);
  std::printf("scenario %s seed %llu: %zu records, attack share %.2f%%, final stage %s\n", run.scenario.c_str(),
              static_cast<unsigned long long>(run.seed), run.dataset.records.size(), run.dataset.balance.attack_pct,
              std::string(attack::to_string(run.final_stage)).c_str());
  sim::check_calibration(run);
  return kOk;
}

int cmd_dataset_export(const Options& o) {
  const auto cfg = config::load_config(config::resolve_scenario(o.scenario));
  sim::RunOptions ro;
  ro.seed = o.seed;
  const auto run = sim::run_scenario(cfg, ro);
  const auto& d = run.dataset;
  std::vector<capture::LabeledRecord> records;
  if (o.slice == "warmup") records = capture::slice(d, d.split.train);
  else if (o.slice == "remainder") records = capture::slice(d, d.split.test);
  else records = d.records;
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  sim::write_file(out, capture::to_csv(records));
  std::printf("wrote %zu records to %s\n", records.size(), o.out.c_str());
  return kOk;
}

int cmd_ids_train(const Options& o) {
  auto cfg = config::load_config(config::resolve_scenario(o.scenario));
  if (o.seed) cfg.seed = *o.seed;
  const auto params = cfg.ids_params();
  const auto algos = o.algos.empty() ? cfg.ids.algorithms : parse_algorithms(o.algos);

  std::vector<capture::LabeledRecord> all, warm;
  for (const auto& path : o.train) {
    const auto d = load_dataset(path);
    all.insert(all.end(), d.records.begin(), d.records.end());
    const auto w = capture::slice(d, d.split.train);
    warm.insert(warm.end(), w.begin(), w.end());
  }
  fs::create_directories(o.out);
  for (const auto a : algos) {
    const bool use_warmup = o.warmup && !ids::is_supervised(a);
    const auto model = ids::train(a, use_warmup ? warm : all, params);
    const auto path = fs::path(o.out) / ("model_" + lower(ids::to_string(a)) + ".json");
    model.save(path.string());
    std::printf("%s: trained on %zu records -> %s\n", std::string(ids::to_string(a)).c_str(),
                (use_warmup ? warm : all).size(), path.string().c_str());
  }
  return kOk;
}

int cmd_ids_eval(const Options& o) {
  std::vector<std::pair<std::string, capture::LabeledDataset>> tests;
  for (const auto& path : o.test) tests.emplace_back(fs::path(path).stem().string(), load_dataset(path));
  ids::EvalReport report;
  for (const auto& mp : o.models) {
    if (!fs::exists(mp)) throw std::runtime_error("model not found: " + mp);
    const auto model = ids::ClassifierModel::load(mp);
    for (const auto& [name, d] : tests) {
      const auto records = o.warmup && !ids::is_supervised(model.algorithm) ? capture::slice(d, d.split.test)
                                                                            : d.records;
      const auto r = ids::evaluate(model.predict(records), ids::labels_of(records));
      report.cells.push_back({model.algorithm, fs::path(mp).stem().string(), name, r});
    }
  }
  fs::create_directories(o.out);
  sim::write_file(fs::path(o.out) / "eval.json", report.to_json().dump(2) + "\n");
  sim::write_file(fs::path(o.out) / "eval.txt", report.table());
  std::fputs(report.table().c_str(), stdout);
  return kOk;
}

int cmd_report(const Options& o) {
  const auto algos = o.algos.empty() ? std::vector<ids::Algorithm>{ids::Algorithm::RandomForest, ids::Algorithm::Knn,
                                                                   ids::Algorithm::Lof,
                                                                   ids::Algorithm::IsolationForest}
                                     : parse_algorithms(o.algos);
  std::vector<experiment::ScenarioData> datasets;
  const auto result = experiment::run_reference_experiment(o.seed.value_or(1), algos, &datasets);
  experiment::write_report(result, o.out);
  for (const auto& d : datasets) {
    capture::export_csv(d.dataset, fs::path(o.out) / ("dataset_" + d.id + ".csv"));
  }
  std::fputs(result.f1_csv().c_str(), stdout);
  for (const auto& c : result.self_checks) {
    if (!c.holds()) {
      std::fprintf(stderr, "warning: %s trained on scenario %s scores F1 %.4f on its own data but %.4f held out\n",
                   std::string(ids::to_string(c.algorithm)).c_str(), c.scenario.c_str(), c.self_f1,
                   c.best_held_out_f1);
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCADA smart-grid attack co-simulation"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "run a scenario and write its artifacts");
  simulate->add_option("--scenario", o.scenario, "1..6, reference, or a scenario file")->required();
  simulate->add_option("--seed", o.seed, "root seed (defaults to the scenario's)");
  simulate->add_option("--out", o.out, "output directory")->required();
  simulate->add_flag("--trace", o.trace, "also write the event trace");

  auto* dataset = app.add_subcommand("dataset", "dataset operations");
  dataset->require_subcommand(1);
  auto* dexport = dataset->add_subcommand("export", "simulate a scenario and write its labeled dataset");
  dexport->add_option("--scenario", o.scenario, "1..6, reference, or a scenario file")->required();
  dexport->add_option("--seed", o.seed, "root seed");
  dexport->add_option("--out", o.out, "output CSV path")->required();
  dexport->add_option("--slice", o.slice, "all, warmup or remainder")
      ->check(CLI::IsMember({"all", "warmup", "remainder"}));

  auto* ids_cmd = app.add_subcommand("ids", "detector training and evaluation");
  ids_cmd->require_subcommand(1);
  auto* train = ids_cmd->add_subcommand("train", "train detectors on dataset CSVs");
  train->add_option("--train", o.train, "training dataset CSVs")->required();
  train->add_option("--algo", o.algos, "rf,knn,lof,iforest");
  train->add_option("--out", o.out, "model output directory")->required();
  train->add_option("--scenario", o.scenario, "scenario whose ids section supplies hyperparameters");
  train->add_option("--seed", o.seed, "model seed root");
  train->add_flag("--warmup", o.warmup, "fit semi-supervised detectors on each dataset's attack-free prefix");

  auto* eval = ids_cmd->add_subcommand("eval", "evaluate saved models on dataset CSVs");
  eval->add_option("--model", o.models, "model files")->required();
  eval->add_option("--test", o.test, "test dataset CSVs")->required();
  eval->add_option("--out", o.out, "report output directory")->required();
  eval->add_flag("--warmup", o.warmup, "score semi-supervised models on the part after the warm-up prefix only");

  auto* report = app.add_subcommand("report", "run all six scenarios and the train/test protocol");
  report->add_option("--seed", o.seed, "root seed for every scenario");
  report->add_option("--algo", o.algos, "rf,knn,lof,iforest");
  report->add_option("--out", o.out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (dexport->parsed()) return cmd_dataset_export(o);
    if (train->parsed()) return cmd_ids_train(o);
    if (eval->parsed()) return cmd_ids_eval(o);
    if (report->parsed()) return cmd_report(o);
  } catch (const config::ConfigErrors& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const sim::CalibrationError& e) {
    std::cerr << "calibration failure: " << e.what() << '\n';
    return kCalibrationFailure;
  } catch (const ids::PurityViolation& e) {
    std::cerr << "ids protocol violation: " << e.what() << "\n  offending record indices:";
    const auto& idx = e.offending();
    for (std::size_t i = 0; i < idx.size() && i < 20; ++i) std::cerr << ' ' << idx[i];
    if (idx.size() > 20) std::cerr << " ... (" << idx.size() << " total)";
    std::cerr << '\n';
    return kIdsViolation;
  } catch (const ids::IdsError& e) {
    std::cerr << "ids protocol violation: " << e.what() << '\n';
    return kIdsViolation;
  } catch (const capture::DatasetFormatError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
