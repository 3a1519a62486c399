#include <cstdio>

#include "cosim/ids.hpp"

namespace cosim::ids {

EvalResult evaluate(std::span<const Label> predictions, std::span<const Label> truth) {
  if (predictions.size() != truth.size()) {
    throw IdsError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                   std::to_string(truth.size()) + " ground-truth labels");
  }
  EvalResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] == Label::Attack;
    const bool t = truth[i] == Label::Attack;
    if (p && t) ++r.tp;
    else if (p) ++r.fp;
    else if (t) ++r.fn;
    else ++r.tn;
  }
  const auto tp = static_cast<double>(r.tp);
  if (r.tp + r.fp > 0) r.precision = tp / static_cast<double>(r.tp + r.fp);
  if (r.tp + r.fn > 0) r.recall = tp / static_cast<double>(r.tp + r.fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"algorithm", std::string(to_string(c.algorithm))},
                          {"train_scenario", c.train_scenario},
                          {"test_scenario", c.test_scenario},
                          {"tp", c.result.tp},
                          {"fp", c.result.fp},
                          {"tn", c.result.tn},
                          {"fn", c.result.fn},
                          {"precision", c.result.precision},
                          {"recall", c.result.recall},
                          {"f1", c.result.f1}});
  }
  return {{"cells", std::move(cells_json)}};
}

std::string EvalReport::table() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-10s %-10s %8s %8s %8s %8s %9s %9s %9s\n", "algo", "train", "test", "TP",
                "FP", "TN", "FN", "precision", "recall", "F1");
  out += buf;
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%-8s %-10s %-10s %8llu %8llu %8llu %8llu %9.4f %9.4f %9.4f\n",
                  std::string(to_string(c.algorithm)).c_str(), c.train_scenario.c_str(), c.test_scenario.c_str(),
                  static_cast<unsigned long long>(c.result.tp), static_cast<unsigned long long>(c.result.fp),
                  static_cast<unsigned long long>(c.result.tn), static_cast<unsigned long long>(c.result.fn),
                  c.result.precision, c.result.recall, c.result.f1);
    out += buf;
  }
  return out;
}

}  // namespace cosim::ids
