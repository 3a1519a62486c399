#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cosim/capture.hpp"

namespace cosim::ids {

using capture::Label;
using Row = std::vector<double>;
using Matrix = std::vector<Row>;

/// Training or prediction request that violates an algorithm's contract
/// (single-class data, attack records in semi-supervised training, k too
/// large, dimension mismatch, ...).
class IdsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Semi-supervised training data contained attack-labeled records.
class PurityViolation : public IdsError {
 public:
  PurityViolation(const std::string& what, std::vector<std::size_t> offending)
      : IdsError(what), offending_(std::move(offending)) {}
  const std::vector<std::size_t>& offending() const { return offending_; }

 private:
  std::vector<std::size_t> offending_;
};

enum class Algorithm { RandomForest, Knn, Lof, IsolationForest };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view s);
bool is_supervised(Algorithm a);

/// Linear-interpolated quantile of `values` (q in [0, 1]).
double quantile(std::vector<double> values, double q);

// --- Random forest -------------------------------------------------------

struct RfParams {
  int trees = 100;
  int max_depth = 16;
  bool bootstrap = true;
  int max_features = 0;  // 0 selects floor(sqrt(d)), at least 1
  int min_samples_split = 2;
  std::uint64_t seed = 1;
};

class RandomForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Label label = Label::Normal;
    friend bool operator==(const Node&, const Node&) = default;
  };
  using Tree = std::vector<Node>;

  static RandomForest fit(const Matrix& x, std::span<const Label> y, const RfParams& params);
  Label predict(std::span<const double> row) const;

  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t dimension() const { return dim_; }
  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::vector<Tree> trees_;
  std::size_t dim_ = 0;
};

// --- k-nearest neighbours ------------------------------------------------

struct KnnParams {
  int k = 5;
};

/// Euclidean k-NN majority vote. Every training point at the k-th distance
/// votes, so the result does not depend on training order; a tied vote
/// resolves to attack.
class KnnClassifier {
 public:
  static KnnClassifier fit(const Matrix& x, std::span<const Label> y, const KnnParams& params);
  Label predict(std::span<const double> row) const;

  int k() const { return k_; }
  std::size_t dimension() const { return dim_; }
  nlohmann::json to_json() const;
  static KnnClassifier from_json(const nlohmann::json& j);

 private:
  Matrix x_;
  std::vector<Label> y_;
  int k_ = 5;
  std::size_t dim_ = 0;
};

// --- Local outlier factor -----------------------------------------------

struct LofParams {
  int k = 20;
  double threshold_quantile = 0.99;
};

/// Reachability densities are floored at this mean reachability distance so
/// duplicate-collapsed neighbourhoods yield finite scores.
constexpr double kLofReachFloor = 1e-10;

class LofDetector {
 public:
  static LofDetector fit(const Matrix& x, const LofParams& params);
  /// LOF of a new point against the training set.
  double score(std::span<const double> row) const;
  bool is_anomaly(std::span<const double> row) const { return score(row) > threshold_; }

  /// LOF of each training point, computed without itself.
  const std::vector<double>& training_scores() const { return train_scores_; }
  double threshold() const { return threshold_; }
  std::size_t dimension() const { return dim_; }
  nlohmann::json to_json() const;
  static LofDetector from_json(const nlohmann::json& j);

 private:
  void precompute();

  Matrix x_;
  int k_ = 20;
  std::size_t dim_ = 0;
  std::vector<double> kdist_;
  std::vector<double> lrd_;
  std::vector<double> train_scores_;
  double threshold_ = 0.0;
  double quantile_ = 0.99;
};

// --- Isolation forest ----------------------------------------------------

struct IForestParams {
  int trees = 100;
  int subsample = 256;
  std::uint64_t seed = 1;
  double threshold_quantile = 0.99;
};

/// Average unsuccessful-search path length of a BST with n points.
double average_path_length(std::size_t n);

class IsolationForest {
 public:
  struct Node {
    int feature = -1;  // -1 marks an external node
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;  // training points reaching an external node
    friend bool operator==(const Node&, const Node&) = default;
  };
  using Tree = std::vector<Node>;

  static IsolationForest fit(const Matrix& x, const IForestParams& params);
  /// s(x) = 2^(-E[h(x)] / c(subsample)); 0.5 when c(subsample) = 0.
  double score(std::span<const double> row) const;
  bool is_anomaly(std::span<const double> row) const { return score(row) > threshold_; }

  const std::vector<Tree>& trees() const { return trees_; }
  double threshold() const { return threshold_; }
  std::size_t dimension() const { return dim_; }
  nlohmann::json to_json() const;
  static IsolationForest from_json(const nlohmann::json& j);

 private:
  double path_length(const Tree& tree, std::span<const double> row) const;

  std::vector<Tree> trees_;
  std::size_t subsample_ = 0;
  std::size_t dim_ = 0;
  double threshold_ = 0.0;
};

// --- Model wrapper -------------------------------------------------------

struct IdsParams {
  RfParams rf;
  KnnParams knn;
  LofParams lof;
  IForestParams iforest;
  capture::Encoding encoding = capture::Encoding::Categorical;
};

/// A fitted detector together with the feature dictionary it was trained on.
struct ClassifierModel {
  static constexpr int kFormatVersion = 1;

  Algorithm algorithm = Algorithm::RandomForest;
  capture::FeatureDictionary dictionary;
  std::variant<RandomForest, KnnClassifier, LofDetector, IsolationForest> fitted;

  std::optional<double> decision_threshold() const;
  std::size_t dimension() const;

  Label predict_row(std::span<const double> row) const;
  /// Per-row labels; throws IdsError on a dimension mismatch.
  std::vector<Label> predict(const Matrix& features) const;
  /// Encodes with the model's dictionary, then predicts.
  std::vector<Label> predict(std::span<const capture::LabeledRecord> records) const;

  nlohmann::json to_json() const;
  static ClassifierModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ClassifierModel load(const std::string& path);
};

Matrix encode_matrix(std::span<const capture::LabeledRecord> records, const capture::FeatureDictionary& dict);
std::vector<Label> labels_of(std::span<const capture::LabeledRecord> records);

/// Builds the dictionary from `train` and fits the requested algorithm.
/// Semi-supervised algorithms reject any attack-labeled record.
ClassifierModel train(Algorithm algorithm, std::span<const capture::LabeledRecord> train,
                      const IdsParams& params);

ClassifierModel train_rf(std::span<const capture::LabeledRecord> train, const RfParams& params,
                         capture::Encoding encoding = capture::Encoding::Categorical);
ClassifierModel train_knn(std::span<const capture::LabeledRecord> train, const KnnParams& params,
                          capture::Encoding encoding = capture::Encoding::Categorical);
ClassifierModel fit_lof(std::span<const capture::LabeledRecord> train, const LofParams& params,
                        capture::Encoding encoding = capture::Encoding::Categorical);
ClassifierModel fit_iforest(std::span<const capture::LabeledRecord> train, const IForestParams& params,
                            capture::Encoding encoding = capture::Encoding::Categorical);

// --- Evaluation ----------------------------------------------------------

struct EvalResult {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Attack is the positive class. Precision, recall and F1 are 0 when their
/// denominators vanish.
EvalResult evaluate(std::span<const Label> predictions, std::span<const Label> truth);

struct EvalCell {
  Algorithm algorithm = Algorithm::RandomForest;
  std::string train_scenario;
  std::string test_scenario;
  EvalResult result;
};

struct EvalReport {
  std::vector<EvalCell> cells;

  nlohmann::json to_json() const;
  std::string table() const;
};

}  // namespace cosim::ids
