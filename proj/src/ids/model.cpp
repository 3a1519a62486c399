#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "cosim/ids.hpp"

namespace cosim::ids {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::RandomForest: return "RF";
    case Algorithm::Knn: return "KNN";
    case Algorithm::Lof: return "LOF";
    case Algorithm::IsolationForest: return "IFOREST";
  }
  return "?";
}

std::optional<Algorithm> parse_algorithm(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (u == "RF") return Algorithm::RandomForest;
  if (u == "KNN") return Algorithm::Knn;
  if (u == "LOF") return Algorithm::Lof;
  if (u == "IFOREST" || u == "IF") return Algorithm::IsolationForest;
  return std::nullopt;
}

bool is_supervised(Algorithm a) { return a == Algorithm::RandomForest || a == Algorithm::Knn; }

Matrix encode_matrix(std::span<const capture::LabeledRecord> records, const capture::FeatureDictionary& dict) {
  Matrix m;
  m.reserve(records.size());
  for (const auto& r : records) m.push_back(capture::to_dense(capture::encode(r, dict), dict));
  return m;
}

std::vector<Label> labels_of(std::span<const capture::LabeledRecord> records) {
  std::vector<Label> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.label);
  return y;
}

std::optional<double> ClassifierModel::decision_threshold() const {
  if (const auto* lof = std::get_if<LofDetector>(&fitted)) return lof->threshold();
  if (const auto* iso = std::get_if<IsolationForest>(&fitted)) return iso->threshold();
  return std::nullopt;
}

std::size_t ClassifierModel::dimension() const {
  return std::visit([](const auto& m) { return m.dimension(); }, fitted);
}

Label ClassifierModel::predict_row(std::span<const double> row) const {
  if (row.size() != dimension()) {
    throw IdsError("feature dimension " + std::to_string(row.size()) + " does not match model dimension " +
                   std::to_string(dimension()));
  }
  return std::visit(
      [&](const auto& m) -> Label {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, RandomForest> || std::is_same_v<M, KnnClassifier>) {
          return m.predict(row);
        } else {
          return m.is_anomaly(row) ? Label::Attack : Label::Normal;
        }
      },
      fitted);
}

std::vector<Label> ClassifierModel::predict(const Matrix& features) const {
  // predict_row is a pure function of the row, so identical rows share a result.
  std::map<Row, Label> memo;
  std::vector<Label> out;
  out.reserve(features.size());
  for (const auto& row : features) {
    auto it = memo.find(row);
    if (it == memo.end()) it = memo.emplace(row, predict_row(row)).first;
    out.push_back(it->second);
  }
  return out;
}

std::vector<Label> ClassifierModel::predict(std::span<const capture::LabeledRecord> records) const {
  return predict(encode_matrix(records, dictionary));
}

namespace {

nlohmann::json dictionary_json(const capture::FeatureDictionary& d) {
  return {{"encoding", std::string(capture::to_string(d.encoding))},
          {"src", d.src},
          {"dst", d.dst},
          {"protocol", d.protocol},
          {"length_min", d.length_min},
          {"length_max", d.length_max}};
}

capture::FeatureDictionary dictionary_from(const nlohmann::json& j) {
  capture::FeatureDictionary d;
  const auto enc = capture::parse_encoding(j.at("encoding").get<std::string>());
  if (!enc) throw IdsError("model file: unknown encoding");
  d.encoding = *enc;
  d.src = j.at("src").get<std::map<std::string, int>>();
  d.dst = j.at("dst").get<std::map<std::string, int>>();
  d.protocol = j.at("protocol").get<std::map<std::string, int>>();
  d.length_min = j.at("length_min").get<double>();
  d.length_max = j.at("length_max").get<double>();
  return d;
}

std::string algorithm_key(Algorithm a) {
  std::string s(to_string(a));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

nlohmann::json ClassifierModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["algorithm"] = algorithm_key(algorithm);
  j["dictionary"] = dictionary_json(dictionary);
  if (const auto t = decision_threshold()) j["decision_threshold"] = *t;
  j["model"] = std::visit([](const auto& m) { return m.to_json(); }, fitted);
  return j;
}

ClassifierModel ClassifierModel::from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      throw IdsError("unsupported model format_version " + std::to_string(version));
    }
    const auto algo = parse_algorithm(j.at("algorithm").get<std::string>());
    if (!algo) throw IdsError("model file: unknown algorithm");
    ClassifierModel m;
    m.algorithm = *algo;
    m.dictionary = dictionary_from(j.at("dictionary"));
    const auto& body = j.at("model");
    switch (*algo) {
      case Algorithm::RandomForest: m.fitted = RandomForest::from_json(body); break;
      case Algorithm::Knn: m.fitted = KnnClassifier::from_json(body); break;
      case Algorithm::Lof: m.fitted = LofDetector::from_json(body); break;
      case Algorithm::IsolationForest: m.fitted = IsolationForest::from_json(body); break;
    }
    if (m.dimension() != m.dictionary.dimension()) throw IdsError("model file: dictionary dimension mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IdsError(std::string("malformed model file: ") + e.what());
  }
}

void ClassifierModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model to " + path);
  out << to_json().dump(1) << '\n';
}

ClassifierModel ClassifierModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IdsError(path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

void require_attack_free(std::span<const capture::LabeledRecord> train, Algorithm a) {
  std::vector<std::size_t> offending;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label == Label::Attack) offending.push_back(i);
  }
  if (offending.empty()) return;
  std::string msg = std::string(to_string(a)) + " is semi-supervised; training set holds " +
                    std::to_string(offending.size()) + " attack-labeled records (first at index " +
                    std::to_string(offending.front()) + ")";
  throw PurityViolation(msg, std::move(offending));
}

ClassifierModel wrap(Algorithm a, capture::FeatureDictionary dict) {
  ClassifierModel m;
  m.algorithm = a;
  m.dictionary = std::move(dict);
  return m;
}

}  // namespace

ClassifierModel train_rf(std::span<const capture::LabeledRecord> train, const RfParams& params,
                         capture::Encoding encoding) {
  auto m = wrap(Algorithm::RandomForest, capture::FeatureDictionary::build(train, encoding));
  m.fitted = RandomForest::fit(encode_matrix(train, m.dictionary), labels_of(train), params);
  return m;
}

ClassifierModel train_knn(std::span<const capture::LabeledRecord> train, const KnnParams& params,
                          capture::Encoding encoding) {
  if (train.empty()) throw IdsError("knn: empty training set");
  auto m = wrap(Algorithm::Knn, capture::FeatureDictionary::build(train, encoding));
  m.fitted = KnnClassifier::fit(encode_matrix(train, m.dictionary), labels_of(train), params);
  return m;
}

ClassifierModel fit_lof(std::span<const capture::LabeledRecord> train, const LofParams& params,
                        capture::Encoding encoding) {
  require_attack_free(train, Algorithm::Lof);
  auto m = wrap(Algorithm::Lof, capture::FeatureDictionary::build(train, encoding));
  m.fitted = LofDetector::fit(encode_matrix(train, m.dictionary), params);
  return m;
}

ClassifierModel fit_iforest(std::span<const capture::LabeledRecord> train, const IForestParams& params,
                            capture::Encoding encoding) {
  require_attack_free(train, Algorithm::IsolationForest);
  auto m = wrap(Algorithm::IsolationForest, capture::FeatureDictionary::build(train, encoding));
  m.fitted = IsolationForest::fit(encode_matrix(train, m.dictionary), params);
  return m;
}

ClassifierModel train(Algorithm algorithm, std::span<const capture::LabeledRecord> train,
                      const IdsParams& params) {
  switch (algorithm) {
    case Algorithm::RandomForest: return train_rf(train, params.rf, params.encoding);
    case Algorithm::Knn: return train_knn(train, params.knn, params.encoding);
    case Algorithm::Lof: return fit_lof(train, params.lof, params.encoding);
    case Algorithm::IsolationForest: return fit_iforest(train, params.iforest, params.encoding);
  }
  throw IdsError("unknown algorithm");
}

}  // namespace cosim::ids
