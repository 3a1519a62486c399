#include <algorithm>
#include <numeric>

#include "cosim/ids.hpp"

namespace cosim::ids {

KnnClassifier KnnClassifier::fit(const Matrix& x, std::span<const Label> y, const KnnParams& params) {
  if (x.size() != y.size()) throw IdsError("feature rows and labels differ in length");
  if (params.k < 1) throw IdsError("knn: k must be at least 1");
  if (static_cast<std::size_t>(params.k) > x.size()) {
    throw IdsError("knn: k=" + std::to_string(params.k) + " exceeds training size " + std::to_string(x.size()));
  }
  KnnClassifier m;
  m.dim_ = x.front().size();
  for (const auto& row : x) {
    if (row.size() != m.dim_) throw IdsError("ragged feature matrix");
  }
  m.x_ = x;
  m.y_.assign(y.begin(), y.end());
  m.k_ = params.k;
  return m;
}

Label KnnClassifier::predict(std::span<const double> row) const {
  if (row.size() != dim_) throw IdsError("knn expects dimension " + std::to_string(dim_));
  std::vector<std::pair<double, std::size_t>> dist(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) {
    double s = 0.0;
    for (std::size_t f = 0; f < dim_; ++f) {
      const double d = x_[i][f] - row[f];
      s += d * d;
    }
    dist[i] = {s, i};
  }
  const auto k = static_cast<std::size_t>(k_);
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
  const double kth = dist[k - 1].first;
  std::size_t votes = 0, attack = 0;
  for (const auto& [d, i] : dist) {
    if (d > kth) continue;
    ++votes;
    if (y_[i] == Label::Attack) ++attack;
  }
  return 2 * attack >= votes ? Label::Attack : Label::Normal;
}

nlohmann::json KnnClassifier::to_json() const {
  nlohmann::json labels = nlohmann::json::array();
  for (auto l : y_) labels.push_back(l == Label::Attack ? 1 : 0);
  return {{"k", k_}, {"dimension", dim_}, {"x", x_}, {"y", std::move(labels)}};
}

KnnClassifier KnnClassifier::from_json(const nlohmann::json& j) {
  KnnClassifier m;
  m.k_ = j.at("k").get<int>();
  m.dim_ = j.at("dimension").get<std::size_t>();
  m.x_ = j.at("x").get<Matrix>();
  for (const auto& l : j.at("y")) m.y_.push_back(l.get<int>() == 1 ? Label::Attack : Label::Normal);
  if (m.x_.size() != m.y_.size()) throw IdsError("knn model: sample and label counts differ");
  return m;
}

}  // namespace cosim::ids
