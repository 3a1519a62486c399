#include <algorithm>
#include <cmath>

#include "cosim/ids.hpp"

namespace cosim::ids {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct Neighbourhood {
  double kdist = 0.0;
  std::vector<std::pair<std::size_t, double>> members;  // (index, distance)
};

// k-distance neighbourhood of `row` among x, skipping index `skip`; every
// point tied with the k-th distance is a member.
Neighbourhood neighbourhood(const Matrix& x, std::span<const double> row, std::size_t k, std::size_t skip) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i != skip) d.emplace_back(distance(row, x[i]), i);
  }
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
  Neighbourhood n;
  n.kdist = d[k - 1].first;
  for (const auto& [dist, i] : d) {
    if (dist <= n.kdist) n.members.emplace_back(i, dist);
  }
  std::sort(n.members.begin(), n.members.end());
  return n;
}

}  // namespace

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw IdsError("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw IdsError("quantile outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

LofDetector LofDetector::fit(const Matrix& x, const LofParams& params) {
  if (params.k < 1) throw IdsError("lof: k must be at least 1");
  if (x.size() <= static_cast<std::size_t>(params.k)) {
    throw IdsError("lof: training size " + std::to_string(x.size()) + " must exceed k=" + std::to_string(params.k));
  }
  LofDetector m;
  m.dim_ = x.front().size();
  for (const auto& row : x) {
    if (row.size() != m.dim_) throw IdsError("ragged feature matrix");
  }
  m.x_ = x;
  m.k_ = params.k;
  m.quantile_ = params.threshold_quantile;
  m.precompute();
  m.threshold_ = quantile(m.train_scores_, m.quantile_);
  return m;
}

void LofDetector::precompute() {
  const auto k = static_cast<std::size_t>(k_);
  const std::size_t n = x_.size();
  std::vector<Neighbourhood> hoods(n);
  kdist_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    hoods[i] = neighbourhood(x_, x_[i], k, i);
    kdist_[i] = hoods[i].kdist;
  }
  lrd_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double reach = 0.0;
    for (const auto& [o, d] : hoods[i].members) reach += std::max(kdist_[o], d);
    reach /= static_cast<double>(hoods[i].members.size());
    lrd_[i] = 1.0 / std::max(reach, kLofReachFloor);
  }
  train_scores_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& [o, d] : hoods[i].members) sum += lrd_[o];
    train_scores_[i] = sum / static_cast<double>(hoods[i].members.size()) / lrd_[i];
  }
}

double LofDetector::score(std::span<const double> row) const {
  if (row.size() != dim_) throw IdsError("lof expects dimension " + std::to_string(dim_));
  const auto hood = neighbourhood(x_, row, static_cast<std::size_t>(k_), x_.size());
  double reach = 0.0;
  double dens = 0.0;
  for (const auto& [o, d] : hood.members) {
    reach += std::max(kdist_[o], d);
    dens += lrd_[o];
  }
  const double m = static_cast<double>(hood.members.size());
  const double lrd = 1.0 / std::max(reach / m, kLofReachFloor);
  return dens / m / lrd;
}

nlohmann::json LofDetector::to_json() const {
  return {{"k", k_}, {"dimension", dim_}, {"threshold_quantile", quantile_}, {"threshold", threshold_}, {"x", x_}};
}

LofDetector LofDetector::from_json(const nlohmann::json& j) {
  LofDetector m;
  m.k_ = j.at("k").get<int>();
  m.dim_ = j.at("dimension").get<std::size_t>();
  m.quantile_ = j.at("threshold_quantile").get<double>();
  m.x_ = j.at("x").get<Matrix>();
  if (m.x_.size() <= static_cast<std::size_t>(m.k_)) throw IdsError("lof model: too few samples for k");
  m.precompute();
  m.threshold_ = j.at("threshold").get<double>();
  return m;
}

}  // namespace cosim::ids
