#include <algorithm>
#include <cmath>
#include <numeric>

#include "cosim/engine.hpp"
#include "cosim/ids.hpp"

namespace cosim::ids {

namespace {

constexpr double kEulerGamma = 0.5772156649;

class IsoTreeBuilder {
 public:
  IsoTreeBuilder(const Matrix& x, int height_limit, std::uint64_t seed)
      : x_(x), limit_(height_limit), rng_(seed) {}

  IsolationForest::Tree build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.size());
    tree_.emplace_back();
    tree_[id].size = rows.size();
    if (depth >= limit_ || rows.size() <= 1) return id;

    const std::size_t d = x_.front().size();
    std::vector<std::size_t> varying;
    std::vector<std::pair<double, double>> range(d);
    for (std::size_t f = 0; f < d; ++f) {
      double lo = x_[rows.front()][f], hi = lo;
      for (auto r : rows) {
        lo = std::min(lo, x_[r][f]);
        hi = std::max(hi, x_[r][f]);
      }
      range[f] = {lo, hi};
      if (hi > lo) varying.push_back(f);
    }
    if (varying.empty()) return id;
    const std::size_t f = varying[static_cast<std::size_t>(rng_() % varying.size())];
    const auto [lo, hi] = range[f];
    const double split = lo + unit_uniform(rng_) * (hi - lo);

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_[r][f] < split ? left : right).push_back(r);
    tree_[id].feature = static_cast<int>(f);
    tree_[id].split = split;
    const int l = grow(left, depth + 1);
    tree_[id].left = l;
    const int r = grow(right, depth + 1);
    tree_[id].right = r;
    return id;
  }

  const Matrix& x_;
  int limit_;
  std::mt19937_64 rng_;
  IsolationForest::Tree tree_;
};

}  // namespace

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

IsolationForest IsolationForest::fit(const Matrix& x, const IForestParams& params) {
  if (x.empty()) throw IdsError("isolation forest: empty training set");
  if (params.trees < 1) throw IdsError("isolation forest needs at least one tree");
  if (params.subsample < 1) throw IdsError("isolation forest: subsample must be at least 1");
  IsolationForest m;
  m.dim_ = x.front().size();
  for (const auto& row : x) {
    if (row.size() != m.dim_) throw IdsError("ragged feature matrix");
  }
  m.subsample_ = std::min<std::size_t>(static_cast<std::size_t>(params.subsample), x.size());
  const int limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(m.subsample_))));

  for (int t = 0; t < params.trees; ++t) {
    const auto seed = derive_seed(params.seed, "itree/" + std::to_string(t));
    std::mt19937_64 rng(derive_seed(seed, "subsample"));
    // Partial Fisher-Yates: first subsample_ entries form the sample.
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < m.subsample_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(m.subsample_);
    IsoTreeBuilder builder(x, limit, derive_seed(seed, "split"));
    m.trees_.push_back(builder.build(std::move(idx)));
  }

  std::vector<double> scores;
  scores.reserve(x.size());
  for (const auto& row : x) scores.push_back(m.score(row));
  m.threshold_ = quantile(std::move(scores), params.threshold_quantile);
  return m;
}

double IsolationForest::path_length(const Tree& tree, std::span<const double> row) const {
  int n = 0;
  int depth = 0;
  while (tree[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = tree[static_cast<std::size_t>(n)];
    n = row[static_cast<std::size_t>(node.feature)] < node.split ? node.left : node.right;
    ++depth;
  }
  return depth + average_path_length(tree[static_cast<std::size_t>(n)].size);
}

double IsolationForest::score(std::span<const double> row) const {
  if (row.size() != dim_) throw IdsError("isolation forest expects dimension " + std::to_string(dim_));
  const double c = average_path_length(subsample_);
  if (c == 0.0) return 0.5;
  double sum = 0.0;
  for (const auto& tree : trees_) sum += path_length(tree, row);
  const double mean = sum / static_cast<double>(trees_.size());
  return std::pow(2.0, -mean / c);
}

nlohmann::json IsolationForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) {
      if (n.feature < 0) {
        nodes.push_back({{"size", n.size}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"split", n.split}, {"left", n.left}, {"right", n.right},
                         {"size", n.size}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"dimension", dim_}, {"subsample", subsample_}, {"threshold", threshold_}, {"trees", std::move(trees)}};
}

IsolationForest IsolationForest::from_json(const nlohmann::json& j) {
  IsolationForest m;
  m.dim_ = j.at("dimension").get<std::size_t>();
  m.subsample_ = j.at("subsample").get<std::size_t>();
  m.threshold_ = j.at("threshold").get<double>();
  for (const auto& jt : j.at("trees")) {
    Tree tree;
    for (const auto& jn : jt) {
      Node n;
      n.size = jn.at("size").get<std::size_t>();
      if (jn.contains("feature")) {
        n.feature = jn.at("feature").get<int>();
        n.split = jn.at("split").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      tree.push_back(n);
    }
    m.trees_.push_back(std::move(tree));
  }
  return m;
}

}  // namespace cosim::ids
