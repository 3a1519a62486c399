#include <algorithm>
#include <cmath>
#include <numeric>

#include "cosim/engine.hpp"
#include "cosim/ids.hpp"

namespace cosim::ids {

namespace {

struct Counts {
  std::size_t normal = 0;
  std::size_t attack = 0;
  std::size_t total() const { return normal + attack; }
  void add(Label l) { (l == Label::Attack ? attack : normal) += 1; }
  void remove(Label l) { (l == Label::Attack ? attack : normal) -= 1; }
  Label majority() const { return attack >= normal ? Label::Attack : Label::Normal; }
  double gini() const {
    const double n = static_cast<double>(total());
    if (n == 0.0) return 0.0;
    const double pa = static_cast<double>(attack) / n;
    const double pn = static_cast<double>(normal) / n;
    return 1.0 - pa * pa - pn * pn;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const Label> y, const RfParams& p, std::size_t mtry,
              std::uint64_t seed)
      : x_(x), y_(y), p_(p), mtry_(mtry), rng_(seed) {}

  RandomForest::Tree build(std::vector<std::size_t> rows) {
    tree_.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.size());
    tree_.emplace_back();
    Counts c;
    for (auto r : rows) c.add(y_[r]);
    tree_[id].label = c.majority();
    if (depth >= p_.max_depth || c.normal == 0 || c.attack == 0 ||
        rows.size() < static_cast<std::size_t>(std::max(2, p_.min_samples_split))) {
      return id;
    }

    const std::size_t d = x_.front().size();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    // Draw features in random order; keep going past mtry until a feature
    // that actually varies here has been examined.
    std::size_t examined = 0;
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = c.gini() * static_cast<double>(rows.size());
    std::vector<std::pair<double, Label>> column(rows.size());
    for (std::size_t i = 0; i < d; ++i) {
      if (examined >= mtry_) break;
      const std::size_t j = i + static_cast<std::size_t>(rng_() % (d - i));
      std::swap(features[i], features[j]);
      const std::size_t f = features[i];
      for (std::size_t k = 0; k < rows.size(); ++k) column[k] = {x_[rows[k]][f], y_[rows[k]]};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (column.front().first == column.back().first) continue;
      ++examined;
      Counts left;
      Counts right = c;
      for (std::size_t k = 0; k + 1 < column.size(); ++k) {
        left.add(column[k].second);
        right.remove(column[k].second);
        if (column[k].first == column[k + 1].first) continue;
        const double impurity = left.gini() * static_cast<double>(left.total()) +
                                right.gini() * static_cast<double>(right.total());
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (column[k].first + column[k + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) {
      (x_[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree_[id].feature = best_feature;
    tree_[id].threshold = best_threshold;
    const int l = grow(lrows, depth + 1);
    tree_[id].left = l;
    const int r = grow(rrows, depth + 1);
    tree_[id].right = r;
    return id;
  }

  const Matrix& x_;
  std::span<const Label> y_;
  const RfParams& p_;
  std::size_t mtry_;
  std::mt19937_64 rng_;
  RandomForest::Tree tree_;
};

void check_training(const Matrix& x, std::span<const Label> y) {
  if (x.size() != y.size()) throw IdsError("feature rows and labels differ in length");
  if (x.empty()) throw IdsError("empty training set");
  const std::size_t d = x.front().size();
  if (d == 0) throw IdsError("zero-dimensional features");
  for (const auto& row : x) {
    if (row.size() != d) throw IdsError("ragged feature matrix");
  }
}

}  // namespace

RandomForest RandomForest::fit(const Matrix& x, std::span<const Label> y, const RfParams& params) {
  check_training(x, y);
  if (params.trees < 1) throw IdsError("random forest needs at least one tree");
  if (params.max_depth < 0) throw IdsError("negative max_depth");
  const auto attacks = std::count(y.begin(), y.end(), Label::Attack);
  if (attacks == 0 || static_cast<std::size_t>(attacks) == y.size()) {
    throw IdsError("random forest training set holds a single class (" +
                   std::string(attacks == 0 ? "normal" : "attack") + " only, " + std::to_string(y.size()) +
                   " records)");
  }
  const std::size_t d = x.front().size();
  std::size_t mtry = params.max_features > 0
                         ? static_cast<std::size_t>(params.max_features)
                         : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
  mtry = std::clamp<std::size_t>(mtry, 1, d);

  RandomForest rf;
  rf.dim_ = d;
  rf.trees_.reserve(static_cast<std::size_t>(params.trees));
  for (int t = 0; t < params.trees; ++t) {
    const auto seed = derive_seed(params.seed, "tree/" + std::to_string(t));
    std::vector<std::size_t> rows(x.size());
    TreeBuilder builder(x, y, params, mtry, derive_seed(seed, "split"));
    if (params.bootstrap) {
      std::mt19937_64 boot(derive_seed(seed, "bootstrap"));
      for (auto& r : rows) r = static_cast<std::size_t>(boot() % x.size());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    rf.trees_.push_back(builder.build(std::move(rows)));
  }
  return rf;
}

Label RandomForest::predict(std::span<const double> row) const {
  if (row.size() != dim_) throw IdsError("random forest expects dimension " + std::to_string(dim_));
  std::size_t attack = 0;
  for (const auto& tree : trees_) {
    int n = 0;
    while (tree[static_cast<std::size_t>(n)].feature >= 0) {
      const auto& node = tree[static_cast<std::size_t>(n)];
      n = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    if (tree[static_cast<std::size_t>(n)].label == Label::Attack) ++attack;
  }
  return 2 * attack >= trees_.size() ? Label::Attack : Label::Normal;
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) {
      if (n.feature < 0) {
        nodes.push_back({{"leaf", std::string(capture::to_string(n.label))}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                         {"majority", std::string(capture::to_string(n.label))}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"dimension", dim_}, {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest rf;
  rf.dim_ = j.at("dimension").get<std::size_t>();
  for (const auto& jt : j.at("trees")) {
    Tree tree;
    for (const auto& jn : jt) {
      Node n;
      if (jn.contains("leaf")) {
        n.label = jn.at("leaf").get<std::string>() == "attack" ? Label::Attack : Label::Normal;
      } else {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        n.label = jn.at("majority").get<std::string>() == "attack" ? Label::Attack : Label::Normal;
      }
      tree.push_back(n);
    }
    rf.trees_.push_back(std::move(tree));
  }
  return rf;
}

}  // namespace cosim::ids
