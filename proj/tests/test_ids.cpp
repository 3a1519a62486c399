#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "cosim/ids.hpp"
#include "oracles.hpp"

using namespace cosim;
using namespace cosim::ids;
using capture::LabeledRecord;

namespace {

Matrix random_points(std::size_t n, std::size_t d, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(n, Row(d));
  for (auto& r : m) {
    for (auto& v : r) v = u(rng);
  }
  return m;
}

std::vector<Label> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<Label> y(n);
  for (auto& l : y) l = rng() % 2 ? Label::Attack : Label::Normal;
  return y;
}

LabeledRecord rec(std::string src, net::Protocol p, std::uint32_t len, Label l) {
  LabeledRecord r{0, std::move(src), "10.0.0.1", p, len, l, std::nullopt};
  if (l == Label::Attack) r.stage = attack::Stage::S1Scan;
  return r;
}

std::vector<LabeledRecord> toy_records() {
  std::vector<LabeledRecord> out;
  for (int i = 0; i < 40; ++i) out.push_back(rec("10.0.1.11", net::Protocol::Scada, 61, Label::Normal));
  for (int i = 0; i < 40; ++i) out.push_back(rec("10.0.1.12", net::Protocol::Scada, 49, Label::Normal));
  for (int i = 0; i < 30; ++i) {
    out.push_back(rec("10.0.0.66", net::Protocol::ScanProbe, 60, Label::Attack));
  }
  return out;
}

}  // namespace

TEST_SUITE("ids") {

TEST_CASE("one unbootstrapped full-depth tree memorizes its training set") {
  std::mt19937_64 rng(3);
  const auto x = random_points(60, 3, rng);
  const auto y = random_labels(60, rng);
  RfParams p;
  p.trees = 1;
  p.bootstrap = false;
  p.max_depth = 64;
  p.max_features = 3;
  const auto rf = RandomForest::fit(x, y, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(rf.predict(x[i]) == y[i]);
}

TEST_CASE("linearly separable data is fitted perfectly") {
  std::mt19937_64 rng(4);
  const auto x = random_points(200, 2, rng);
  std::vector<Label> y;
  for (const auto& r : x) y.push_back(r[0] + r[1] > 1.0 ? Label::Attack : Label::Normal);
  const auto rf = RandomForest::fit(x, y, RfParams{});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(rf.predict(x[i]) == y[i]);
}

TEST_CASE("forests are reproducible from their seed") {
  std::mt19937_64 rng(5);
  const auto x = random_points(100, 4, rng);
  const auto y = random_labels(100, rng);
  RfParams p;
  p.seed = 99;
  CHECK(RandomForest::fit(x, y, p).to_json() == RandomForest::fit(x, y, p).to_json());
  p.trees = 5;
  auto q = p;
  q.seed = 100;
  CHECK(RandomForest::fit(x, y, p).to_json() != RandomForest::fit(x, y, q).to_json());
}

TEST_CASE("single-class training is refused") {
  Matrix x{{0.0}, {1.0}};
  CHECK_THROWS_AS(RandomForest::fit(x, std::vector<Label>{Label::Normal, Label::Normal}, RfParams{}), IdsError);
}

TEST_CASE("knn k=1 returns the label of an identical point") {
  Matrix x{{0.0, 0.0}, {1.0, 1.0}, {5.0, 5.0}};
  std::vector<Label> y{Label::Normal, Label::Attack, Label::Normal};
  const auto m = KnnClassifier::fit(x, y, KnnParams{1});
  CHECK(m.predict(std::vector<double>{1.0, 1.0}) == Label::Attack);
}

TEST_CASE("knn k=3 majority of two attacks wins") {
  Matrix x{{0.0}, {0.1}, {0.3}, {10.0}};
  std::vector<Label> y{Label::Attack, Label::Attack, Label::Normal, Label::Normal};
  CHECK(KnnClassifier::fit(x, y, KnnParams{3}).predict(std::vector<double>{0.05}) == Label::Attack);
}

TEST_CASE("knn tied vote resolves to attack") {
  Matrix x{{0.0}, {1.0}, {50.0}};
  std::vector<Label> y{Label::Attack, Label::Normal, Label::Normal};
  CHECK(KnnClassifier::fit(x, y, KnnParams{2}).predict(std::vector<double>{0.5}) == Label::Attack);
}

TEST_CASE("knn equals the brute-force oracle on 200 random points") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto x = random_points(200, 3, rng);
    const auto y = random_labels(200, rng);
    const auto m = KnnClassifier::fit(x, y, KnnParams{5});
    const auto queries = random_points(200, 3, rng);
    for (const auto& q : queries) CHECK(m.predict(q) == oracle::knn_brute(x, y, q, 5));
    for (const auto& q : x) CHECK(m.predict(q) == oracle::knn_brute(x, y, q, 5));
  }
}

TEST_CASE("knn on a coarse grid with many distance ties matches the oracle") {
  std::mt19937_64 rng(11);
  Matrix x;
  for (int i = 0; i < 200; ++i) x.push_back({static_cast<double>(rng() % 4), static_cast<double>(rng() % 4)});
  const auto y = random_labels(200, rng);
  const auto m = KnnClassifier::fit(x, y, KnnParams{5});
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const std::vector<double> q{a + 0.5, b * 1.0};
      CHECK(m.predict(q) == oracle::knn_brute(x, y, q, 5));
    }
  }
}

TEST_CASE("knn refuses k larger than the training set") {
  Matrix x{{0.0}, {1.0}};
  CHECK_THROWS_AS(KnnClassifier::fit(x, std::vector<Label>{Label::Normal, Label::Attack}, KnnParams{3}), IdsError);
}

TEST_CASE("lof matches the direct definition within 1e-9 on 30-point sets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const auto x = random_points(30, 2, rng);
    const LofParams p{5, 0.99};
    const auto m = LofDetector::fit(x, p);
    const oracle::LofOracle o{x, 5};
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::abs(m.training_scores()[i] - o.lof(x[i], static_cast<long>(i))) < 1e-9);
    }
    for (const auto& q : random_points(20, 2, rng, -0.5, 1.5)) CHECK(std::abs(m.score(q) - o.lof(q)) < 1e-9);
  }
}

TEST_CASE("lof near 1 inside a uniform grid, above 2 far away") {
  Matrix x;
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) x.push_back({i * 0.1, j * 0.1});
  }
  const auto m = LofDetector::fit(x, LofParams{8, 0.99});
  const oracle::LofOracle o{x, 8};
  const std::vector<double> inside{0.3, 0.3};
  CHECK(std::abs(m.score(inside) - 1.0) < 0.2);
  CHECK(std::abs(m.score(inside) - o.lof(inside)) < 1e-9);
  const std::vector<double> far{6.0, 6.0};  // 10x the cluster diameter
  CHECK(m.score(far) > 2.0);
  CHECK(m.is_anomaly(far));
}

TEST_CASE("lof survives duplicate-collapsed neighbourhoods") {
  Matrix x(30, Row{1.0, 1.0});
  x.push_back({2.0, 2.0});
  const auto m = LofDetector::fit(x, LofParams{5, 0.99});
  CHECK(std::isfinite(m.score(std::vector<double>{1.0, 1.0})));
  CHECK(std::isfinite(m.score(std::vector<double>{3.0, 3.0})));
  CHECK(m.score(std::vector<double>{3.0, 3.0}) > m.score(std::vector<double>{1.0, 1.0}));
}

TEST_CASE("isolation forest is deterministic and ranks outliers higher") {
  std::mt19937_64 rng(8);
  auto x = random_points(300, 2, rng, 0.0, 1.0);
  auto second = random_points(300, 2, rng, 5.0, 6.0);
  x.insert(x.end(), second.begin(), second.end());
  IForestParams p;
  p.seed = 21;
  const auto a = IsolationForest::fit(x, p);
  const auto b = IsolationForest::fit(x, p);
  const std::vector<double> outlier{20.0, -10.0}, interior{0.5, 0.5};
  CHECK(a.score(outlier) == b.score(outlier));
  CHECK(a.to_json() == b.to_json());
  CHECK(a.score(outlier) > a.score(interior));
}

TEST_CASE("isolation forest with subsample 1 scores everything alike") {
  std::mt19937_64 rng(9);
  const auto x = random_points(50, 2, rng);
  IForestParams p;
  p.subsample = 1;
  const auto m = IsolationForest::fit(x, p);
  CHECK(m.score(std::vector<double>{0.1, 0.1}) == m.score(std::vector<double>{100.0, -3.0}));
}

TEST_CASE("average path length follows the BST formula") {
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == 1.0);
  const double expect = 2.0 * (std::log(255.0) + 0.5772156649) - 2.0 * 255.0 / 256.0;
  CHECK(average_path_length(256) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("semi-supervised models flag at most q + 2pp of their own training set") {
  std::mt19937_64 rng(12);
  const auto x = random_points(400, 3, rng);
  const auto lof = LofDetector::fit(x, LofParams{20, 0.99});
  IForestParams ip;
  ip.seed = 4;
  const auto iforest = IsolationForest::fit(x, ip);
  int lof_flags = 0, if_flags = 0;
  for (const auto& r : x) {
    lof_flags += lof.is_anomaly(r);
    if_flags += iforest.is_anomaly(r);
  }
  CHECK(lof_flags <= 0.03 * 400);
  CHECK(if_flags <= 0.03 * 400);
}

TEST_CASE("semi-supervised training refuses attack records and names them") {
  auto data = toy_records();
  try {
    train(Algorithm::Lof, data, IdsParams{});
    FAIL("expected PurityViolation");
  } catch (const PurityViolation& e) {
    CHECK(e.offending().size() == 30);
    CHECK(e.offending().front() == 80);
  }
  CHECK_THROWS_AS(train(Algorithm::IsolationForest, data, IdsParams{}), PurityViolation);
}

TEST_CASE("predict handles empty input and refuses wrong dimensions") {
  const auto m = train(Algorithm::RandomForest, toy_records(), IdsParams{});
  CHECK(m.predict(Matrix{}).empty());
  CHECK_THROWS_AS(m.predict(Matrix{{1.0, 2.0}}), IdsError);
}

TEST_CASE("supervised models reproduce separable training labels") {
  const auto data = toy_records();
  for (auto a : {Algorithm::RandomForest, Algorithm::Knn}) {
    const auto m = train(a, data, IdsParams{});
    CHECK(m.predict(data) == labels_of(data));
  }
}

TEST_CASE("models survive a save and load round trip") {
  const auto data = toy_records();
  std::vector<LabeledRecord> normal(data.begin(), data.begin() + 80);
  const auto dir = std::filesystem::temp_directory_path() / "cosim_model_test";
  std::filesystem::create_directories(dir);
  for (auto a : {Algorithm::RandomForest, Algorithm::Knn, Algorithm::Lof, Algorithm::IsolationForest}) {
    const auto m = train(a, is_supervised(a) ? std::span<const LabeledRecord>(data) : normal, IdsParams{});
    const auto path = (dir / (std::string(to_string(a)) + ".json")).string();
    m.save(path);
    const auto back = ClassifierModel::load(path);
    CHECK(back.to_json() == m.to_json());
    CHECK(back.predict(data) == m.predict(data));
    CHECK(back.decision_threshold() == m.decision_threshold());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("predictions are per record") {
  const auto data = toy_records();
  std::vector<LabeledRecord> normal(data.begin(), data.begin() + 80);
  const auto m = train(Algorithm::Lof, normal, IdsParams{});
  const auto all = m.predict(data);
  std::vector<LabeledRecord> subset;
  std::vector<Label> expect;
  for (std::size_t i = 0; i < data.size(); i += 3) {
    subset.push_back(data[i]);
    expect.push_back(all[i]);
  }
  CHECK(m.predict(subset) == expect);
}

TEST_CASE("evaluate: hand-computed confusion counts") {
  std::vector<Label> truth, pred;
  for (int i = 0; i < 8; ++i) truth.push_back(Label::Attack), pred.push_back(Label::Attack);
  for (int i = 0; i < 2; ++i) truth.push_back(Label::Normal), pred.push_back(Label::Attack);
  for (int i = 0; i < 2; ++i) truth.push_back(Label::Attack), pred.push_back(Label::Normal);
  for (int i = 0; i < 5; ++i) truth.push_back(Label::Normal), pred.push_back(Label::Normal);
  const auto r = evaluate(pred, truth);
  CHECK(r.tp == 8);
  CHECK(r.fp == 2);
  CHECK(r.fn == 2);
  CHECK(r.tn == 5);
  CHECK(r.precision == doctest::Approx(0.8));
  CHECK(r.recall == doctest::Approx(0.8));
  CHECK(r.f1 == doctest::Approx(0.8));
}

TEST_CASE("evaluate: perfect, all-normal and mismatched inputs") {
  const std::vector<Label> truth{Label::Attack, Label::Normal, Label::Attack};
  CHECK(evaluate(truth, truth).f1 == 1.0);
  const std::vector<Label> none(3, Label::Normal);
  const auto r = evaluate(none, truth);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
  CHECK_THROWS_AS(evaluate(none, std::vector<Label>{Label::Attack}), IdsError);
}

TEST_CASE("F1 equals 2PR/(P+R) on random confusion matrices") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<Label> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng() % 3 ? Label::Attack : Label::Normal;
      b[i] = rng() % 2 ? Label::Attack : Label::Normal;
    }
    const auto r = evaluate(a, b);
    CHECK(r.f1 == doctest::Approx(oracle::f1_from_counts(r.tp, r.fp, r.fn)).epsilon(1e-12));
    CHECK(r.f1 >= 0.0);
    CHECK(r.f1 <= 1.0);
  }
}

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.5) == 3.0);
  CHECK(quantile({0.0, 10.0}, 0.99) == doctest::Approx(9.9));
  CHECK(quantile({7.0}, 0.99) == 7.0);
}

TEST_CASE("algorithm names parse case-insensitively") {
  CHECK(parse_algorithm("rf") == Algorithm::RandomForest);
  CHECK(parse_algorithm("KNN") == Algorithm::Knn);
  CHECK(parse_algorithm("IForest") == Algorithm::IsolationForest);
  CHECK_FALSE(parse_algorithm("svm"));
}

}
