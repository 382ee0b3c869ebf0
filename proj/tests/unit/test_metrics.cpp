#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "noisyembed/datagen.hpp"
#include "noisyembed/metrics.hpp"
#include "noisyembed/optimizer.hpp"
#include "noisyembed/rng.hpp"

using namespace noisyembed;

namespace {

// Brute force: sort all other points, look at the first k.
double brute_recall(const EmbeddingState& e, const std::vector<Label>& y, int k) {
  std::size_t hits = 0;
  for (Index q = 0; q < e.size(); ++q) {
    std::vector<std::pair<double, Index>> order;
    for (Index j = 0; j < e.size(); ++j)
      if (j != q) order.emplace_back(pairwise_distance(e, q, j), j);
    std::sort(order.begin(), order.end());
    bool hit = false;
    for (int t = 0; t < k; ++t) hit = hit || y[order[static_cast<std::size_t>(t)].second] == y[q];
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(e.size());
}

// NMI with base-2 logs; the normalization makes the base irrelevant.
double nmi_base2(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1 / n;
    pa[a[i]] += 1 / n;
    pb[b[i]] += 1 / n;
  }
  double mi = 0, ha = 0, hb = 0;
  for (auto [k, v] : joint) mi += v * std::log2(v / (pa[k.first] * pb[k.second]));
  for (auto [k, v] : pa) ha -= v * std::log2(v);
  for (auto [k, v] : pb) hb -= v * std::log2(v);
  return mi / std::sqrt(ha * hb);
}

}  // namespace

TEST_CASE("recall matches brute force and is monotone in k") {
  CounterRng rng(1);
  const auto e = initialize_embeddings(120, 4, {InitMode::random_uniform_sphere, 3, 0.0});
  std::vector<Label> y(120);
  for (auto& l : y) l = static_cast<Label>(rng.below(6));
  const std::vector<int> ks{1, 2, 5, 10, 50};
  const auto r = recall_at_k(e, y, ks);
  double prev = 0.0;
  for (int k : ks) {
    CHECK(r.at(k) == doctest::Approx(brute_recall(e, y, k)));
    CHECK(r.at(k) >= prev);
    prev = r.at(k);
  }
}

TEST_CASE("recall special constructions") {
  // Duplicated points.
  std::vector<double> v;
  std::vector<Label> y;
  CounterRng rng(2);
  for (int i = 0; i < 30; ++i) {
    std::vector<double> p(3);
    for (auto& x : p) x = rng.normal();
    v.insert(v.end(), p.begin(), p.end());
    v.insert(v.end(), p.begin(), p.end());
    y.push_back(i);
    y.push_back(i);
  }
  const int one[] = {1};
  CHECK(recall_at_k(EmbeddingState::normalized(3, v), y, one).at(1) == 1.0);

  // Antipodal same-class pairs and nothing else in the class.
  const auto anti = EmbeddingState::normalized(1, {1.0, -1.0, 1.0, -1.0});
  const std::vector<Label> ya{0, 0, 1, 1};
  CHECK(recall_at_k(anti, ya, one).at(1) == 0.0);

  const int bad[] = {4};
  CHECK_THROWS(recall_at_k(anti, ya, bad));
}

TEST_CASE("shuffled labels give chance recall") {
  SynthSpec s;
  s.spread = 8.0;
  s.per_class = 200;
  const auto set = generate(s);
  auto y = set.true_labels;
  CounterRng rng(4);
  std::shuffle(y.begin(), y.end(), rng);
  const int one[] = {1};
  const double r = recall_at_k(EmbeddingState(set.feature_dim, set.features), y, one).at(1);
  const double sigma = std::sqrt(0.1 * 0.9 / static_cast<double>(set.size()));
  CHECK(std::abs(r - 0.1) <= 3 * sigma);
  CHECK(recall_at_k(EmbeddingState(set.feature_dim, set.features), set.true_labels, one).at(1) == 1.0);
}

TEST_CASE("nmi properties") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2, 2, 1};
  const std::vector<int> b{2, 2, 0, 0, 1, 1, 1, 0};
  CHECK(nmi(a, a) == doctest::Approx(1.0));
  CHECK(nmi(a, b) == doctest::Approx(1.0));
  const std::vector<int> c{0, 1, 0, 1, 0, 1, 0, 0};
  CHECK(nmi(a, c) == doctest::Approx(nmi_base2(a, c)));
  const std::vector<int> one_a(8, 0), one_b(8, 3);
  CHECK(nmi(one_a, one_b) == 1.0);
  CHECK(nmi(one_a, a) == 0.0);
  CHECK_THROWS(nmi(a, std::vector<int>{0, 1}));

  CounterRng rng(3);
  std::vector<int> x(10000), z(10000);
  for (auto& v : x) v = static_cast<int>(rng.below(10));
  for (auto& v : z) v = static_cast<int>(rng.below(10));
  CHECK(nmi(x, z) <= 0.02);
}

TEST_CASE("kmeans") {
  SynthSpec s;
  s.num_classes = 3;
  s.per_class = 40;
  s.spread = 10.0;
  s.dim = 6;
  const auto set = generate(s);
  const EmbeddingState e(set.feature_dim, set.features);
  const auto km = kmeans(e, 3, 5, 1);
  CHECK(nmi(km.assignment, set.true_labels) == doctest::Approx(1.0));
  CHECK(km.centroids.size() == 18);

  const auto all = kmeans(e, static_cast<int>(e.size()), 1, 1);
  CHECK(all.inertia == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kmeans(e, 3, 5, 1).assignment == km.assignment);
  CHECK_THROWS(kmeans(e, 0, 1, 1));
  CHECK_THROWS(kmeans(e, 3, 0, 1));
}

TEST_CASE("evaluate bundles recall and nmi") {
  SynthSpec s;
  s.num_classes = 4;
  s.per_class = 20;
  s.spread = 10.0;
  const auto set = generate(s);
  const auto r = evaluate(EmbeddingState(set.feature_dim, set.features), set.true_labels, 4, {{1, 10}, 3, 0});
  CHECK(r.recall_at.at(1) == 1.0);
  CHECK(r.nmi == doctest::Approx(1.0));
}
