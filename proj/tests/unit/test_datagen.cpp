#include <doctest.h>

#include <map>
#include <set>

#include "noisyembed/datagen.hpp"
#include "noisyembed/metrics.hpp"

using namespace noisyembed;

TEST_CASE("generated sets are clean, grouped and unit norm") {
  SynthSpec s;
  s.seed = 3;
  const auto set = generate(s);
  CHECK(set.size() == 500);
  CHECK(set.is_clean());
  CHECK(set.feature_dim == 16);
  CHECK_NOTHROW(set.validate());
  for (Index i = 0; i < set.size(); ++i) {
    CHECK(set.true_labels[i] == static_cast<Label>(i / 50));
    CHECK(norm(set.feature(i)) == doctest::Approx(1.0));
  }
  CHECK(generate(s).features == set.features);
  s.seed = 4;
  CHECK(generate(s).features != set.features);
  CHECK(class_directions(s).size() == 10 * 16);
}

TEST_CASE("spread controls separability") {
  SynthSpec s;
  const int one[] = {1};
  s.spread = 10.0;
  auto set = generate(s);
  CHECK(recall_at_k(EmbeddingState(16, set.features), set.true_labels, one).at(1) == 1.0);
  s.spread = 0.01;
  set = generate(s);
  CHECK(recall_at_k(EmbeddingState(16, set.features), set.true_labels, one).at(1) < 0.2);
}

TEST_CASE("spec validation") {
  SynthSpec s;
  s.num_classes = 1;
  CHECK_THROWS(s.validate());
  s = {};
  s.spread = 0.0;
  CHECK_THROWS(s.validate());
  s = {};
  s.per_class = 1;
  CHECK_THROWS(s.validate());
}

TEST_CASE("stratified subsample") {
  SynthSpec s;
  const auto set = generate(s);
  const auto full = subsample_clean(set, 1.0, 1);
  CHECK(full.kept.size() == set.size());

  const auto half = subsample_clean(set, 0.5, 1);
  CHECK(half.set.size() == 250);
  std::map<Label, int> per;
  for (auto y : half.set.true_labels) ++per[y];
  for (auto [y, c] : per) CHECK(c == 25);
  CHECK(std::is_sorted(half.kept.begin(), half.kept.end()));
  CHECK(std::set<Index>(half.kept.begin(), half.kept.end()).size() == half.kept.size());
  for (std::size_t i = 0; i < half.kept.size(); ++i)
    CHECK(half.set.true_labels[i] == set.true_labels[half.kept[i]]);
  CHECK(subsample_clean(set, 0.5, 1).kept == half.kept);
  CHECK(subsample_clean(set, 0.5, 2).kept != half.kept);

  const auto tiny = subsample_clean(set, 0.01, 1);
  std::set<Label> classes(tiny.set.true_labels.begin(), tiny.set.true_labels.end());
  CHECK(classes.size() == 10);
  CHECK(tiny.restored_classes == 5);
  CHECK_THROWS(subsample_clean(set, 0.0, 1));
}
