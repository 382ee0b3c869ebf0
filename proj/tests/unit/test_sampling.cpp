#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "noisyembed/datagen.hpp"
#include "noisyembed/noise.hpp"
#include "noisyembed/optimizer.hpp"
#include "noisyembed/sampling.hpp"

using namespace noisyembed;

namespace {

// Points on the unit circle at given chord distances from point 0.
EmbeddingState circle(const std::vector<double>& chords) {
  std::vector<double> v{1.0, 0.0};
  for (double c : chords) {
    const double th = 2.0 * std::asin(c / 2.0);
    v.push_back(std::cos(th));
    v.push_back(std::sin(th));
  }
  return EmbeddingState::normalized(2, v);
}

}  // namespace

TEST_CASE("positive pairs are enumerated once each") {
  std::vector<Label> labels{0, 1, 0, 0, 1, 2};
  const auto pairs = enumerate_positive_pairs(labels);
  CHECK(pairs.size() == 4);  // C(3,2) + C(2,2)
  std::set<IndexPair> seen(pairs.begin(), pairs.end());
  CHECK(seen.size() == pairs.size());
  for (auto [i, j] : pairs) {
    CHECK(i < j);
    CHECK(labels[i] == labels[j]);
  }
}

TEST_CASE("fixed semi-hard picks the closest negative beyond the positive") {
  // point 1 is the positive at 0.5; negatives at 0.4, 0.9, 1.5.
  const auto emb = circle({0.5, 0.4, 0.9, 1.5});
  const std::vector<Index> cands{2, 3, 4};
  LossConfig cfg;
  CHECK(fixed_semi_hard_negative(emb, 0, 1, cands, cfg) == Index{3});
  const std::vector<Index> only_near{2};
  CHECK_FALSE(fixed_semi_hard_negative(emb, 0, 1, only_near, cfg).has_value());
}

TEST_CASE("fixed semi-hard breaks ties by index") {
  const auto emb = circle({0.5, 0.9, 0.9});
  const std::vector<Index> cands{3, 2};
  CHECK(fixed_semi_hard_negative(emb, 0, 1, cands, LossConfig{}) == Index{2});
}

TEST_CASE("random semi-hard draws uniformly among margin violators") {
  const auto emb = circle({0.5, 0.4, 0.6, 1.5});
  LossConfig cfg;
  cfg.alpha = 0.2;
  const std::vector<Index> cands{2, 3, 4};
  CounterRng rng(1);
  std::map<Index, int> hits;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) ++hits[*random_semi_hard_negative(emb, 0, 1, cands, cfg, rng)];
  CHECK(hits.count(4) == 0);
  CHECK(std::abs(hits[2] - draws / 2) < 4 * std::sqrt(draws * 0.25));

  const std::vector<Index> far{4};
  CHECK_FALSE(random_semi_hard_negative(emb, 0, 1, far, cfg, rng).has_value());
}

TEST_CASE("minibatch invariants") {
  SynthSpec s;
  s.seed = 4;
  auto set = inject_noise(generate(s), {0.3, s.num_classes, 5});
  const auto emb = initialize_embeddings(set.size(), 16, {InitMode::random_uniform_sphere, 2, 0.0});
  MinibatchSpec spec{6, 5, 0};
  for (auto mining : {Mining::random_semi_hard, Mining::fixed_semi_hard, Mining::exhaustive}) {
    LossConfig cfg;
    cfg.mining = mining;
    CounterRng rng(8);
    SelectionLog log;
    const auto mb = build_minibatch_triplets(ObservedLabels::of(set), emb, spec, cfg, rng, &log);
    CHECK(mb.members.size() == 30);
    std::map<Label, int> per_class;
    for (Index m : mb.members) ++per_class[set.observed_labels[m]];
    CHECK(per_class.size() == 6);
    for (auto [c, k] : per_class) CHECK(k == 5);
    CHECK(mb.positive_pairs == 6 * 10);
    std::set<Index> members(mb.members.begin(), mb.members.end());
    for (const auto& t : mb.triplets) {
      CHECK(set.observed_labels[t.anchor] == set.observed_labels[t.positive]);
      CHECK(set.observed_labels[t.anchor] != set.observed_labels[t.negative]);
      CHECK(members.count(t.negative) == 1);
    }
    if (mining != Mining::exhaustive) {
      CHECK(mb.triplets.size() + mb.skipped_pairs == mb.positive_pairs);
      CHECK(log.total_negative_selections() == mb.triplets.size());
    }
  }
}

TEST_CASE("minibatch is deterministic and samples small classes with replacement") {
  LabeledPointSet set;
  set.num_classes = 3;
  set.true_labels = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2};
  set.observed_labels = set.true_labels;
  const auto emb = initialize_embeddings(set.size(), 4, {InitMode::random_uniform_sphere, 1, 0.0});
  MinibatchSpec spec{3, 3, 0};
  CounterRng a(5), b(5);
  const auto x = build_minibatch_triplets(ObservedLabels::of(set), emb, spec, LossConfig{}, a);
  const auto y = build_minibatch_triplets(ObservedLabels::of(set), emb, spec, LossConfig{}, b);
  CHECK(x.members == y.members);
  CHECK(x.triplets == y.triplets);
  CHECK(x.replacement_events == 1);

  CHECK_THROWS(MinibatchSpec{1, 3, 0}.validate(10));
  MinibatchSpec four{4, 2, 0};
  CounterRng c(1);
  CHECK_THROWS(build_minibatch_triplets(ObservedLabels::of(set), emb, four, LossConfig{}, c));
}

TEST_CASE("selection log accounting") {
  SelectionLog log;
  const std::vector<Index> cands{3, 4};
  log.record_negative(0, cands, Index{3});
  log.record_negative(0, cands, std::nullopt);
  const auto& e = log.negatives().at({0, 3});
  CHECK(e.count == 1);
  CHECK(e.baseline == doctest::Approx(1.0));
  CHECK(log.negatives().at({0, 4}).count == 0);

  SelectionLog other;
  other.record_negative(0, cands, Index{4});
  log.merge(other);
  CHECK(log.total_negative_selections() == 2);
  CHECK(log.negatives().at({0, 4}).baseline == doctest::Approx(1.5));

  std::ostringstream csv;
  log.write_csv(csv);
  CHECK(csv.str() == "anchor,negative,count\n0,3,1\n0,4,1\n");
}

TEST_CASE("uniform selection has no skew") {
  SelectionLog log;
  for (Index a = 0; a < 10; ++a) {
    const std::vector<Index> cand{a + 100};
    log.record_negative(a, cand, a + 100);
  }
  const auto s = estimate_skew(log);
  CHECK(s.eta == 1.0);
  CHECK(s.eta_minus == 1.0);
  CHECK(s.gamma == 1.0);
  CHECK_THROWS(estimate_skew(SelectionLog{}));
}

TEST_CASE("a pair selected at twice its share gives eta = 2") {
  SelectionLog log;
  // Pair (0,1) takes both draws over a shared candidate set; (0,2) none.
  const std::vector<Index> shared{1, 2};
  log.record_negative(0, shared, Index{1});
  log.record_negative(0, shared, Index{1});
  for (Index a = 10; a < 18; ++a) {
    const std::vector<Index> one{a + 100};
    log.record_negative(a, one, a + 100);
  }
  const auto s = estimate_skew(log);
  CHECK(s.eta == doctest::Approx(2.0));
  CHECK(s.eta_minus == doctest::Approx(1.0));
}

TEST_CASE("positive skew lowers gamma") {
  SelectionLog log;
  for (Index a = 0; a < 4; ++a) {
    const std::vector<Index> one{a + 50};
    log.record_negative(a, one, a + 50);
  }
  // Half the positive opportunities are used, all on one pair.
  log.record_positive(0, 1, true);
  log.record_positive(0, 1, true);
  log.record_positive(2, 3, false);
  log.record_positive(4, 5, false);
  const auto s = estimate_skew(log);
  CHECK(s.eta_plus == doctest::Approx(2.0));
  CHECK(s.gamma == doctest::Approx(0.5));
}

TEST_CASE("fixed semi-hard is more skewed than random semi-hard on the same state") {
  SynthSpec s;
  s.seed = 21;
  auto set = inject_noise(generate(s), {0.1, s.num_classes, 22});
  TrainConfig tc;
  tc.steps = 100;
  tc.seed = 23;
  tc.minibatch = {10, 5, 0};
  auto trained = train(ObservedLabels::of(set), initialize_embeddings(set.size(), 16, {InitMode::random_uniform_sphere, 24, 0.0}), tc);
  MinibatchSpec spec{10, 5, 0};
  LossConfig rnd, fix;
  fix.mining = Mining::fixed_semi_hard;
  const auto lr = collect_selection_log(ObservedLabels::of(set), trained.state, spec, rnd, 2000, 25);
  const auto lf = collect_selection_log(ObservedLabels::of(set), trained.state, spec, fix, 2000, 25);
  CHECK(estimate_skew(lf).eta > estimate_skew(lr).eta);
}
