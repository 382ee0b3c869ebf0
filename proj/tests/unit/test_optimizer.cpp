#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "noisyembed/datagen.hpp"
#include "noisyembed/noise.hpp"
#include "noisyembed/optimizer.hpp"

using namespace noisyembed;

namespace {

LabeledPointSet small_data(std::uint64_t seed, int k = 4, int per = 10) {
  SynthSpec s;
  s.num_classes = k;
  s.per_class = per;
  s.dim = 8;
  s.seed = seed;
  return generate(s);
}

TrainConfig small_config(std::size_t steps) {
  TrainConfig tc;
  tc.steps = steps;
  tc.minibatch = {4, 5, 0};
  tc.seed = 3;
  return tc;
}

}  // namespace

TEST_CASE("zero steps returns the initialization") {
  const auto set = small_data(1);
  const auto init = initialize_embeddings(set.size(), 8, {InitMode::random_uniform_sphere, 1, 0.0});
  const auto r = train(ObservedLabels::of(set), init, small_config(0));
  CHECK(r.state == init);
  CHECK(r.log.steps.empty());
  auto tc = small_config(1);
  tc.learning_rate = 0.0;
  CHECK_THROWS(tc.validate(set.size()));
}

TEST_CASE("training is deterministic and keeps rows on the sphere") {
  const auto set = small_data(2);
  const auto init = initialize_embeddings(set.size(), 8, {InitMode::random_uniform_sphere, 4, 0.0});
  const auto a = train(ObservedLabels::of(set), init, small_config(50));
  const auto b = train(ObservedLabels::of(set), init, small_config(50));
  CHECK(a.state == b.state);
  CHECK(a.state.max_norm_deviation() < 1e-12);
  CHECK(a.log.steps.size() == 50);
  auto other = small_config(50);
  other.seed = 4;
  CHECK_FALSE(train(ObservedLabels::of(set), init, other).state == a.state);
}

TEST_CASE("training lowers the minibatch risk") {
  const auto set = small_data(3);
  const auto init = initialize_embeddings(set.size(), 8, {InitMode::random_uniform_sphere, 5, 0.0});
  for (auto family : {LossFamily::triplet, LossFamily::marginal}) {
    auto tc = small_config(300);
    tc.loss.family = family;
    const auto r = train(ObservedLabels::of(set), init, tc);
    auto mean = [&](std::size_t from, std::size_t to) {
      double s = 0.0;
      for (std::size_t i = from; i < to; ++i) s += r.log.steps[i].risk;
      return s / static_cast<double>(to - from);
    };
    CHECK(mean(250, 300) < mean(0, 50));
  }
}

TEST_CASE("trainer only sees observed labels") {
  auto a = inject_noise(small_data(4), {0.3, 4, 1});
  auto b = a;
  std::rotate(b.true_labels.begin(), b.true_labels.begin() + 7, b.true_labels.end());
  const auto init = initialize_embeddings(a.size(), 8, {InitMode::random_uniform_sphere, 6, 0.0});
  CHECK(train(ObservedLabels::of(a), init, small_config(40)).state ==
        train(ObservedLabels::of(b), init, small_config(40)).state);
}

TEST_CASE("snapshots and log csv") {
  const auto set = small_data(5);
  const auto init = initialize_embeddings(set.size(), 8, {InitMode::random_uniform_sphere, 7, 0.0});
  auto tc = small_config(20);
  tc.snapshot_every = 5;
  const auto r = train(ObservedLabels::of(set), init, tc);
  CHECK(r.log.snapshots.size() == 4);
  std::ostringstream out;
  r.log.write_csv(out);
  const std::string csv = out.str();
  CHECK(csv.rfind("step,risk,active_items,skipped_pairs\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
}

TEST_CASE("random initialization is uniform on the sphere") {
  const auto e = initialize_embeddings(10000, 16, {InitMode::random_uniform_sphere, 9, 0.0});
  CHECK(e.max_norm_deviation() < 1e-12);
  std::vector<double> mean(16, 0.0);
  for (Index i = 0; i < e.size(); ++i)
    for (std::size_t t = 0; t < 16; ++t) mean[t] += e.row(i)[t] / 10000.0;
  CHECK(norm(mean) < 0.05);
}

TEST_CASE("feature initialization") {
  const auto set = small_data(6);
  const auto exact = initialize_embeddings(set.size(), 8, {InitMode::from_features, 1, 0.0}, &set);
  for (Index i = 0; i < set.size(); ++i) CHECK(dot(exact.row(i), set.feature(i)) == doctest::Approx(1.0));

  const auto mixed = initialize_embeddings(set.size(), 8, {InitMode::from_features, 1, 0.2}, &set);
  double mean_cos = 0.0;
  for (Index i = 0; i < set.size(); ++i) mean_cos += dot(mixed.row(i), set.feature(i)) / static_cast<double>(set.size());
  CHECK(mean_cos > 0.8);
  CHECK(mean_cos < 1.0);

  CHECK_THROWS(initialize_embeddings(set.size(), 8, {InitMode::from_features, 1, 0.0}, nullptr));
  CHECK_THROWS(initialize_embeddings(set.size(), 4, {InitMode::from_features, 1, 0.0}, &set));
  CHECK(parse_init_mode(to_string(InitMode::from_features)) == InitMode::from_features);
}
