#include <doctest.h>

#include <cmath>
#include <vector>

#include "noisyembed/datagen.hpp"
#include "noisyembed/noise.hpp"

using namespace noisyembed;

namespace {

// Exact flip rates by enumerating both labels' outcomes.
PairNoiseRates enumerate_rates(double p, int k) {
  auto prob = [&](int from, int to) { return from == to ? 1.0 - p : p / (k - 1); };
  PairNoiseRates r;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      r.q_pos += prob(0, a) * prob(0, b) * (a != b);
      r.q_neg += prob(0, a) * prob(1, b) * (a == b);
    }
  return r;
}

}  // namespace

TEST_CASE("closed form matches enumeration") {
  for (int k = 2; k <= 8; ++k)
    for (double p : {0.0, 0.05, 0.3, 0.5, 0.9}) {
      const auto want = enumerate_rates(p, k);
      const auto got = pair_noise_rates({p, k, 0});
      CHECK(got.q_pos == doctest::Approx(want.q_pos).epsilon(1e-13));
      CHECK(got.q_neg == doctest::Approx(want.q_neg).epsilon(1e-13));
    }
}

TEST_CASE("flip rates at p = 0.3, K = 10") {
  const auto r = pair_noise_rates({0.3, 10, 0});
  CHECK(r.q_pos == doctest::Approx(0.5));
  CHECK(r.q_neg == doctest::Approx(0.42 / 9 + 0.09 * 8 / 81.0));
  CHECK(r.rate(PairLabel::positive) == r.q_pos);
  const auto zero = pair_noise_rates({0.0, 10, 0});
  CHECK(zero.q_pos == 0.0);
  CHECK(zero.q_neg == 0.0);
}

TEST_CASE("monte carlo agrees with the closed form") {
  for (int k : {3, 10}) {
    const NoiseSpec spec{0.3, k, 5};
    const auto mc = monte_carlo_pair_noise(spec, 100000);
    const auto cf = pair_noise_rates(spec);
    for (auto [e, q] : {std::pair{mc.q_pos, cf.q_pos}, std::pair{mc.q_neg, cf.q_neg}})
      CHECK(std::abs(e - q) <= 4.0 * std::sqrt(q * (1 - q) / 100000) + 1e-12);
  }
}

TEST_CASE("noise spec validation") {
  CHECK_THROWS(NoiseSpec{-0.1, 3, 0}.validate());
  CHECK_THROWS(NoiseSpec{1.0, 3, 0}.validate());
  CHECK_THROWS(NoiseSpec{0.1, 1, 0}.validate());
}

TEST_CASE("inject_noise flips at rate p and uniformly over other classes") {
  SynthSpec s;
  s.num_classes = 5;
  s.per_class = 4000;
  s.dim = 4;
  const auto clean = generate(s);
  const auto noisy = inject_noise(clean, {0.3, 5, 9});
  CHECK(noisy.true_labels == clean.true_labels);

  std::vector<double> dest(5, 0.0);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < clean.size(); ++i)
    if (noisy.observed_labels[i] != clean.true_labels[i]) {
      ++flips;
      if (clean.true_labels[i] == 0) dest[static_cast<std::size_t>(noisy.observed_labels[i])] += 1;
    }
  const double n = static_cast<double>(clean.size());
  CHECK(std::abs(flips / n - 0.3) < 4 * std::sqrt(0.21 / n));
  CHECK(dest[0] == 0);
  const double from0 = dest[1] + dest[2] + dest[3] + dest[4];
  for (int c = 1; c < 5; ++c) CHECK(std::abs(dest[static_cast<std::size_t>(c)] - from0 / 4) < 4 * std::sqrt(from0 * 3.0 / 16));

  CHECK(inject_noise(clean, {0.3, 5, 9}).observed_labels == noisy.observed_labels);
  CHECK(inject_noise(clean, {0.3, 5, 10}).observed_labels != noisy.observed_labels);
  CHECK(inject_noise(clean, {0.0, 5, 9}).is_clean());
}

TEST_CASE("inject_noise rejects a class-count mismatch") {
  SynthSpec s;
  s.num_classes = 3;
  s.per_class = 2;
  s.dim = 2;
  CHECK_THROWS(inject_noise(generate(s), {0.2, 4, 0}));
}
