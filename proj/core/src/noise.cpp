#include "noisyembed/noise.hpp"

#include <stdexcept>

#include "noisyembed/rng.hpp"

namespace noisyembed {

namespace {

Label corrupt(Label y, double p, int num_classes, CounterRng& rng) {
  if (rng.uniform() >= p) return y;
  const auto r = static_cast<Label>(rng.below(static_cast<std::size_t>(num_classes - 1)));
  return r >= y ? r + 1 : r;
}

}  // namespace

void NoiseSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("noise: class count K must be at least 2");
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("noise: rate p must lie in [0, 1)");
}

LabeledPointSet inject_noise(const LabeledPointSet& set, const NoiseSpec& spec) {
  spec.validate();
  set.validate();
  if (spec.num_classes != set.num_classes)
    throw std::invalid_argument("noise: spec K differs from the dataset's K");
  if (!set.is_clean()) throw std::invalid_argument("noise: observed labels are already corrupted");

  LabeledPointSet out = set;
  CounterRng rng(spec.seed, 0x6e6f697365ULL);
  for (Index i = 0; i < out.size(); ++i)
    out.observed_labels[i] = corrupt(out.true_labels[i], spec.p, spec.num_classes, rng);
  return out;
}

PairNoiseRates pair_noise_rates(const NoiseSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("noise: class count K must be at least 2");
  if (!(spec.p >= 0.0 && spec.p <= 1.0)) throw std::invalid_argument("noise: rate p must lie in [0, 1]");
  const double p = spec.p;
  const double k1 = static_cast<double>(spec.num_classes - 1);
  const double k2 = static_cast<double>(spec.num_classes - 2);
  PairNoiseRates r;
  r.q_neg = 2.0 * p * (1.0 - p) / k1 + p * p * k2 / (k1 * k1);
  r.q_pos = 2.0 * p * (1.0 - p) + p * p * k2 / k1;
  return r;
}

PairNoiseRates monte_carlo_pair_noise(const NoiseSpec& spec, std::uint64_t trials) {
  spec.validate();
  if (trials == 0) throw std::invalid_argument("noise: trials must be at least 1");
  CounterRng rng(spec.seed, 0x6d63ULL);
  std::uint64_t pos_flips = 0;
  std::uint64_t neg_flips = 0;
  // By symmetry of the uniform model any fixed labels represent their case.
  for (std::uint64_t t = 0; t < trials; ++t) {
    const Label a = corrupt(0, spec.p, spec.num_classes, rng);
    const Label b = corrupt(0, spec.p, spec.num_classes, rng);
    pos_flips += (a != b);
    const Label c = corrupt(0, spec.p, spec.num_classes, rng);
    const Label d = corrupt(1, spec.p, spec.num_classes, rng);
    neg_flips += (c == d);
  }
  const auto n = static_cast<double>(trials);
  return {static_cast<double>(neg_flips) / n, static_cast<double>(pos_flips) / n};
}

}  // namespace noisyembed
