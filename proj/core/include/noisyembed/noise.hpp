#pragma once

#include <cstdint>

#include "noisyembed/core.hpp"

namespace noisyembed {

/// Uniform sample-label noise: keep the label with probability 1 - p, else
/// replace it by one of the other K - 1 classes chosen uniformly.
struct NoiseSpec {
  double p = 0.0;
  int num_classes = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Probability that a pair label flips, per true pair label.
struct PairNoiseRates {
  double q_neg = 0.0;  ///< negative pair observed as positive
  double q_pos = 0.0;  ///< positive pair observed as negative

  [[nodiscard]] double rate(PairLabel t) const { return t == PairLabel::positive ? q_pos : q_neg; }
};

/// Corrupts observed_labels of a clean set. true_labels are untouched and the
/// result depends only on (set, spec.seed).
LabeledPointSet inject_noise(const LabeledPointSet& set, const NoiseSpec& spec);

/// Closed-form flip rates:
///   q_neg = 2p(1-p)/(K-1) + p^2 (K-2)/(K-1)^2
///   q_pos = 2p(1-p)       + p^2 (K-2)/(K-1)
/// The second term of q_pos is the probability that both labels move and land
/// on different classes; it vanishes at K = 2 where both must swap together.
PairNoiseRates pair_noise_rates(const NoiseSpec& spec);

/// Empirical flip rates from `trials` simulated positive and negative pairs.
PairNoiseRates monte_carlo_pair_noise(const NoiseSpec& spec, std::uint64_t trials);

}  // namespace noisyembed
