#pragma once

#include <span>
#include <string>
#include <vector>

#include "noisyembed/core.hpp"
#include "noisyembed/losses.hpp"
#include "noisyembed/noise.hpp"
#include "noisyembed/sampling.hpp"

namespace noisyembed {

/// Pair weight by pair label, e.g. {1, 1/K} for uniform 1-1 triplet sampling.
struct WeightScheme {
  double w_pos = 1.0;
  double w_neg = 1.0;

  [[nodiscard]] double weight(PairLabel t) const { return t == PairLabel::positive ? w_pos : w_neg; }
  void validate() const;

  static WeightScheme uniform_one_to_one(int num_classes) {
    return {1.0, 1.0 / static_cast<double>(num_classes)};
  }
};

struct WeightedItem {
  LossItem item;
  double weight = 1.0;
};

/// Weighted mean sum(w l) / sum(w). Throws on empty input or a non-positive
/// total weight.
double weighted_mean(std::span<const double> losses, std::span<const double> weights);

/// Weighted mean loss of the items under cfg. Throws on an empty set.
double empirical_risk(std::span<const WeightedItem> items, const EmbeddingState& emb,
                      const LossConfig& cfg);

/// Expected weighted auxiliary loss of one pair under pair-label noise.
struct NoisyPairRisk {
  double two_branch = 0.0;  ///< (1-q) w_t l(t) + q w_{-t} l(-t)
  double affine = 0.0;      ///< scale * l(t) + offset
  double scale = 0.0;       ///< (1 - q - q w_{-t}/w_t) w_t
  double offset = 0.0;      ///< w_{-t} q d_max
};

NoisyPairRisk expected_noisy_pair_risk(double l_clean, PairLabel t, const WeightScheme& weights,
                                       const PairNoiseRates& rates);

/// 1 - q_t - q_t w_{-t} / w_t for one channel.
double channel_multiplier(PairLabel t, const WeightScheme& weights, const PairNoiseRates& rates);

/// Q = min over both channels of channel_multiplier.
double q_multiplier(const WeightScheme& weights, const PairNoiseRates& rates);

/// Worst-case weights for the hinged triplet bound: negative pairs weighted
/// 1/(eta K) relative to positives.
WeightScheme triplet_bound_weights(int num_classes, double eta);

/// Weights for the hinged marginal bound: positives eta+, negatives
/// eta-/K, normalized so w_pos = 1 and w_neg = gamma / K.
WeightScheme marginal_bound_weights(int num_classes, double gamma);

struct BoundResult {
  double p_star = 0.0;
  double asymptotic = 0.0;
  bool exact = false;        ///< true when p_star came from bisection on a monotone bracket
  double eta_or_gamma = 1.0;
  std::string diagnostic;    ///< non-empty when the monotonicity check failed
};

/// Largest p with Q(p) >= 0 for the triplet weights, by bisection on the
/// exact finite-K rates; asymptotic = 1 - sqrt(1 - 1/eta).
BoundResult solve_triplet_bound(int num_classes, double eta);

/// Same for the marginal weights; asymptotic = 1 - sqrt(1 - gamma).
BoundResult solve_marginal_bound(int num_classes, double gamma);

/// Q as a function of the sample noise rate for a fixed weight scheme.
double q_at_noise_rate(double p, int num_classes, const WeightScheme& weights);

/// Numerical check of the noisy-risk ordering for a candidate minimizer.
struct RiskOrderingReport {
  double s_plus = 0.0;       ///< sum over positive pairs of l(θ*) - l(θ)
  double s_minus = 0.0;      ///< same over negative pairs
  bool precondition_plus = false;
  bool precondition_minus = false;
  double q = 0.0;
  double clean_diff = 0.0;   ///< R(θ*) - R(θ)
  double noisy_diff = 0.0;   ///< R̂(θ*) - R̂(θ)
  double bound = 0.0;        ///< Q * clean_diff
  double decomposition_error = 0.0;  ///< |noisy_diff - channel-split form|
  bool chain_holds = false;  ///< noisy_diff <= bound <= 0 (the latter only when Q >= 0)

  [[nodiscard]] bool precondition() const { return precondition_plus && precondition_minus; }
  [[nodiscard]] std::string failed_channel() const;
};

/// Pairs carry their clean (true) pair label. R and R̂ are the weighted
/// clean and expected-noisy auxiliary risks normalized by sum of weights.
RiskOrderingReport verify_risk_ordering(const EmbeddingState& emb_star,
                                        const EmbeddingState& emb_other,
                                        std::span<const LabeledPair> pairs,
                                        const WeightScheme& weights, const PairNoiseRates& rates);

/// Clean and observed pair label of the same sample pair.
struct NoisyPair {
  Index i = 0;
  Index j = 0;
  PairLabel clean = PairLabel::positive;
  PairLabel observed = PairLabel::positive;
};

std::vector<NoisyPair> all_noisy_pairs(const LabeledPointSet& set);

struct MarginalPartition {
  std::vector<std::size_t> t_m_plus;   ///< active clean, inactive noisy
  std::vector<std::size_t> t_m_minus;  ///< inactive clean, active noisy
  std::vector<std::size_t> t_m;        ///< active in both
};

/// Splits pairs (by position in `pairs`) by hinge activity of the marginal
/// loss under clean versus observed pair labels.
MarginalPartition marginal_partition(std::span<const NoisyPair> pairs, const EmbeddingState& emb,
                                     const LossConfig& cfg);

struct ZEstimate {
  double z = 0.0;
  bool unbounded = false;
};

/// z = 1 / (eta+/eta- - 1); unbounded when gamma = 1.
ZEstimate residual_z_estimate(const SkewEstimate& skew);

/// Reporter for the local marginal-loss residual around a candidate
/// minimizer: set sizes, z, the heuristic z|T+| > |T-|, and the sign of the
/// assembled residual.
struct MarginalResidualReport {
  std::size_t t_m_plus = 0;
  std::size_t t_m_minus = 0;
  std::size_t t_m = 0;
  ZEstimate z;
  bool heuristic_holds = false;
  double residual = 0.0;
};

MarginalResidualReport marginal_residual(std::span<const NoisyPair> pairs,
                                         const EmbeddingState& emb_star, const EmbeddingState& emb,
                                         const LossConfig& cfg, const WeightScheme& weights,
                                         const PairNoiseRates& rates, const SkewEstimate& skew);

}  // namespace noisyembed
