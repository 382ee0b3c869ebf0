#include "noisyembed/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace noisyembed {

void WeightScheme::validate() const {
  if (!(w_pos > 0.0 && w_neg > 0.0)) throw std::invalid_argument("pair weights must be positive");
}

double weighted_mean(std::span<const double> losses, std::span<const double> weights) {
  if (losses.empty()) throw std::invalid_argument("empirical risk over an empty item set");
  if (losses.size() != weights.size()) throw std::invalid_argument("losses and weights differ in length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < losses.size(); ++k) {
    num += weights[k] * losses[k];
    den += weights[k];
  }
  if (!(den > 0.0)) throw std::invalid_argument("total item weight must be positive");
  return num / den;
}

double empirical_risk(std::span<const WeightedItem> items, const EmbeddingState& emb,
                      const LossConfig& cfg) {
  std::vector<double> losses;
  std::vector<double> weights;
  losses.reserve(items.size());
  weights.reserve(items.size());
  for (const auto& it : items) {
    losses.push_back(item_loss(emb, it.item, cfg));
    weights.push_back(it.weight);
  }
  return weighted_mean(losses, weights);
}

NoisyPairRisk expected_noisy_pair_risk(double l_clean, PairLabel t, const WeightScheme& weights,
                                       const PairNoiseRates& rates) {
  const double q = rates.rate(t);
  const double w = weights.weight(t);
  const double w_flip = weights.weight(flip(t));
  const double l_flip = kMaxDistance - l_clean;
  NoisyPairRisk r;
  r.two_branch = (1.0 - q) * w * l_clean + q * w_flip * l_flip;
  r.scale = (1.0 - q - q * w_flip / w) * w;
  r.offset = w_flip * q * kMaxDistance;
  r.affine = r.scale * l_clean + r.offset;
  return r;
}

double channel_multiplier(PairLabel t, const WeightScheme& weights, const PairNoiseRates& rates) {
  const double q = rates.rate(t);
  return 1.0 - q - q * weights.weight(flip(t)) / weights.weight(t);
}

double q_multiplier(const WeightScheme& weights, const PairNoiseRates& rates) {
  return std::min(channel_multiplier(PairLabel::positive, weights, rates),
                  channel_multiplier(PairLabel::negative, weights, rates));
}

WeightScheme triplet_bound_weights(int num_classes, double eta) {
  return {1.0, 1.0 / (eta * static_cast<double>(num_classes))};
}

WeightScheme marginal_bound_weights(int num_classes, double gamma) {
  return {1.0, gamma / static_cast<double>(num_classes)};
}

double q_at_noise_rate(double p, int num_classes, const WeightScheme& weights) {
  return q_multiplier(weights, pair_noise_rates({p, num_classes, 0}));
}

namespace {

BoundResult solve_bound(int num_classes, const WeightScheme& weights) {
  constexpr int kGrid = 4096;
  BoundResult out;
  out.exact = true;

  const auto q_of = [&](double p) { return q_at_noise_rate(p, num_classes, weights); };
  double prev = q_of(0.0);
  int crossing = -1;
  for (int k = 1; k <= kGrid; ++k) {
    const double p = static_cast<double>(k) / kGrid;
    const double cur = q_of(p);
    if (cur > prev + 1e-15 && out.diagnostic.empty()) {
      out.diagnostic = "Q(p) increases near p = " + std::to_string(p) + "; bracket taken from grid scan";
      out.exact = false;
    }
    if (cur < 0.0) {
      crossing = k;
      break;
    }
    prev = cur;
  }
  if (crossing < 0) {
    out.p_star = 1.0;
    return out;
  }

  double lo = static_cast<double>(crossing - 1) / kGrid;
  double hi = static_cast<double>(crossing) / kGrid;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (q_of(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.p_star = lo;
  return out;
}

}  // namespace

BoundResult solve_triplet_bound(int num_classes, double eta) {
  if (num_classes < 3) throw std::invalid_argument("triplet bound: K must be at least 3");
  if (!(eta >= 1.0) || !std::isfinite(eta)) throw std::invalid_argument("triplet bound: eta must be >= 1");
  BoundResult r = solve_bound(num_classes, triplet_bound_weights(num_classes, eta));
  r.asymptotic = 1.0 - std::sqrt(1.0 - 1.0 / eta);
  r.eta_or_gamma = eta;
  return r;
}

BoundResult solve_marginal_bound(int num_classes, double gamma) {
  if (num_classes < 3) throw std::invalid_argument("marginal bound: K must be at least 3");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("marginal bound: gamma must lie in (0, 1]");
  BoundResult r = solve_bound(num_classes, marginal_bound_weights(num_classes, gamma));
  r.asymptotic = 1.0 - std::sqrt(1.0 - gamma);
  r.eta_or_gamma = gamma;
  return r;
}

std::string RiskOrderingReport::failed_channel() const {
  if (precondition()) return {};
  if (!precondition_plus && !precondition_minus) return "both";
  return precondition_plus ? "negative" : "positive";
}

RiskOrderingReport verify_risk_ordering(const EmbeddingState& emb_star,
                                        const EmbeddingState& emb_other,
                                        std::span<const LabeledPair> pairs,
                                        const WeightScheme& weights, const PairNoiseRates& rates) {
  weights.validate();
  if (pairs.empty()) throw std::invalid_argument("verify_risk_ordering: empty pair set");
  if (emb_star.size() != emb_other.size()) throw std::invalid_argument("verify_risk_ordering: size mismatch");

  RiskOrderingReport r;
  double z = 0.0;
  double clean_star = 0.0, clean_other = 0.0, noisy_star = 0.0, noisy_other = 0.0;
  for (const auto& pr : pairs) {
    const double ls = auxiliary_pair_loss(pairwise_distance(emb_star, pr.i, pr.j), pr.label);
    const double lo = auxiliary_pair_loss(pairwise_distance(emb_other, pr.i, pr.j), pr.label);
    (pr.label == PairLabel::positive ? r.s_plus : r.s_minus) += ls - lo;
    const double w = weights.weight(pr.label);
    z += w;
    clean_star += w * ls;
    clean_other += w * lo;
    noisy_star += expected_noisy_pair_risk(ls, pr.label, weights, rates).two_branch;
    noisy_other += expected_noisy_pair_risk(lo, pr.label, weights, rates).two_branch;
  }
  r.precondition_plus = r.s_plus <= 0.0;
  r.precondition_minus = r.s_minus <= 0.0;
  r.q = q_multiplier(weights, rates);
  r.clean_diff = (clean_star - clean_other) / z;
  r.noisy_diff = (noisy_star - noisy_other) / z;
  r.bound = r.q * r.clean_diff;

  const double split = (channel_multiplier(PairLabel::positive, weights, rates) * weights.w_pos * r.s_plus +
                        channel_multiplier(PairLabel::negative, weights, rates) * weights.w_neg * r.s_minus) /
                       z;
  r.decomposition_error = std::abs(r.noisy_diff - split);

  const double tol = 1e-12 * (1.0 + std::abs(clean_star) / z + std::abs(noisy_star) / z);
  const bool upper = r.noisy_diff <= r.bound + tol;
  const bool nonpositive = r.q < 0.0 || r.bound <= tol;
  r.chain_holds = upper && nonpositive;
  return r;
}

std::vector<NoisyPair> all_noisy_pairs(const LabeledPointSet& set) {
  std::vector<NoisyPair> pairs;
  for (Index i = 0; i < set.size(); ++i)
    for (Index j = i + 1; j < set.size(); ++j)
      pairs.push_back({i, j, pair_label(set, i, j, false), pair_label(set, i, j, true)});
  return pairs;
}

MarginalPartition marginal_partition(std::span<const NoisyPair> pairs, const EmbeddingState& emb,
                                     const LossConfig& cfg) {
  MarginalPartition part;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = pairs[k];
    const double d = pairwise_distance(emb, pr.i, pr.j);
    const bool clean_active = marginal_loss(d, pr.clean, cfg).active;
    const bool noisy_active = marginal_loss(d, pr.observed, cfg).active;
    if (clean_active && noisy_active) {
      part.t_m.push_back(k);
    } else if (clean_active) {
      part.t_m_plus.push_back(k);
    } else if (noisy_active) {
      part.t_m_minus.push_back(k);
    }
  }
  return part;
}

ZEstimate residual_z_estimate(const SkewEstimate& skew) {
  if (!(skew.gamma > 0.0 && skew.gamma <= 1.0)) throw std::invalid_argument("z estimate: gamma must lie in (0, 1]");
  if (skew.gamma >= 1.0) return {0.0, true};
  return {1.0 / (1.0 / skew.gamma - 1.0), false};
}

MarginalResidualReport marginal_residual(std::span<const NoisyPair> pairs,
                                         const EmbeddingState& emb_star, const EmbeddingState& emb,
                                         const LossConfig& cfg, const WeightScheme& weights,
                                         const PairNoiseRates& rates, const SkewEstimate& skew) {
  if (pairs.empty()) throw std::invalid_argument("marginal_residual: empty pair set");
  const auto part = marginal_partition(pairs, emb_star, cfg);
  MarginalResidualReport r;
  r.t_m_plus = part.t_m_plus.size();
  r.t_m_minus = part.t_m_minus.size();
  r.t_m = part.t_m.size();
  r.z = residual_z_estimate(skew);
  const auto plus = static_cast<double>(r.t_m_plus);
  const auto minus = static_cast<double>(r.t_m_minus);
  r.heuristic_holds = r.z.unbounded ? plus > 0.0 : r.z.z * plus > minus;

  const double q = q_multiplier(weights, rates);
  const auto loss_diff = [&](const NoisyPair& pr, PairLabel t) {
    return marginal_loss(pairwise_distance(emb_star, pr.i, pr.j), t, cfg).value -
           marginal_loss(pairwise_distance(emb, pr.i, pr.j), t, cfg).value;
  };
  double sum = 0.0;
  for (auto k : part.t_m_plus) {
    const auto& pr = pairs[k];
    sum += (1.0 - rates.rate(pr.clean) - q) * weights.weight(pr.clean) * loss_diff(pr, pr.clean);
  }
  for (auto k : part.t_m_minus) {
    const auto& pr = pairs[k];
    const PairLabel t_flip = flip(pr.clean);
    sum += rates.rate(pr.clean) * weights.weight(t_flip) * loss_diff(pr, t_flip);
  }
  r.residual = sum / static_cast<double>(pairs.size());
  return r;
}

}  // namespace noisyembed
