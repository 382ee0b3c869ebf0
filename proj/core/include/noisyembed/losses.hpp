#pragma once

#include <variant>
#include <vector>

#include "noisyembed/core.hpp"

namespace noisyembed {

struct PairLossValue {
  double value = 0.0;
  bool active = false;  ///< hinge argument strictly positive
};

// Hinged losses.
PairLossValue marginal_loss(double d_ij, PairLabel t, const LossConfig& cfg);
PairLossValue triplet_loss(double d_ap, double d_an, const LossConfig& cfg);

// Unhinged losses. The auxiliary pair loss is d for positive pairs and
// d_max - d for negative pairs, so that l(-t) = d_max - l(t).
double auxiliary_pair_loss(double d_ij, PairLabel t);
double unhinged_triplet_loss(double d_ap, double d_an, const LossConfig& cfg);
double unhinged_marginal_loss(double d_ij, PairLabel t, const LossConfig& cfg);

/// Loss of a single pair or triplet under cfg (family and hinged flag).
using LossItem = std::variant<LabeledPair, Triplet>;

double item_loss(const EmbeddingState& emb, const LossItem& item, const LossConfig& cfg);

struct GradientTerm {
  Index sample = 0;
  std::vector<double> grad;
};

/// Euclidean gradient of one item's loss with respect to the involved rows.
struct GradientContribution {
  double loss = 0.0;
  bool active = false;
  bool degenerate = false;  ///< active hinge on a zero-length pair; gradient zeroed
  std::vector<GradientTerm> terms;
};

/// Minimum distance for which the distance gradient is considered defined.
inline constexpr double kDegenerateDistance = 1e-12;

/// Exact analytic gradient. Inactive hinges (slack <= 0) contribute nothing;
/// a zero distance under an active hinge yields an empty, degenerate result.
GradientContribution loss_gradient(const EmbeddingState& emb, const LossItem& item,
                                   const LossConfig& cfg);

/// Removes the radial component: g - (g . x) x for unit x.
void project_to_tangent(std::span<double> grad, std::span<const double> point);

}  // namespace noisyembed
