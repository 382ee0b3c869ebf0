#include "noisyembed/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace noisyembed {

namespace {

PairLossValue hinge(double slack) { return {std::max(0.0, slack), slack > 0.0}; }

// d(dist(x, y))/dx = (x - y) / dist, scaled by `coeff` and added into out.
void add_distance_grad(std::vector<double>& out, std::span<const double> x,
                       std::span<const double> y, double dist, double coeff) {
  for (std::size_t k = 0; k < x.size(); ++k) out[k] += coeff * (x[k] - y[k]) / dist;
}

GradientContribution pair_gradient(const EmbeddingState& emb, const LabeledPair& pr,
                                   const LossConfig& cfg) {
  GradientContribution out;
  const double d = pairwise_distance(emb, pr.i, pr.j);
  const double s = sign(pr.label);
  if (cfg.family == LossFamily::marginal) {
    const double slack = (d - cfg.beta) * s + cfg.alpha;
    out.loss = cfg.hinged ? std::max(0.0, slack) : unhinged_marginal_loss(d, pr.label, cfg);
    out.active = !cfg.hinged || slack > 0.0;
  } else {
    // A bare pair under the triplet family is the auxiliary pair loss.
    out.loss = auxiliary_pair_loss(d, pr.label);
    out.active = true;
  }
  if (!out.active) return out;
  if (d < kDegenerateDistance) {
    out.degenerate = true;
    return out;
  }
  GradientTerm gi{pr.i, std::vector<double>(emb.dim(), 0.0)};
  GradientTerm gj{pr.j, std::vector<double>(emb.dim(), 0.0)};
  add_distance_grad(gi.grad, emb.row(pr.i), emb.row(pr.j), d, s);
  add_distance_grad(gj.grad, emb.row(pr.j), emb.row(pr.i), d, s);
  out.terms.push_back(std::move(gi));
  out.terms.push_back(std::move(gj));
  return out;
}

GradientContribution triplet_gradient(const EmbeddingState& emb, const Triplet& tr,
                                      const LossConfig& cfg) {
  GradientContribution out;
  const double d_ap = pairwise_distance(emb, tr.anchor, tr.positive);
  const double d_an = pairwise_distance(emb, tr.anchor, tr.negative);
  const double slack = d_ap - d_an + cfg.alpha;
  out.loss = cfg.hinged ? std::max(0.0, slack) : unhinged_triplet_loss(d_ap, d_an, cfg);
  out.active = !cfg.hinged || slack > 0.0;
  if (!out.active) return out;
  if (d_ap < kDegenerateDistance || d_an < kDegenerateDistance) {
    out.degenerate = true;
    return out;
  }
  const auto a = emb.row(tr.anchor);
  const auto p = emb.row(tr.positive);
  const auto n = emb.row(tr.negative);
  GradientTerm ga{tr.anchor, std::vector<double>(emb.dim(), 0.0)};
  GradientTerm gp{tr.positive, std::vector<double>(emb.dim(), 0.0)};
  GradientTerm gn{tr.negative, std::vector<double>(emb.dim(), 0.0)};
  add_distance_grad(ga.grad, a, p, d_ap, 1.0);
  add_distance_grad(ga.grad, a, n, d_an, -1.0);
  add_distance_grad(gp.grad, p, a, d_ap, 1.0);
  add_distance_grad(gn.grad, n, a, d_an, -1.0);
  out.terms.push_back(std::move(ga));
  out.terms.push_back(std::move(gp));
  out.terms.push_back(std::move(gn));
  return out;
}

}  // namespace

PairLossValue marginal_loss(double d_ij, PairLabel t, const LossConfig& cfg) {
  return hinge((d_ij - cfg.beta) * sign(t) + cfg.alpha);
}

PairLossValue triplet_loss(double d_ap, double d_an, const LossConfig& cfg) {
  return hinge(d_ap - d_an + cfg.alpha);
}

double auxiliary_pair_loss(double d_ij, PairLabel t) {
  return t == PairLabel::positive ? d_ij : kMaxDistance - d_ij;
}

double unhinged_triplet_loss(double d_ap, double d_an, const LossConfig& cfg) {
  return kMaxDistance + d_ap - d_an + cfg.alpha;
}

double unhinged_marginal_loss(double d_ij, PairLabel t, const LossConfig& cfg) {
  return kMaxDistance + (d_ij - cfg.beta) * sign(t) + cfg.alpha;
}

double item_loss(const EmbeddingState& emb, const LossItem& item, const LossConfig& cfg) {
  if (const auto* tr = std::get_if<Triplet>(&item)) {
    const double d_ap = pairwise_distance(emb, tr->anchor, tr->positive);
    const double d_an = pairwise_distance(emb, tr->anchor, tr->negative);
    return cfg.hinged ? triplet_loss(d_ap, d_an, cfg).value : unhinged_triplet_loss(d_ap, d_an, cfg);
  }
  const auto& pr = std::get<LabeledPair>(item);
  const double d = pairwise_distance(emb, pr.i, pr.j);
  if (cfg.family == LossFamily::triplet) return auxiliary_pair_loss(d, pr.label);
  return cfg.hinged ? marginal_loss(d, pr.label, cfg).value : unhinged_marginal_loss(d, pr.label, cfg);
}

GradientContribution loss_gradient(const EmbeddingState& emb, const LossItem& item,
                                   const LossConfig& cfg) {
  if (const auto* tr = std::get_if<Triplet>(&item)) return triplet_gradient(emb, *tr, cfg);
  return pair_gradient(emb, std::get<LabeledPair>(item), cfg);
}

void project_to_tangent(std::span<double> grad, std::span<const double> point) {
  const double radial = dot(grad, point);
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= radial * point[k];
}

}  // namespace noisyembed
