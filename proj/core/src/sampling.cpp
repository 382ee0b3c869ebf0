#include "noisyembed/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "noisyembed/losses.hpp"

namespace noisyembed {

void MinibatchSpec::validate(std::size_t n) const {
  if (classes_per_batch < 2 || samples_per_class < 2)
    throw std::invalid_argument("minibatch: classes_per_batch and samples_per_class must be >= 2");
  if (static_cast<std::size_t>(classes_per_batch) * static_cast<std::size_t>(samples_per_class) > n)
    throw std::invalid_argument("minibatch: batch larger than the dataset");
}

std::vector<IndexPair> enumerate_positive_pairs(std::span<const Label> labels) {
  std::map<Label, std::vector<Index>> by_class;
  for (Index i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<IndexPair> pairs;
  for (const auto& [label, members] : by_class)
    for (std::size_t u = 0; u < members.size(); ++u)
      for (std::size_t v = u + 1; v < members.size(); ++v) pairs.emplace_back(members[u], members[v]);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<IndexPair> enumerate_positive_pairs(const LabeledPointSet& set, LabelChannel channel) {
  return enumerate_positive_pairs(set.labels(channel));
}

std::optional<Index> random_semi_hard_negative(const EmbeddingState& emb, Index anchor,
                                               Index positive, std::span<const Index> candidates,
                                               const LossConfig& cfg, CounterRng& rng) {
  const double d_ap = pairwise_distance(emb, anchor, positive);
  std::vector<Index> violators;
  for (Index n : candidates)
    if (d_ap - pairwise_distance(emb, anchor, n) + cfg.alpha > 0.0) violators.push_back(n);
  if (violators.empty()) return std::nullopt;
  return violators[rng.below(violators.size())];
}

std::optional<Index> fixed_semi_hard_negative(const EmbeddingState& emb, Index anchor,
                                              Index positive, std::span<const Index> candidates,
                                              const LossConfig& /*cfg*/) {
  const double d_ap = pairwise_distance(emb, anchor, positive);
  std::optional<Index> best;
  double best_d = 0.0;
  for (Index n : candidates) {
    const double d_an = pairwise_distance(emb, anchor, n);
    if (!(d_an > d_ap)) continue;
    if (!best || d_an < best_d || (d_an == best_d && n < *best)) {
      best = n;
      best_d = d_an;
    }
  }
  return best;
}

void SelectionLog::record_negative(Index anchor, std::span<const Index> candidates,
                                   std::optional<Index> chosen) {
  if (candidates.empty()) return;
  const double share = 1.0 / static_cast<double>(candidates.size());
  for (Index n : candidates) negatives_[{anchor, n}].baseline += share;
  if (chosen) negatives_[{anchor, *chosen}].count += 1;
}

void SelectionLog::record_positive(Index i, Index j, bool used) {
  auto& e = positives_[{std::min(i, j), std::max(i, j)}];
  e.baseline += 1.0;
  if (used) e.count += 1;
}

void SelectionLog::merge(const SelectionLog& other) {
  for (const auto* src : {&other.negatives_, &other.positives_}) {
    auto& dst = src == &other.negatives_ ? negatives_ : positives_;
    for (const auto& [key, e] : *src) {
      auto& d = dst[key];
      d.count += e.count;
      d.baseline += e.baseline;
    }
  }
}

std::uint64_t SelectionLog::total_negative_selections() const {
  std::uint64_t total = 0;
  for (const auto& [key, e] : negatives_) total += e.count;
  return total;
}

void SelectionLog::write_csv(std::ostream& out) const {
  out << "anchor,negative,count\n";
  for (const auto& [key, e] : negatives_) out << key.first << ',' << key.second << ',' << e.count << '\n';
}

namespace {

bool positive_active(const EmbeddingState& emb, Index a, Index p, const LossConfig& cfg) {
  return marginal_loss(pairwise_distance(emb, a, p), PairLabel::positive, cfg).active;
}

std::vector<Index> sample_members(const std::vector<Index>& pool, int want, CounterRng& rng,
                                  bool& with_replacement) {
  std::vector<Index> out;
  if (pool.size() >= static_cast<std::size_t>(want)) {
    std::vector<Index> tmp = pool;
    for (int k = 0; k < want; ++k) {
      const std::size_t r = static_cast<std::size_t>(k) + rng.below(tmp.size() - static_cast<std::size_t>(k));
      std::swap(tmp[static_cast<std::size_t>(k)], tmp[r]);
      out.push_back(tmp[static_cast<std::size_t>(k)]);
    }
    with_replacement = false;
  } else {
    for (int k = 0; k < want; ++k) out.push_back(pool[rng.below(pool.size())]);
    with_replacement = true;
  }
  return out;
}

// Nearest-rank quantile of per-pair skews (count share over baseline share),
// each pair weighted by its selection count. Returns 0 when nothing was
// selected.
double skew_quantile(const std::map<IndexPair, SelectionLog::Entry>& entries, double q) {
  double total_count = 0.0;
  double total_base = 0.0;
  for (const auto& [key, e] : entries) {
    total_count += static_cast<double>(e.count);
    total_base += e.baseline;
  }
  if (total_count == 0.0 || total_base == 0.0) return 0.0;
  const double scale = total_base / total_count;
  std::vector<std::pair<double, std::uint64_t>> skews;
  for (const auto& [key, e] : entries) {
    if (e.baseline <= 0.0 || e.count == 0) continue;
    skews.emplace_back(scale * static_cast<double>(e.count) / e.baseline, e.count);
  }
  std::sort(skews.begin(), skews.end());
  const double target = std::max(1.0, std::ceil(q * total_count - 1e-9));
  double seen = 0.0;
  for (const auto& [s, c] : skews) {
    seen += static_cast<double>(c);
    if (seen >= target) return s;
  }
  return skews.back().first;
}

}  // namespace

MinibatchResult build_minibatch_triplets(ObservedLabels labels, const EmbeddingState& emb,
                                         const MinibatchSpec& spec, const LossConfig& cfg,
                                         CounterRng& rng, SelectionLog* log) {
  spec.validate(labels.size());
  if (emb.size() != labels.size()) throw std::invalid_argument("minibatch: embedding/label size mismatch");

  std::map<Label, std::vector<Index>> by_class;
  for (Index i = 0; i < labels.size(); ++i) by_class[labels.labels[i]].push_back(i);
  std::vector<Label> classes;
  for (const auto& [y, members] : by_class) classes.push_back(y);
  if (classes.size() < static_cast<std::size_t>(spec.classes_per_batch))
    throw std::invalid_argument("minibatch: fewer observed classes than classes_per_batch");

  MinibatchResult out;
  for (int c = 0; c < spec.classes_per_batch; ++c) {
    const std::size_t r = static_cast<std::size_t>(c) + rng.below(classes.size() - static_cast<std::size_t>(c));
    std::swap(classes[static_cast<std::size_t>(c)], classes[r]);
    bool replaced = false;
    auto picked = sample_members(by_class[classes[static_cast<std::size_t>(c)]], spec.samples_per_class, rng, replaced);
    out.replacement_events += replaced;
    out.members.insert(out.members.end(), picked.begin(), picked.end());
  }

  const auto& y = labels.labels;
  std::vector<Index> candidates;
  for (std::size_t u = 0; u < out.members.size(); ++u) {
    const Index a = out.members[u];
    candidates.clear();
    for (Index m : out.members)
      if (y[m] != y[a]) candidates.push_back(m);
    for (std::size_t v = u + 1; v < out.members.size(); ++v) {
      const Index p = out.members[v];
      if (y[p] != y[a] || p == a) continue;
      ++out.positive_pairs;
      if (cfg.mining == Mining::exhaustive) {
        for (Index n : candidates) {
          out.triplets.push_back({a, p, n});
          if (log) log->record_negative(a, candidates, n);
        }
        if (candidates.empty()) ++out.skipped_pairs;
        if (log && cfg.family == LossFamily::marginal)
          log->record_positive(a, p, !candidates.empty() && positive_active(emb, a, p, cfg));
        continue;
      }
      const auto chosen = cfg.mining == Mining::random_semi_hard
                              ? random_semi_hard_negative(emb, a, p, candidates, cfg, rng)
                              : fixed_semi_hard_negative(emb, a, p, candidates, cfg);
      if (log) log->record_negative(a, candidates, chosen);
      if (log && cfg.family == LossFamily::marginal)
        log->record_positive(a, p, chosen.has_value() && positive_active(emb, a, p, cfg));
      if (chosen) {
        out.triplets.push_back({a, p, *chosen});
      } else {
        ++out.skipped_pairs;
      }
    }
  }
  return out;
}

SkewEstimate estimate_skew(const SelectionLog& log, double quantile) {
  if (log.empty()) throw std::invalid_argument("estimate_skew: empty selection log");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw std::invalid_argument("estimate_skew: quantile outside (0, 1]");
  SkewEstimate s;
  s.eta = std::max(1.0, skew_quantile(log.negatives(), quantile));
  s.eta_minus = std::max(1.0, skew_quantile(log.negatives(), 1.0 - quantile));
  s.eta_plus = log.positives().empty() ? 1.0 : std::max(1.0, skew_quantile(log.positives(), quantile));
  s.gamma = std::min(1.0, s.eta_minus / s.eta_plus);
  return s;
}

}  // namespace noisyembed
