#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "noisyembed/core.hpp"
#include "noisyembed/rng.hpp"

namespace noisyembed {

/// Minibatch shape: classes_per_batch classes, samples_per_class members each.
struct MinibatchSpec {
  int classes_per_batch = 12;
  int samples_per_class = 5;
  std::uint64_t seed = 0;

  void validate(std::size_t n) const;
};

using IndexPair = std::pair<Index, Index>;

/// All unordered pairs (i < j) with equal labels, each exactly once.
std::vector<IndexPair> enumerate_positive_pairs(std::span<const Label> labels);
std::vector<IndexPair> enumerate_positive_pairs(const LabeledPointSet& set, LabelChannel channel);

/// Uniform draw among candidates n with d_ap - d_an + alpha > 0.
std::optional<Index> random_semi_hard_negative(const EmbeddingState& emb, Index anchor,
                                               Index positive, std::span<const Index> candidates,
                                               const LossConfig& cfg, CounterRng& rng);

/// Candidate with the smallest d_an subject to d_an > d_ap; ties go to the
/// lowest sample index.
std::optional<Index> fixed_semi_hard_negative(const EmbeddingState& emb, Index anchor,
                                              Index positive, std::span<const Index> candidates,
                                              const LossConfig& cfg);

/// Selection counts per (anchor, negative) pair plus the mass a uniform
/// 1-1 sampler would have put on each pair over the same mining events.
/// Positive-pair usage is tracked separately for the marginal-loss skews.
/// Backed by ordered maps so merged logs iterate deterministically.
class SelectionLog {
 public:
  struct Entry {
    std::uint64_t count = 0;
    double baseline = 0.0;
  };

  /// One mining opportunity: every candidate receives 1/|candidates| of
  /// baseline mass; `chosen` (if any) receives one count.
  void record_negative(Index anchor, std::span<const Index> candidates, std::optional<Index> chosen);

  /// One positive-pair opportunity; `used` when the pair contributed a loss.
  void record_positive(Index i, Index j, bool used);

  void merge(const SelectionLog& other);

  [[nodiscard]] const std::map<IndexPair, Entry>& negatives() const { return negatives_; }
  [[nodiscard]] const std::map<IndexPair, Entry>& positives() const { return positives_; }
  [[nodiscard]] bool empty() const { return negatives_.empty() && positives_.empty(); }
  [[nodiscard]] std::uint64_t total_negative_selections() const;

  /// CSV with header `anchor,negative,count`, one row per negative pair.
  void write_csv(std::ostream& out) const;

 private:
  std::map<IndexPair, Entry> negatives_;
  std::map<IndexPair, Entry> positives_;
};

struct MinibatchResult {
  std::vector<Index> members;
  std::vector<Triplet> triplets;
  std::size_t positive_pairs = 0;
  std::size_t skipped_pairs = 0;       ///< positive pairs for which the miner found nothing
  std::size_t replacement_events = 0;  ///< classes sampled with replacement
};

/// Samples a minibatch under the observed labels and mines at most one
/// negative per in-batch positive pair (all negatives under exhaustive
/// mining). Candidates are restricted to the minibatch. The anchor of a
/// positive pair is its earlier member in batch order.
MinibatchResult build_minibatch_triplets(ObservedLabels labels, const EmbeddingState& emb,
                                         const MinibatchSpec& spec, const LossConfig& cfg,
                                         CounterRng& rng, SelectionLog* log = nullptr);

struct SkewEstimate {
  double eta = 1.0;        ///< upper-tail skew of negative-pair selection
  double eta_plus = 1.0;   ///< upper-tail skew of positive-pair usage
  double eta_minus = 1.0;  ///< lower-tail skew of negative-pair usage
  double gamma = 1.0;      ///< eta_minus / eta_plus, clamped into (0, 1]
};

inline constexpr double kSkewQuantile = 0.95;

/// Skew of each pair is (count share) / (uniform baseline share). Quantiles
/// are nearest-rank over selections, each pair weighted by its count.
/// eta and eta_plus take `quantile`, eta_minus takes 1 - quantile (a
/// robust minimum); all are floored at 1. Throws on an empty log.
SkewEstimate estimate_skew(const SelectionLog& log, double quantile = kSkewQuantile);

}  // namespace noisyembed
