#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace noisyembed {

using Index = std::size_t;
using Label = int;

/// Maximum distance between two points on the unit hypersphere.
inline constexpr double kMaxDistance = 2.0;

/// Tolerance used when checking that stored vectors are unit-norm.
inline constexpr double kUnitNormTolerance = 1e-9;

enum class LabelChannel { true_labels, observed_labels };

/// Samples with both label channels. Class ids are dense in [0, num_classes).
/// `features` is an optional row-major n x feature_dim block, filled by the
/// synthetic generator and consumed by feature-based initialization.
struct LabeledPointSet {
  int num_classes = 0;
  std::vector<Label> true_labels;
  std::vector<Label> observed_labels;
  std::size_t feature_dim = 0;
  std::vector<double> features;

  [[nodiscard]] std::size_t size() const { return true_labels.size(); }
  [[nodiscard]] bool has_features() const { return feature_dim > 0 && !features.empty(); }
  [[nodiscard]] std::span<const double> feature(Index i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }
  [[nodiscard]] std::span<const Label> labels(LabelChannel channel) const {
    return channel == LabelChannel::true_labels ? std::span<const Label>(true_labels)
                                                : std::span<const Label>(observed_labels);
  }
  [[nodiscard]] bool is_clean() const { return true_labels == observed_labels; }

  /// Throws std::invalid_argument when a structural invariant is broken.
  void validate() const;
};

/// Read-only view of the observed label channel. The trainer only ever sees
/// this type, so true labels cannot leak into gradients.
struct ObservedLabels {
  int num_classes = 0;
  std::span<const Label> labels;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  static ObservedLabels of(const LabeledPointSet& set) {
    return {set.num_classes, set.observed_labels};
  }
};

/// n unit-norm vectors in R^d stored row-major; the optimization variable.
class EmbeddingState {
 public:
  EmbeddingState() = default;

  /// Takes ownership of a row-major block. Throws if the size is not a
  /// multiple of dim or a row is not unit-norm within kUnitNormTolerance.
  EmbeddingState(std::size_t dim, std::vector<double> data);

  /// Normalizes every row before storing. Throws on a zero row.
  static EmbeddingState normalized(std::size_t dim, std::vector<double> data);

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  [[nodiscard]] std::span<const double> row(Index i) const {
    return {data_.data() + i * dim_, dim_};
  }
  [[nodiscard]] std::span<double> mutable_row(Index i) { return {data_.data() + i * dim_, dim_}; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }

  /// Projects row i back onto the sphere. Throws on a zero row.
  void renormalize(Index i);

  /// Largest |‖row‖ − 1| over all rows.
  [[nodiscard]] double max_norm_deviation() const;

  friend bool operator==(const EmbeddingState&, const EmbeddingState&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

enum class PairLabel : int { negative = -1, positive = 1 };

constexpr double sign(PairLabel t) { return static_cast<double>(static_cast<int>(t)); }
constexpr PairLabel flip(PairLabel t) {
  return t == PairLabel::positive ? PairLabel::negative : PairLabel::positive;
}

struct Triplet {
  Index anchor = 0;
  Index positive = 0;
  Index negative = 0;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// An unordered sample pair together with the pair label used for its loss.
struct LabeledPair {
  Index i = 0;
  Index j = 0;
  PairLabel label = PairLabel::positive;
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

enum class LossFamily { triplet, marginal };
enum class Mining { random_semi_hard, fixed_semi_hard, exhaustive };

struct LossConfig {
  LossFamily family = LossFamily::triplet;
  bool hinged = true;
  double alpha = 0.2;
  double beta = 1.4;
  Mining mining = Mining::random_semi_hard;

  void validate() const;
};

std::string_view to_string(LossFamily family);
std::string_view to_string(Mining mining);
LossFamily parse_loss_family(std::string_view name);
Mining parse_mining(std::string_view name);

/// Euclidean distance between rows i and j. Throws std::out_of_range.
double pairwise_distance(const EmbeddingState& emb, Index i, Index j);

/// Distance between two raw vectors of equal length.
double euclidean_distance(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// +1 iff the selected channel agrees on i and j. Throws on i == j.
PairLabel pair_label(const LabeledPointSet& set, Index i, Index j, bool use_observed);

// JSON document: {n, K, true_labels, observed_labels, d?, vectors?}.
// `vectors` carries the features on a dataset and the embedding on a trained
// state; both are row-major lists of length-d arrays.
nlohmann::json to_json(const LabeledPointSet& set);
nlohmann::json to_json(const LabeledPointSet& set, const EmbeddingState& emb);
LabeledPointSet point_set_from_json(const nlohmann::json& doc);

/// The `vectors` block of a document as an embedding, normalizing each row.
EmbeddingState embedding_from_json(const nlohmann::json& doc);

LabeledPointSet load_point_set(const std::string& path);
void save_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json load_json(const std::string& path);

}  // namespace noisyembed
