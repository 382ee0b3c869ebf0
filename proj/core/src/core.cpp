#include "noisyembed/core.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "noisyembed/rng.hpp"

namespace noisyembed {

double CounterRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void LabeledPointSet::validate() const {
  if (num_classes < 2) throw std::invalid_argument("class count K must be at least 2");
  if (observed_labels.size() != true_labels.size())
    throw std::invalid_argument("true_labels and observed_labels differ in length");
  for (const auto* channel : {&true_labels, &observed_labels}) {
    for (Label y : *channel) {
      if (y < 0 || y >= num_classes)
        throw std::invalid_argument("label " + std::to_string(y) + " outside [0, K)");
    }
  }
  if (feature_dim > 0 && features.size() != feature_dim * size())
    throw std::invalid_argument("feature block does not match n x d");
}

EmbeddingState::EmbeddingState(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (data_.size() % dim_ != 0) throw std::invalid_argument("embedding block is not n x d");
  if (max_norm_deviation() > kUnitNormTolerance)
    throw std::invalid_argument("embedding rows must be unit-norm");
}

EmbeddingState EmbeddingState::normalized(std::size_t dim, std::vector<double> data) {
  if (dim == 0 || data.size() % dim != 0) throw std::invalid_argument("embedding block is not n x d");
  EmbeddingState out;
  out.dim_ = dim;
  out.data_ = std::move(data);
  for (Index i = 0; i < out.size(); ++i) out.renormalize(i);
  return out;
}

void EmbeddingState::renormalize(Index i) {
  auto r = mutable_row(i);
  const double n = norm(r);
  if (!(n > 0.0) || !std::isfinite(n))
    throw std::invalid_argument("cannot normalize a zero or non-finite vector (row " +
                                std::to_string(i) + ")");
  for (double& x : r) x /= n;
}

double EmbeddingState::max_norm_deviation() const {
  double worst = 0.0;
  for (Index i = 0; i < size(); ++i) worst = std::max(worst, std::abs(norm(row(i)) - 1.0));
  return worst;
}

void LossConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("margin alpha must be positive");
  if (family == LossFamily::marginal) {
    if (!(beta > 0.0 && beta < kMaxDistance))
      throw std::invalid_argument("threshold beta must lie in (0, 2)");
    if (!(beta - alpha > 0.0)) throw std::invalid_argument("beta - alpha must be positive");
  }
}

std::string_view to_string(LossFamily family) {
  return family == LossFamily::triplet ? "triplet" : "marginal";
}

std::string_view to_string(Mining mining) {
  switch (mining) {
    case Mining::random_semi_hard: return "random_semi_hard";
    case Mining::fixed_semi_hard: return "fixed_semi_hard";
    case Mining::exhaustive: return "exhaustive";
  }
  return "unknown";
}

LossFamily parse_loss_family(std::string_view name) {
  if (name == "triplet") return LossFamily::triplet;
  if (name == "marginal") return LossFamily::marginal;
  throw std::invalid_argument("unknown loss family: " + std::string(name));
}

Mining parse_mining(std::string_view name) {
  if (name == "random_semi_hard" || name == "random") return Mining::random_semi_hard;
  if (name == "fixed_semi_hard" || name == "fixed") return Mining::fixed_semi_hard;
  if (name == "exhaustive") return Mining::exhaustive;
  throw std::invalid_argument("unknown mining scheme: " + std::string(name));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double pairwise_distance(const EmbeddingState& emb, Index i, Index j) {
  if (i >= emb.size() || j >= emb.size())
    throw std::out_of_range("pairwise_distance: index (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range for " +
                            std::to_string(emb.size()) + " samples");
  return euclidean_distance(emb.row(i), emb.row(j));
}

PairLabel pair_label(const LabeledPointSet& set, Index i, Index j, bool use_observed) {
  if (i == j) throw std::invalid_argument("pair_label: self-pairs are undefined");
  if (i >= set.size() || j >= set.size()) throw std::out_of_range("pair_label: index out of range");
  const auto& y = use_observed ? set.observed_labels : set.true_labels;
  return y[i] == y[j] ? PairLabel::positive : PairLabel::negative;
}

namespace {

nlohmann::json rows_to_json(std::span<const double> block, std::size_t dim) {
  auto rows = nlohmann::json::array();
  for (std::size_t off = 0; off < block.size(); off += dim)
    rows.push_back(std::vector<double>(block.begin() + off, block.begin() + off + dim));
  return rows;
}

}  // namespace

nlohmann::json to_json(const LabeledPointSet& set) {
  nlohmann::json doc;
  doc["n"] = set.size();
  doc["K"] = set.num_classes;
  doc["true_labels"] = set.true_labels;
  doc["observed_labels"] = set.observed_labels;
  if (set.has_features()) {
    doc["d"] = set.feature_dim;
    doc["vectors"] = rows_to_json(set.features, set.feature_dim);
  }
  return doc;
}

nlohmann::json to_json(const LabeledPointSet& set, const EmbeddingState& emb) {
  if (emb.size() != set.size()) throw std::invalid_argument("embedding and labels differ in size");
  nlohmann::json doc = to_json(set);
  doc["d"] = emb.dim();
  doc["vectors"] = rows_to_json(emb.data(), emb.dim());
  return doc;
}

LabeledPointSet point_set_from_json(const nlohmann::json& doc) {
  LabeledPointSet set;
  try {
    set.num_classes = doc.at("K").get<int>();
    set.true_labels = doc.at("true_labels").get<std::vector<Label>>();
    set.observed_labels = doc.at("observed_labels").get<std::vector<Label>>();
    const auto n = doc.at("n").get<std::size_t>();
    if (n != set.true_labels.size()) throw std::invalid_argument("n does not match label count");
    if (doc.contains("vectors")) {
      set.feature_dim = doc.at("d").get<std::size_t>();
      for (const auto& row : doc.at("vectors")) {
        auto v = row.get<std::vector<double>>();
        if (v.size() != set.feature_dim) throw std::invalid_argument("vector length differs from d");
        set.features.insert(set.features.end(), v.begin(), v.end());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed point-set document: ") + e.what());
  }
  set.validate();
  return set;
}

EmbeddingState embedding_from_json(const nlohmann::json& doc) {
  const auto set = point_set_from_json(doc);
  if (!set.has_features()) throw std::invalid_argument("document carries no vectors");
  return EmbeddingState::normalized(set.feature_dim, set.features);
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

LabeledPointSet load_point_set(const std::string& path) { return point_set_from_json(load_json(path)); }

void save_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace noisyembed
