#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "noisyembed/core.hpp"

namespace noisyembed {

/// Recall@k for every k in ks: the fraction of queries whose k nearest other
/// points (exact Euclidean search, ties broken by index) include one with the
/// same label. Throws when some k >= n or k == 0.
std::map<int, double> recall_at_k(const EmbeddingState& emb, std::span<const Label> labels,
                                  std::span<const int> ks);

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<double> centroids;  ///< k x d row-major
  double inertia = 0.0;
  std::size_t reseeded_clusters = 0;
};

/// Lloyd iterations from k-means++ seeding, best of `restarts` by inertia.
/// An emptied cluster is reseeded at the point farthest from its centroid.
KMeansResult kmeans(const EmbeddingState& emb, int k, int restarts, std::uint64_t seed,
                    int max_iterations = 100);

/// I(assignment, labels) / sqrt(H(assignment) H(labels)) with natural logs.
/// Two single-part partitions score 1; a single-part partition against a
/// multi-part one scores 0.
double nmi(std::span<const int> assignment, std::span<const Label> labels);

struct EvalReport {
  std::map<int, double> recall_at;
  double nmi = 0.0;
  double kmeans_inertia = 0.0;
};

struct EvalOptions {
  std::vector<int> ks{1, 10};
  int kmeans_restarts = 10;
  std::uint64_t seed = 0;
};

/// Recall@K and k-means NMI on the given (true) labels; k-means uses
/// num_classes clusters.
EvalReport evaluate(const EmbeddingState& emb, std::span<const Label> labels, int num_classes,
                    const EvalOptions& options);

nlohmann::json to_json(const EvalReport& report);

}  // namespace noisyembed
