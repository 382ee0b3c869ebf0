#include "noisyembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "noisyembed/rng.hpp"

namespace noisyembed {

std::map<int, double> recall_at_k(const EmbeddingState& emb, std::span<const Label> labels,
                                  std::span<const int> ks) {
  const std::size_t n = emb.size();
  if (labels.size() != n) throw std::invalid_argument("recall_at_k: label count differs from n");
  for (int k : ks)
    if (k <= 0 || static_cast<std::size_t>(k) >= n)
      throw std::invalid_argument("recall_at_k: k must satisfy 1 <= k < n (k = " + std::to_string(k) + ")");

  // For each query, the rank of its best same-label neighbour in the
  // (distance, index) order decides success for every k at once.
  std::vector<std::size_t> first_hit(n, n);
  std::vector<double> dist(n);
  for (Index q = 0; q < n; ++q) {
    for (Index j = 0; j < n; ++j) dist[j] = j == q ? 0.0 : pairwise_distance(emb, q, j);
    std::optional<Index> best;
    for (Index j = 0; j < n; ++j) {
      if (j == q || labels[j] != labels[q]) continue;
      if (!best || dist[j] < dist[*best]) best = j;
    }
    if (!best) continue;
    std::size_t ahead = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == q) continue;
      if (dist[j] < dist[*best] || (dist[j] == dist[*best] && j < *best)) ++ahead;
    }
    first_hit[q] = ahead;
  }

  std::map<int, double> out;
  for (int k : ks) {
    std::size_t hits = 0;
    for (auto r : first_hit) hits += r < static_cast<std::size_t>(k);
    out[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

namespace {

double squared_distance(std::span<const double> a, const double* b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double diff = a[t] - b[t];
    s += diff * diff;
  }
  return s;
}

KMeansResult lloyd(const EmbeddingState& emb, int k, CounterRng& rng, int max_iterations) {
  const std::size_t n = emb.size();
  const std::size_t d = emb.dim();
  const auto kk = static_cast<std::size_t>(k);
  KMeansResult res;
  res.centroids.assign(kk * d, 0.0);
  res.assignment.assign(n, 0);

  // k-means++ seeding.
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  Index first = rng.below(n);
  std::copy_n(emb.row(first).begin(), d, res.centroids.begin());
  for (std::size_t c = 1; c < kk; ++c) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], squared_distance(emb.row(i), &res.centroids[(c - 1) * d]));
      total += closest[i];
    }
    Index pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        target -= closest[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    std::copy_n(emb.row(pick).begin(), d, res.centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
  }

  std::vector<double> sums(kk * d);
  std::vector<std::size_t> counts(kk);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = iter == 0;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        const double dd = squared_distance(emb.row(i), &res.centroids[c * d]);
        if (dd < best_d) {
          best_d = dd;
          best = static_cast<int>(c);
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(res.assignment[i]);
      ++counts[c];
      const auto r = emb.row(i);
      for (std::size_t t = 0; t < d; ++t) sums[c * d + t] += r[t];
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] > 0) {
        for (std::size_t t = 0; t < d; ++t) res.centroids[c * d + t] = sums[c * d + t] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      Index far = 0;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        const double dd = squared_distance(emb.row(i), &res.centroids[static_cast<std::size_t>(res.assignment[i]) * d]);
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      std::copy_n(emb.row(far).begin(), d, res.centroids.begin() + static_cast<std::ptrdiff_t>(c * d));
      res.assignment[far] = static_cast<int>(c);
      ++res.reseeded_clusters;
    }
  }

  res.inertia = 0.0;
  for (Index i = 0; i < n; ++i)
    res.inertia += squared_distance(emb.row(i), &res.centroids[static_cast<std::size_t>(res.assignment[i]) * d]);
  return res;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

KMeansResult kmeans(const EmbeddingState& emb, int k, int restarts, std::uint64_t seed, int max_iterations) {
  if (k <= 0 || static_cast<std::size_t>(k) > emb.size()) throw std::invalid_argument("kmeans: need 1 <= k <= n");
  if (restarts <= 0) throw std::invalid_argument("kmeans: restarts must be positive");
  const CounterRng root(seed, 0x6b6d65616e73ULL);
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(r));
    auto res = lloyd(emb, k, rng, max_iterations);
    if (r == 0 || res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

double nmi(std::span<const int> assignment, std::span<const Label> labels) {
  if (assignment.size() != labels.size()) throw std::invalid_argument("nmi: length mismatch");
  if (assignment.empty()) throw std::invalid_argument("nmi: empty partitions");
  std::map<int, std::size_t> cluster_id;
  std::map<Label, std::size_t> class_id;
  for (int a : assignment) cluster_id.try_emplace(a, cluster_id.size());
  for (Label y : labels) class_id.try_emplace(y, class_id.size());

  const std::size_t nc = cluster_id.size();
  const std::size_t nk = class_id.size();
  std::vector<double> joint(nc * nk, 0.0), pc(nc, 0.0), pk(nk, 0.0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto c = cluster_id[assignment[i]];
    const auto k = class_id[labels[i]];
    joint[c * nk + k] += 1.0;
    pc[c] += 1.0;
    pk[k] += 1.0;
  }
  const auto n = static_cast<double>(assignment.size());
  const double hc = entropy(pc, n);
  const double hk = entropy(pk, n);
  if (hc == 0.0 && hk == 0.0) return 1.0;
  if (hc == 0.0 || hk == 0.0) return 0.0;

  double mi = 0.0;
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t k = 0; k < nk; ++k) {
      const double j = joint[c * nk + k];
      if (j > 0.0) mi += (j / n) * std::log(j * n / (pc[c] * pk[k]));
    }
  return std::clamp(mi / std::sqrt(hc * hk), 0.0, 1.0);
}

EvalReport evaluate(const EmbeddingState& emb, std::span<const Label> labels, int num_classes,
                    const EvalOptions& options) {
  EvalReport r;
  r.recall_at = recall_at_k(emb, labels, options.ks);
  const auto km = kmeans(emb, std::min<int>(num_classes, static_cast<int>(emb.size())),
                         options.kmeans_restarts, options.seed);
  r.nmi = nmi(km.assignment, labels);
  r.kmeans_inertia = km.inertia;
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json doc;
  auto& recall = doc["recall_at"];
  recall = nlohmann::json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  doc["nmi"] = report.nmi;
  doc["kmeans_inertia"] = report.kmeans_inertia;
  return doc;
}

}  // namespace noisyembed
