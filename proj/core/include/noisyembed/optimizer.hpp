#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "noisyembed/core.hpp"
#include "noisyembed/sampling.hpp"

namespace noisyembed {

struct TrainConfig {
  std::size_t steps = 1000;
  double learning_rate = 0.05;
  MinibatchSpec minibatch{};
  LossConfig loss{};
  std::uint64_t seed = 0;
  std::size_t snapshot_every = 0;  ///< 0 disables snapshots

  void validate(std::size_t n) const;
};

struct StepRecord {
  std::size_t step = 0;
  double risk = 0.0;  ///< mean item loss over the minibatch
  std::size_t active_items = 0;
  std::size_t skipped_pairs = 0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  SelectionLog selection;
  std::size_t degenerate_events = 0;
  std::size_t replacement_events = 0;
  std::vector<EmbeddingState> snapshots;

  /// CSV with header `step,risk,active_items,skipped_pairs`.
  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  EmbeddingState state;
  TrainLog log;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Projected SGD on the free embedding table. Each step mines a minibatch
/// under the observed labels, sums the per-item gradients, projects each
/// touched row's gradient onto the sphere's tangent space, steps, and
/// renormalizes. Deterministic for a given seed. Throws TrainingError on a
/// non-finite gradient.
TrainResult train(ObservedLabels labels, EmbeddingState init, const TrainConfig& cfg);

enum class InitMode { random_uniform_sphere, from_features };

struct InitSpec {
  InitMode mode = InitMode::random_uniform_sphere;
  std::uint64_t seed = 0;
  double lambda = 0.0;  ///< from_features: mixing weight toward a random direction
};

/// Random mode draws i.i.d. uniform directions. from_features normalizes
/// (1 - lambda) * feature_hat + lambda * random_hat per sample; it needs a
/// point set whose feature dimension equals d.
EmbeddingState initialize_embeddings(std::size_t n, std::size_t d, const InitSpec& spec,
                                     const LabeledPointSet* set = nullptr);

InitMode parse_init_mode(std::string_view name);
std::string_view to_string(InitMode mode);

/// Mines `batches` minibatches on a frozen state and returns the selection
/// log. Used to measure the skew of a miner without training.
SelectionLog collect_selection_log(ObservedLabels labels, const EmbeddingState& emb,
                                   const MinibatchSpec& spec, const LossConfig& cfg,
                                   std::size_t batches, std::uint64_t seed);

}  // namespace noisyembed
