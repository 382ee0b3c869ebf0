#pragma once

#include <cstdint>
#include <vector>

#include "noisyembed/core.hpp"

namespace noisyembed {

/// Synthetic class clusters on the unit sphere. `spread` is a concentration:
/// each sample is normalize(c + g / (spread * sqrt(d))) with g ~ N(0, I_d),
/// so large values give tight clusters and values near 0 give near-uniform
/// directions.
struct SynthSpec {
  int num_classes = 10;
  int per_class = 50;
  std::size_t dim = 16;
  double spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Clean labeled set with unit-norm features; samples are grouped by class.
LabeledPointSet generate(const SynthSpec& spec);

/// The K class directions generate() draws for this spec (row-major K x d).
std::vector<double> class_directions(const SynthSpec& spec);

struct Subsample {
  LabeledPointSet set;
  std::vector<Index> kept;          ///< indices into the source set, ascending
  std::size_t restored_classes = 0;  ///< classes that would have been emptied
};

/// Keeps ceil(fraction * n) samples with clean labels. Stratified mode
/// allocates per-class quotas by largest remainder of fraction * n_c; at
/// least one member of every class is kept.
Subsample subsample_clean(const LabeledPointSet& set, double fraction, std::uint64_t seed,
                          bool stratified = true);

}  // namespace noisyembed
