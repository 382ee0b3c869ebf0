#include "noisyembed/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "noisyembed/rng.hpp"

namespace noisyembed {

namespace {

constexpr double kMinDirectionAngle = 1e-6;

void fill_direction(std::span<double> out, CounterRng& rng) {
  double len = 0.0;
  while (!(len > 1e-12)) {
    for (double& x : out) x = rng.normal();
    len = norm(out);
  }
  for (double& x : out) x /= len;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth: K must be at least 2");
  if (per_class < 2) throw std::invalid_argument("synth: per_class must be at least 2");
  if (dim < 2) throw std::invalid_argument("synth: d must be at least 2");
  if (!(spread > 0.0)) throw std::invalid_argument("synth: spread must be positive");
}

std::vector<double> class_directions(const SynthSpec& spec) {
  spec.validate();
  const std::size_t d = spec.dim;
  const auto k = static_cast<std::size_t>(spec.num_classes);
  CounterRng rng(spec.seed, 0x636c617373ULL);
  std::vector<double> dirs(k * d);
  for (std::size_t c = 0; c < k; ++c) {
    std::span<double> row(dirs.data() + c * d, d);
    for (;;) {
      fill_direction(row, rng);
      bool distinct = true;
      for (std::size_t o = 0; o < c && distinct; ++o) {
        const double cosang = std::clamp(dot(row, {dirs.data() + o * d, d}), -1.0, 1.0);
        distinct = std::acos(cosang) > kMinDirectionAngle;
      }
      if (distinct) break;
    }
  }
  return dirs;
}

LabeledPointSet generate(const SynthSpec& spec) {
  const auto dirs = class_directions(spec);
  const std::size_t d = spec.dim;
  CounterRng rng(spec.seed, 0x73616d706c65ULL);
  const double scale = 1.0 / (spec.spread * std::sqrt(static_cast<double>(d)));

  LabeledPointSet set;
  set.num_classes = spec.num_classes;
  set.feature_dim = d;
  const auto n = static_cast<std::size_t>(spec.num_classes) * static_cast<std::size_t>(spec.per_class);
  set.features.resize(n * d);
  std::vector<double> v(d);
  for (int c = 0; c < spec.num_classes; ++c) {
    const double* dir = dirs.data() + static_cast<std::size_t>(c) * d;
    for (int s = 0; s < spec.per_class; ++s) {
      double len = 0.0;
      while (!(len > 1e-12)) {
        for (std::size_t k = 0; k < d; ++k) v[k] = dir[k] + scale * rng.normal();
        len = norm(v);
      }
      const Index i = set.true_labels.size();
      for (std::size_t k = 0; k < d; ++k) set.features[i * d + k] = v[k] / len;
      set.true_labels.push_back(c);
    }
  }
  set.observed_labels = set.true_labels;
  return set;
}

Subsample subsample_clean(const LabeledPointSet& set, double fraction, std::uint64_t seed, bool stratified) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("subsample: fraction must lie in (0, 1]");
  set.validate();
  const std::size_t n = set.size();
  const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  CounterRng rng(seed, 0x737562ULL);

  std::map<Label, std::vector<Index>> by_class;
  for (Index i = 0; i < n; ++i) by_class[set.true_labels[i]].push_back(i);

  Subsample out;
  std::vector<Index> kept;
  if (stratified) {
    struct Quota {
      Label label;
      std::size_t base;
      double remainder;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [y, members] : by_class) {
      const double exact = fraction * static_cast<double>(members.size());
      const auto base = static_cast<std::size_t>(std::floor(exact));
      quotas.push_back({y, base, exact - static_cast<double>(base)});
      assigned += base;
    }
    // Largest remainders first; ties by label for determinism.
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
    for (std::size_t k = 0; assigned < target && k < order.size(); ++k, ++assigned) ++quotas[order[k]].base;
    for (auto& q : quotas) {
      if (q.base == 0) {
        q.base = 1;
        ++out.restored_classes;
      }
      auto members = by_class[q.label];
      for (std::size_t k = 0; k < q.base; ++k) {
        const std::size_t r = k + rng.below(members.size() - k);
        std::swap(members[k], members[r]);
        kept.push_back(members[k]);
      }
    }
  } else {
    std::vector<Index> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t k = 0; k < target; ++k) {
      const std::size_t r = k + rng.below(n - k);
      std::swap(all[k], all[r]);
      kept.push_back(all[k]);
    }
    std::map<Label, std::size_t> present;
    for (Index i : kept) ++present[set.true_labels[i]];
    for (const auto& [y, members] : by_class) {
      if (present.contains(y)) continue;
      kept.push_back(members[rng.below(members.size())]);
      ++out.restored_classes;
    }
  }
  std::sort(kept.begin(), kept.end());

  out.set.num_classes = set.num_classes;
  out.set.feature_dim = set.has_features() ? set.feature_dim : 0;
  for (Index i : kept) {
    out.set.true_labels.push_back(set.true_labels[i]);
    if (set.has_features()) {
      const auto f = set.feature(i);
      out.set.features.insert(out.set.features.end(), f.begin(), f.end());
    }
  }
  out.set.observed_labels = out.set.true_labels;
  out.kept = std::move(kept);
  return out;
}

}  // namespace noisyembed
