#include "noisyembed/optimizer.hpp"

#include <cmath>
#include <ostream>

#include "noisyembed/losses.hpp"
#include "noisyembed/rng.hpp"

namespace noisyembed {

void TrainConfig::validate(std::size_t n) const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  minibatch.validate(n);
  loss.validate();
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "step,risk,active_items,skipped_pairs\n";
  for (const auto& s : steps) out << s.step << ',' << s.risk << ',' << s.active_items << ',' << s.skipped_pairs << '\n';
}

namespace {

std::vector<LossItem> items_for(const MinibatchResult& batch, const LossConfig& cfg) {
  std::vector<LossItem> items;
  if (cfg.family == LossFamily::triplet) {
    items.assign(batch.triplets.begin(), batch.triplets.end());
    return items;
  }
  // Marginal loss under 1-1 sampling: the positive pair and the mined
  // negative pair share the anchor.
  for (const auto& t : batch.triplets) {
    items.emplace_back(LabeledPair{t.anchor, t.positive, PairLabel::positive});
    items.emplace_back(LabeledPair{t.anchor, t.negative, PairLabel::negative});
  }
  return items;
}

}  // namespace

TrainResult train(ObservedLabels labels, EmbeddingState init, const TrainConfig& cfg) {
  const std::size_t n = labels.size();
  if (init.size() != n) throw std::invalid_argument("train: embedding/label size mismatch");
  if (init.max_norm_deviation() > kUnitNormTolerance) throw std::invalid_argument("train: init must be unit-norm");
  TrainResult out{std::move(init), {}};
  if (cfg.steps == 0) return out;
  cfg.validate(n);

  EmbeddingState& emb = out.state;
  const std::size_t dim = emb.dim();
  const CounterRng root(cfg.seed, 0x747261696eULL);
  std::vector<double> grad(n * dim, 0.0);
  std::vector<char> touched(n, 0);
  std::vector<Index> touched_list;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    CounterRng rng = root.split(step);
    auto batch = build_minibatch_triplets(labels, emb, cfg.minibatch, cfg.loss, rng, &out.log.selection);
    out.log.replacement_events += batch.replacement_events;
    const auto items = items_for(batch, cfg.loss);

    StepRecord rec{step, 0.0, 0, batch.skipped_pairs};
    for (const auto& item : items) {
      auto g = loss_gradient(emb, item, cfg.loss);
      rec.risk += g.loss;
      rec.active_items += g.active;
      out.log.degenerate_events += g.degenerate;
      for (auto& term : g.terms) {
        if (!touched[term.sample]) {
          touched[term.sample] = 1;
          touched_list.push_back(term.sample);
        }
        double* dst = grad.data() + term.sample * dim;
        for (std::size_t k = 0; k < dim; ++k) dst[k] += term.grad[k];
      }
    }
    if (!items.empty()) rec.risk /= static_cast<double>(items.size());

    for (Index i : touched_list) {
      std::span<double> g(grad.data() + i * dim, dim);
      for (double x : g)
        if (!std::isfinite(x)) throw TrainingError(step, "non-finite gradient for sample " + std::to_string(i));
      project_to_tangent(g, emb.row(i));
      auto row = emb.mutable_row(i);
      for (std::size_t k = 0; k < dim; ++k) row[k] -= cfg.learning_rate * g[k];
      emb.renormalize(i);
      std::fill(g.begin(), g.end(), 0.0);
      touched[i] = 0;
    }
    touched_list.clear();
    out.log.steps.push_back(rec);
    if (cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0) out.log.snapshots.push_back(emb);
  }
  return out;
}

InitMode parse_init_mode(std::string_view name) {
  if (name == "random" || name == "random_uniform_sphere") return InitMode::random_uniform_sphere;
  if (name == "features" || name == "from_features") return InitMode::from_features;
  throw std::invalid_argument("unknown init mode: " + std::string(name));
}

std::string_view to_string(InitMode mode) {
  return mode == InitMode::random_uniform_sphere ? "random" : "features";
}

EmbeddingState initialize_embeddings(std::size_t n, std::size_t d, const InitSpec& spec,
                                     const LabeledPointSet* set) {
  if (d < 2) throw std::invalid_argument("init: dimension must be at least 2");
  CounterRng rng(spec.seed, 0x696e6974ULL);
  const auto random_direction = [&](std::span<double> out) {
    double len = 0.0;
    while (!(len > 1e-12)) {
      for (double& x : out) x = rng.normal();
      len = norm(out);
    }
    for (double& x : out) x /= len;
  };

  std::vector<double> data(n * d);
  if (spec.mode == InitMode::random_uniform_sphere) {
    for (Index i = 0; i < n; ++i) random_direction({data.data() + i * d, d});
    return EmbeddingState(d, std::move(data));
  }

  if (set == nullptr || !set->has_features()) throw std::invalid_argument("init: from_features needs feature vectors");
  if (set->feature_dim != d) throw std::invalid_argument("init: feature dimension differs from d");
  if (set->size() != n) throw std::invalid_argument("init: feature count differs from n");
  if (!(spec.lambda >= 0.0 && spec.lambda <= 1.0)) throw std::invalid_argument("init: lambda must lie in [0, 1]");
  std::vector<double> dir(d);
  for (Index i = 0; i < n; ++i) {
    const auto f = set->feature(i);
    const double fn = norm(f);
    if (!(fn > 0.0)) throw std::invalid_argument("init: zero feature vector at row " + std::to_string(i));
    random_direction(dir);
    for (std::size_t k = 0; k < d; ++k) data[i * d + k] = (1.0 - spec.lambda) * f[k] / fn + spec.lambda * dir[k];
  }
  return EmbeddingState::normalized(d, std::move(data));
}

SelectionLog collect_selection_log(ObservedLabels labels, const EmbeddingState& emb,
                                   const MinibatchSpec& spec, const LossConfig& cfg,
                                   std::size_t batches, std::uint64_t seed) {
  SelectionLog log;
  const CounterRng root(seed, 0x736b6577ULL);
  for (std::size_t b = 0; b < batches; ++b) {
    CounterRng rng = root.split(b);
    build_minibatch_triplets(labels, emb, spec, cfg, rng, &log);
  }
  return log;
}

}  // namespace noisyembed
