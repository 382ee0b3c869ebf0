#include "noisyembed/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "noisyembed/losses.hpp"
#include "noisyembed/risk.hpp"
#include "noisyembed/rng.hpp"

namespace noisyembed {

namespace {

constexpr double kIdentityTol = 1e-12;

VerifyCheck make(std::string name, double measured, double tolerance, bool passed, std::string detail = {}) {
  return {std::move(name), passed, measured, tolerance, std::move(detail)};
}

// Probability that a sample with true label `y` is observed as `o`.
double transition(Label y, Label o, double p, int k) {
  return y == o ? 1.0 - p : p / static_cast<double>(k - 1);
}

std::vector<double> random_unit(std::size_t d, CounterRng& rng) {
  std::vector<double> v(d);
  double len = 0.0;
  while (!(len > 1e-9)) {
    for (double& x : v) x = rng.normal();
    len = norm(v);
  }
  for (double& x : v) x /= len;
  return v;
}

VerifyCheck noise_monte_carlo(const VerifyOptions& opt, CounterRng rng) {
  double worst = 0.0;
  std::ostringstream detail;
  for (int k : {3, 5, 10, 50})
    for (double p : {0.1, 0.3, 0.5}) {
      const NoiseSpec spec{p, k, rng()};
      const auto closed = opt.pair_rates(spec);
      const auto mc = monte_carlo_pair_noise(spec, opt.monte_carlo_trials);
      const auto n = static_cast<double>(opt.monte_carlo_trials);
      for (auto [c, m] : {std::pair{closed.q_pos, mc.q_pos}, std::pair{closed.q_neg, mc.q_neg}}) {
        const double se = std::sqrt(std::max(m * (1.0 - m), 1.0 / n) / n);
        const double z = std::abs(c - m) / se;
        if (z > worst) {
          worst = z;
          detail.str("");
          detail << "worst at K=" << k << " p=" << p << ": closed " << c << " vs MC " << m;
        }
      }
    }
  return make("noise_monte_carlo", worst, 4.0, worst <= 4.0, detail.str());
}

// Pair-level and set-level enumeration of every observed-label outcome.
VerifyCheck noise_enumeration(const VerifyOptions& opt) {
  double worst = 0.0;
  for (int k : {3, 4})
    for (double p : {0.1, 0.3, 0.5}) {
      const auto closed = opt.pair_rates({p, k, 0});
      double q_pos = 0.0, q_neg = 0.0;
      for (Label a = 0; a < k; ++a)
        for (Label b = 0; b < k; ++b) {
          if (a != b) q_pos += transition(0, a, p, k) * transition(0, b, p, k);
          if (a == b) q_neg += transition(0, a, p, k) * transition(1, b, p, k);
        }
      worst = std::max({worst, std::abs(q_pos - closed.q_pos), std::abs(q_neg - closed.q_neg)});

      // Expected flipped fraction per channel over a whole labeled set.
      const std::vector<Label> truth = k == 3 ? std::vector<Label>{0, 0, 1, 1, 2, 2}
                                              : std::vector<Label>{0, 0, 1, 2, 3, 3, 1, 2};
      const std::size_t n = truth.size();
      std::size_t states = 1;
      for (std::size_t i = 0; i < n; ++i) states *= static_cast<std::size_t>(k);
      std::vector<Label> obs(n);
      // long double keeps the 4^8-term sums well inside the tolerance.
      long double flips_pos = 0.0L, flips_neg = 0.0L, count_pos = 0.0L, count_neg = 0.0L;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) (truth[i] == truth[j] ? count_pos : count_neg) += 1.0;
      for (std::size_t s = 0; s < states; ++s) {
        std::size_t code = s;
        long double prob = 1.0L;
        for (std::size_t i = 0; i < n; ++i) {
          obs[i] = static_cast<Label>(code % static_cast<std::size_t>(k));
          code /= static_cast<std::size_t>(k);
          prob *= transition(truth[i], obs[i], p, k);
        }
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) {
            const bool clean_pos = truth[i] == truth[j];
            const bool obs_pos = obs[i] == obs[j];
            if (clean_pos != obs_pos) (clean_pos ? flips_pos : flips_neg) += prob;
          }
      }
      worst = std::max({worst, static_cast<double>(std::abs(flips_pos / count_pos - closed.q_pos)),
                        static_cast<double>(std::abs(flips_neg / count_neg - closed.q_neg))});
    }
  return make("noise_enumeration", worst, kIdentityTol, worst <= kIdentityTol);
}

// Expected weighted auxiliary loss over all joint corruptions of one pair.
VerifyCheck noisy_risk_enumeration(const VerifyOptions& opt, CounterRng rng) {
  double worst = 0.0;
  for (int k : {3, 4})
    for (double p : {0.1, 0.3, 0.4, 0.5}) {
      const auto rates = opt.pair_rates({p, k, 0});
      const WeightScheme w = WeightScheme::uniform_one_to_one(k);
      for (PairLabel t : {PairLabel::positive, PairLabel::negative}) {
        const double d = kMaxDistance * rng.uniform();
        const Label y1 = t == PairLabel::positive ? 0 : 1;
        double expected = 0.0;
        for (Label a = 0; a < k; ++a)
          for (Label b = 0; b < k; ++b) {
            const PairLabel seen = a == b ? PairLabel::positive : PairLabel::negative;
            expected += transition(0, a, p, k) * transition(y1, b, p, k) * w.weight(seen) *
                        auxiliary_pair_loss(d, seen);
          }
        const auto form = expected_noisy_pair_risk(auxiliary_pair_loss(d, t), t, w, rates);
        worst = std::max({worst, std::abs(expected - form.affine), std::abs(expected - form.two_branch)});
      }
    }
  return make("noisy_risk_enumeration", worst, kIdentityTol, worst <= kIdentityTol);
}

PairLabel random_label(CounterRng& rng) { return rng.below(2) == 0 ? PairLabel::positive : PairLabel::negative; }

std::vector<VerifyCheck> identities(const VerifyOptions& opt, CounterRng rng) {
  double aux = 0.0, trip = 0.0, marg = 0.0, affine = 0.0;
  for (std::size_t s = 0; s < opt.identity_samples; ++s) {
    const double d1 = kMaxDistance * rng.uniform();
    const double d2 = kMaxDistance * rng.uniform();
    const PairLabel t = random_label(rng);
    LossConfig cfg;
    cfg.alpha = rng.uniform();
    cfg.beta = kMaxDistance * rng.uniform();

    aux = std::max(aux, std::abs(auxiliary_pair_loss(d1, flip(t)) - (kMaxDistance - auxiliary_pair_loss(d1, t))));
    const double decomposed =
        auxiliary_pair_loss(d1, PairLabel::positive) + auxiliary_pair_loss(d2, PairLabel::negative) + cfg.alpha;
    trip = std::max(trip, std::abs(unhinged_triplet_loss(d1, d2, cfg) - decomposed));
    marg = std::max(marg, std::abs(unhinged_marginal_loss(d1, t, cfg) + unhinged_marginal_loss(d1, flip(t), cfg) -
                                   (2.0 * kMaxDistance + 2.0 * cfg.alpha)));

    const int k = 2 + static_cast<int>(rng.below(99));
    const double p = rng.uniform();
    const WeightScheme w{0.01 + rng.uniform(), 0.01 + rng.uniform()};
    const auto rates = opt.pair_rates({p, k, 0});
    const double q = rates.rate(t);
    const double two_branch =
        (1.0 - q) * w.weight(t) * auxiliary_pair_loss(d1, t) + q * w.weight(flip(t)) * auxiliary_pair_loss(d1, flip(t));
    const auto form = expected_noisy_pair_risk(auxiliary_pair_loss(d1, t), t, w, rates);
    affine = std::max({affine, std::abs(form.affine - two_branch), std::abs(form.two_branch - two_branch)});
  }
  return {make("auxiliary_reflection", aux, kIdentityTol, aux <= kIdentityTol),
          make("unhinged_triplet_decomposition", trip, kIdentityTol, trip <= kIdentityTol),
          make("unhinged_marginal_reflection", marg, kIdentityTol, marg <= kIdentityTol),
          make("noisy_risk_affine_form", affine, kIdentityTol, affine <= kIdentityTol)};
}

// Loss of an item evaluated on raw (not necessarily unit) coordinates.
double raw_loss(const std::vector<std::vector<double>>& x, const LossItem& item, const LossConfig& cfg) {
  if (const auto* tr = std::get_if<Triplet>(&item))
    return triplet_loss(euclidean_distance(x[tr->anchor], x[tr->positive]),
                        euclidean_distance(x[tr->anchor], x[tr->negative]), cfg)
        .value;
  const auto& pr = std::get<LabeledPair>(item);
  return marginal_loss(euclidean_distance(x[pr.i], x[pr.j]), pr.label, cfg).value;
}

VerifyCheck gradient_finite_difference(const VerifyOptions& opt, CounterRng rng) {
  constexpr std::size_t kDim = 8;
  constexpr double kStep = 1e-5;
  constexpr double kMinSlack = 1e-3;
  constexpr double kTol = 1e-4;
  const LossConfig cfg;
  double worst = 0.0;
  std::size_t tested = 0;

  for (int family = 0; family < 2; ++family) {
    std::size_t done = 0;
    while (done < opt.gradient_configs) {
      std::vector<std::vector<double>> x;
      for (int r = 0; r < 3; ++r) x.push_back(random_unit(kDim, rng));
      LossItem item;
      double slack = 0.0, dmin = 0.0;
      if (family == 0) {
        item = Triplet{0, 1, 2};
        const double dap = euclidean_distance(x[0], x[1]);
        const double dan = euclidean_distance(x[0], x[2]);
        slack = dap - dan + cfg.alpha;
        dmin = std::min(dap, dan);
      } else {
        const PairLabel t = random_label(rng);
        item = LabeledPair{0, 1, t};
        const double d = euclidean_distance(x[0], x[1]);
        slack = (d - cfg.beta) * sign(t) + cfg.alpha;
        dmin = d;
      }
      // Only active, non-degenerate configurations have a defined gradient.
      if (slack < kMinSlack || dmin < kMinSlack) continue;

      std::vector<double> flat;
      for (const auto& v : x) flat.insert(flat.end(), v.begin(), v.end());
      const EmbeddingState emb(kDim, flat);
      LossConfig c = cfg;
      c.family = family == 0 ? LossFamily::triplet : LossFamily::marginal;
      const auto g = loss_gradient(emb, item, c);

      std::vector<double> analytic(3 * kDim, 0.0), numeric(3 * kDim, 0.0);
      for (const auto& term : g.terms)
        for (std::size_t t = 0; t < kDim; ++t) analytic[term.sample * kDim + t] += term.grad[t];
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t t = 0; t < kDim; ++t) {
          auto xp = x, xm = x;
          xp[r][t] += kStep;
          xm[r][t] -= kStep;
          numeric[r * kDim + t] = (raw_loss(xp, item, c) - raw_loss(xm, item, c)) / (2.0 * kStep);
        }
      double diff = 0.0;
      for (std::size_t t = 0; t < analytic.size(); ++t) diff += (analytic[t] - numeric[t]) * (analytic[t] - numeric[t]);
      const double rel = std::sqrt(diff) / std::max(norm(numeric), 1e-12);
      worst = std::max(worst, rel);
      ++done;
      ++tested;
    }
  }
  return make("gradient_finite_difference", worst, kTol, worst <= kTol,
              std::to_string(tested) + " active configurations");
}

// Class-collapsed regular simplex under a random rotation: every sample sits
// on its class vertex. It minimizes the clean weighted auxiliary risk.
EmbeddingState simplex_embedding(const std::vector<Label>& labels, int k, std::size_t dim, CounterRng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < dim) {
    auto v = random_unit(dim, rng);
    for (const auto& b : basis) {
      const double proj = dot(v, b);
      for (std::size_t t = 0; t < dim; ++t) v[t] -= proj * b[t];
    }
    const double len = norm(v);
    if (len < 1e-6) continue;
    for (double& x : v) x /= len;
    basis.push_back(std::move(v));
  }
  std::vector<double> vertices(static_cast<std::size_t>(k) * dim, 0.0);
  const double off = 1.0 / static_cast<double>(k);
  const double scale = 1.0 / std::sqrt(1.0 - off);
  for (int c = 0; c < k; ++c)
    for (int a = 0; a < k; ++a) {
      const double coord = ((a == c ? 1.0 : 0.0) - off) * scale;
      for (std::size_t t = 0; t < dim; ++t)
        vertices[static_cast<std::size_t>(c) * dim + t] += coord * basis[static_cast<std::size_t>(a)][t];
    }
  std::vector<double> data;
  for (Label y : labels) {
    const auto* row = vertices.data() + static_cast<std::size_t>(y) * dim;
    data.insert(data.end(), row, row + dim);
  }
  return EmbeddingState::normalized(dim, std::move(data));
}

VerifyCheck risk_ordering_instances(const VerifyOptions& opt, CounterRng rng) {
  constexpr int kClasses = 4;
  constexpr std::size_t kPerClass = 5;
  constexpr std::size_t kDim = 8;
  std::vector<Label> labels;
  for (int c = 0; c < kClasses; ++c)
    for (std::size_t s = 0; s < kPerClass; ++s) labels.push_back(c);
  std::vector<LabeledPair> pairs;
  for (Index i = 0; i < labels.size(); ++i)
    for (Index j = i + 1; j < labels.size(); ++j)
      pairs.push_back({i, j, labels[i] == labels[j] ? PairLabel::positive : PairLabel::negative});

  const WeightScheme w = WeightScheme::uniform_one_to_one(kClasses);
  const auto rates = opt.pair_rates({opt.ordering_noise_rate, kClasses, 0});
  const double q = q_multiplier(w, rates);

  std::size_t qualifying = 0, violations = 0, swapped_missed = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_decomp = 0.0;
  for (int inst = 0; inst < opt.ordering_instances; ++inst) {
    CounterRng irng = rng.split(static_cast<std::uint64_t>(inst));
    const EmbeddingState star = simplex_embedding(labels, kClasses, kDim, irng);
    for (int pert = 0; pert < opt.ordering_perturbations; ++pert) {
      const double sigma = 0.05 + 1.45 * irng.uniform();
      std::vector<double> data(star.data().begin(), star.data().end());
      for (double& x : data) x += sigma * irng.normal();
      const EmbeddingState other = EmbeddingState::normalized(kDim, std::move(data));

      const auto rep = verify_risk_ordering(star, other, pairs, w, rates);
      worst_decomp = std::max(worst_decomp, rep.decomposition_error);
      if (verify_risk_ordering(other, star, pairs, w, rates).precondition()) ++swapped_missed;
      if (!rep.precondition()) continue;
      ++qualifying;
      worst_margin = std::min(worst_margin, rep.bound - rep.noisy_diff);
      if (!rep.chain_holds || rep.noisy_diff > 0.0) ++violations;
    }
  }
  std::ostringstream detail;
  detail << "Q=" << q << ", " << qualifying << " of "
         << opt.ordering_instances * opt.ordering_perturbations << " perturbations meet the precondition, "
         << violations << " violations, " << swapped_missed << " swapped comparisons not flagged, "
         << "max decomposition error " << worst_decomp;
  const bool ok = q >= 0.0 && qualifying > 0 && violations == 0 && swapped_missed == 0 && worst_decomp <= 1e-12;
  return make("risk_ordering_instances", static_cast<double>(violations), 0.0, ok, detail.str());
}

VerifyCheck marginal_partition_check(CounterRng rng) {
  constexpr int kClasses = 4;
  constexpr std::size_t kDim = 8;
  LabeledPointSet set;
  set.num_classes = kClasses;
  for (int c = 0; c < kClasses; ++c)
    for (int s = 0; s < 5; ++s) set.true_labels.push_back(c);
  set.observed_labels = set.true_labels;
  std::vector<double> data;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto v = random_unit(kDim, rng);
    data.insert(data.end(), v.begin(), v.end());
  }
  const EmbeddingState emb(kDim, std::move(data));
  const LossConfig cfg{LossFamily::marginal};

  std::size_t mismatches = 0;
  const auto clean_part = marginal_partition(all_noisy_pairs(set), emb, cfg);
  mismatches += clean_part.t_m_plus.size() + clean_part.t_m_minus.size();

  for (double p : {0.1, 0.3, 0.5}) {
    const auto noisy = inject_noise(set, {p, kClasses, rng()});
    const auto pairs = all_noisy_pairs(noisy);
    const auto part = marginal_partition(pairs, emb, cfg);
    std::vector<int> member(pairs.size(), 0);
    std::size_t expect_plus = 0, expect_minus = 0, expect_both = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double d = pairwise_distance(emb, pairs[k].i, pairs[k].j);
      const bool a_clean = (d - cfg.beta) * sign(pairs[k].clean) + cfg.alpha > 0.0;
      const bool a_noisy = (d - cfg.beta) * sign(pairs[k].observed) + cfg.alpha > 0.0;
      expect_plus += a_clean && !a_noisy;
      expect_minus += !a_clean && a_noisy;
      expect_both += a_clean && a_noisy;
      member[k] = a_clean && !a_noisy ? 1 : (!a_clean && a_noisy ? 2 : (a_clean ? 3 : 0));
    }
    for (auto k : part.t_m_plus) mismatches += member[k] != 1;
    for (auto k : part.t_m_minus) mismatches += member[k] != 2;
    for (auto k : part.t_m) mismatches += member[k] != 3;
    mismatches += (part.t_m_plus.size() != expect_plus) + (part.t_m_minus.size() != expect_minus) +
                  (part.t_m.size() != expect_both);
  }
  return make("marginal_partition", static_cast<double>(mismatches), 0.0, mismatches == 0);
}

VerifyCheck residual_z() {
  double worst = 0.0;
  const auto z_of = [](double eta_plus, double eta_minus) {
    SkewEstimate s;
    s.eta_plus = eta_plus;
    s.eta_minus = eta_minus;
    s.gamma = eta_minus / eta_plus;
    return residual_z_estimate(s);
  };
  const auto a = z_of(2.0, 1.0);
  const auto b = z_of(1.25, 1.0);
  const auto c = z_of(1.0, 1.0);
  worst = std::max({std::abs(a.z - 1.0), std::abs(b.z - 4.0)});
  const bool ok = worst <= 1e-12 && !a.unbounded && !b.unbounded && c.unbounded;
  return make("residual_z", worst, 1e-12, ok);
}

VerifyCheck bound_bracketing() {
  constexpr double kStep = 1e-6;
  constexpr double kTol = 1e-9;
  double worst = 0.0;
  std::size_t bracket_failures = 0;
  const auto probe = [&](const BoundResult& r, const WeightScheme& w, int k) {
    if (!r.exact) ++bracket_failures;
    if (r.p_star >= 1.0) return;
    worst = std::max(worst, std::abs(q_at_noise_rate(r.p_star, k, w)));
    if (q_at_noise_rate(std::max(0.0, r.p_star - kStep), k, w) < 0.0) ++bracket_failures;
    if (q_at_noise_rate(r.p_star + kStep, k, w) >= 0.0) ++bracket_failures;
  };
  for (int k : {3, 10, 50, 100, 1000}) {
    for (double eta : {1.0, 1.5, 2.0, 4.0}) probe(solve_triplet_bound(k, eta), triplet_bound_weights(k, eta), k);
    for (double gamma : {0.25, 0.5, 0.75, 1.0})
      probe(solve_marginal_bound(k, gamma), marginal_bound_weights(k, gamma), k);
  }
  return make("bound_bracketing", worst, kTol, worst <= kTol && bracket_failures == 0,
              std::to_string(bracket_failures) + " bracket failures");
}

template <typename F>
void guarded(std::vector<VerifyCheck>& out, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    out.push_back(make(name, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()));
  }
}

}  // namespace

const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names{
      "noise_monte_carlo",   "noise_enumeration",      "noisy_risk_enumeration",
      "auxiliary_reflection", "unhinged_triplet_decomposition", "unhinged_marginal_reflection",
      "noisy_risk_affine_form", "gradient_finite_difference", "risk_ordering_instances",
      "marginal_partition",  "residual_z",             "bound_bracketing"};
  return names;
}

bool VerifyReport::all_passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const VerifyCheck& VerifyReport::check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("verify: no check named " + name);
}

VerifyReport run_all(std::uint64_t seed, const VerifyOptions& options) {
  const CounterRng root(seed, 0x766572696679ULL);
  VerifyReport report;
  report.seed = seed;
  auto& out = report.checks;
  guarded(out, "noise_monte_carlo", [&] { out.push_back(noise_monte_carlo(options, root.split(1))); });
  guarded(out, "noise_enumeration", [&] { out.push_back(noise_enumeration(options)); });
  guarded(out, "noisy_risk_enumeration", [&] { out.push_back(noisy_risk_enumeration(options, root.split(2))); });
  {
    std::vector<VerifyCheck> ids;
    try {
      ids = identities(options, root.split(3));
    } catch (const std::exception& e) {
      for (const char* n : {"auxiliary_reflection", "unhinged_triplet_decomposition", "unhinged_marginal_reflection",
                            "noisy_risk_affine_form"})
        ids.push_back(make(n, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()));
    }
    out.insert(out.end(), ids.begin(), ids.end());
  }
  guarded(out, "gradient_finite_difference",
          [&] { out.push_back(gradient_finite_difference(options, root.split(4))); });
  guarded(out, "risk_ordering_instances", [&] { out.push_back(risk_ordering_instances(options, root.split(5))); });
  guarded(out, "marginal_partition", [&] { out.push_back(marginal_partition_check(root.split(6))); });
  guarded(out, "residual_z", [&] { out.push_back(residual_z()); });
  guarded(out, "bound_bracketing", [&] { out.push_back(bound_bracketing()); });
  return report;
}

nlohmann::json to_json(const VerifyReport& report) {
  nlohmann::json doc;
  doc["seed"] = report.seed;
  doc["all_passed"] = report.all_passed();
  doc["checks"] = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json j{{"name", c.name}, {"passed", c.passed}, {"tolerance", c.tolerance}};
    j["measured"] = std::isfinite(c.measured) ? nlohmann::json(c.measured) : nlohmann::json(nullptr);
    if (!c.detail.empty()) j["detail"] = c.detail;
    doc["checks"].push_back(std::move(j));
  }
  return doc;
}

}  // namespace noisyembed
