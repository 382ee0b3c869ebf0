// noisyembed command line: dataset generation, noise and bound calculators,
// training, evaluation, sweeps and the verification suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "noisyembed/core.hpp"
#include "noisyembed/datagen.hpp"
#include "noisyembed/harness.hpp"
#include "noisyembed/metrics.hpp"
#include "noisyembed/noise.hpp"
#include "noisyembed/optimizer.hpp"
#include "noisyembed/risk.hpp"
#include "noisyembed/verify.hpp"

namespace ne = noisyembed;

namespace {

void emit(const nlohmann::json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
  } else {
    ne::save_json(doc, path);
  }
}

struct GenArgs {
  ne::SynthSpec spec;
  double p = 0.0;
  std::uint64_t noise_seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a) {
  auto set = ne::generate(a.spec);
  if (a.p > 0.0) set = ne::inject_noise(set, {a.p, a.spec.num_classes, a.noise_seed});
  emit(ne::to_json(set), a.out);
  return 0;
}

struct NoiseArgs {
  double p = 0.0;
  int k = 10;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

int run_noise_calc(const NoiseArgs& a) {
  const ne::NoiseSpec spec{a.p, a.k, a.seed};
  const auto q = ne::pair_noise_rates(spec);
  nlohmann::json doc{{"p", a.p}, {"K", a.k}, {"q_neg", q.q_neg}, {"q_pos", q.q_pos}};
  if (a.trials > 0) {
    const auto mc = ne::monte_carlo_pair_noise(spec, a.trials);
    doc["empirical"] = {{"trials", a.trials}, {"q_neg", mc.q_neg}, {"q_pos", mc.q_pos}};
  }
  emit(doc, "");
  return 0;
}

struct BoundArgs {
  std::string loss = "triplet";
  int k = 10;
  double eta = 1.0;
  double gamma = 1.0;
  bool exact = false;
};

int run_bound(const BoundArgs& a) {
  const auto family = ne::parse_loss_family(a.loss);
  const auto r = family == ne::LossFamily::triplet ? ne::solve_triplet_bound(a.k, a.eta)
                                                   : ne::solve_marginal_bound(a.k, a.gamma);
  nlohmann::json doc{{"p_star", a.exact ? r.p_star : r.asymptotic},
                     {"asymptotic", r.asymptotic},
                     {"exact", a.exact && r.exact}};
  if (a.exact && !r.diagnostic.empty()) doc["diagnostic"] = r.diagnostic;
  emit(doc, "");
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string log_csv;
  std::string selection_csv;
  ne::TrainConfig cfg;
  std::string loss = "triplet";
  std::string mining = "random_semi_hard";
  bool unhinged = false;
  std::string init = "random";
  double lambda = 0.2;
  std::size_t dim = 16;
  std::uint64_t init_seed = 0;
};

int run_train(TrainArgs a) {
  const auto set = ne::load_point_set(a.data);
  a.cfg.loss.family = ne::parse_loss_family(a.loss);
  a.cfg.loss.mining = ne::parse_mining(a.mining);
  a.cfg.loss.hinged = !a.unhinged;
  const ne::InitSpec init{ne::parse_init_mode(a.init), a.init_seed, a.lambda};
  const std::size_t dim = init.mode == ne::InitMode::from_features ? set.feature_dim : a.dim;
  auto start = ne::initialize_embeddings(set.size(), dim, init, &set);
  const auto result = ne::train(ne::ObservedLabels::of(set), std::move(start), a.cfg);

  if (!a.log_csv.empty()) {
    std::ofstream out(a.log_csv);
    if (!out) throw std::runtime_error("cannot write " + a.log_csv);
    result.log.write_csv(out);
  }
  if (!a.selection_csv.empty()) {
    std::ofstream out(a.selection_csv);
    if (!out) throw std::runtime_error("cannot write " + a.selection_csv);
    result.log.selection.write_csv(out);
  }
  emit(ne::to_json(set, result.state), a.out);
  return 0;
}

struct EvalArgs {
  std::string embedding;
  std::vector<int> ks{1, 10};
  int restarts = 10;
  std::uint64_t seed = 0;
  bool observed = false;
};

int run_eval(const EvalArgs& a) {
  const auto doc = ne::load_json(a.embedding);
  const auto set = ne::point_set_from_json(doc);
  const auto emb = ne::embedding_from_json(doc);
  const auto labels = set.labels(a.observed ? ne::LabelChannel::observed_labels : ne::LabelChannel::true_labels);
  const auto report = ne::evaluate(emb, labels, set.num_classes, {a.ks, a.restarts, a.seed});
  emit(ne::to_json(report), "");
  return 0;
}

int run_sweep(const std::string& config, const std::string& out) {
  const auto cfg = ne::sweep_config_from_json(ne::load_json(config));
  const auto report = ne::run_sweep(cfg, ne::default_worker_count());
  ne::emit_report(report, out);
  std::size_t failed = 0;
  for (const auto& c : report.cells)
    if (c.failed) {
      ++failed;
      std::cerr << "cell failed: method=" << c.method << " p=" << c.p << " seed=" << c.seed << ": " << c.error
                << '\n';
    }
  std::cerr << report.cells.size() - failed << " of " << report.cells.size() << " cells completed\n";
  return failed == 0 ? 0 : 1;
}

int run_verify(std::uint64_t seed, const std::string& out) {
  const auto report = ne::run_all(seed);
  emit(ne::to_json(report), out);
  for (const auto& c : report.checks)
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << c.measured << " tol=" << c.tolerance
              << '\n';
  return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust deep metric learning toolkit"};
  app.require_subcommand(1);
  int status = 0;

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic labeled dataset (JSON)");
  gen_cmd->add_option("--K", gen.spec.num_classes, "Number of classes")->check(CLI::Range(2, 1 << 20));
  gen_cmd->add_option("--per-class", gen.spec.per_class, "Samples per class")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--d", gen.spec.dim, "Feature dimension")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--spread", gen.spec.spread, "Cluster concentration");
  gen_cmd->add_option("--seed", gen.spec.seed, "Data seed");
  gen_cmd->add_option("--p", gen.p, "Optional sample label noise rate")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--noise-seed", gen.noise_seed, "Noise seed");
  gen_cmd->add_option("-o,--out", gen.out, "Output file (stdout if omitted)");
  gen_cmd->callback([&] { status = run_gen(gen); });

  NoiseArgs noise;
  auto* noise_cmd = app.add_subcommand("noise-calc", "Pair flip rates for uniform sample noise");
  noise_cmd->add_option("--p", noise.p, "Sample noise rate")->required();
  noise_cmd->add_option("--K", noise.k, "Number of classes")->required();
  noise_cmd->add_option("--trials", noise.trials, "Monte Carlo trials (0 disables)");
  noise_cmd->add_option("--seed", noise.seed, "Monte Carlo seed");
  noise_cmd->callback([&] { status = run_noise_calc(noise); });

  BoundArgs bound;
  auto* bound_cmd = app.add_subcommand("bound", "Maximal tolerated sample noise rate");
  bound_cmd->add_option("--loss", bound.loss, "triplet or marginal")
      ->check(CLI::IsMember({"triplet", "marginal"}));
  bound_cmd->add_option("--K", bound.k, "Number of classes")->required();
  auto* eta_opt = bound_cmd->add_option("--eta", bound.eta, "Mining skew (triplet)");
  auto* gamma_opt = bound_cmd->add_option("--gamma", bound.gamma, "Skew ratio (marginal)");
  eta_opt->excludes(gamma_opt);
  bound_cmd->add_flag("--exact", bound.exact, "Report the finite-K bisection result as p_star");
  bound_cmd->callback([&] { status = run_bound(bound); });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a free embedding table on observed labels");
  train_cmd->add_option("--data", tr.data, "Dataset JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-o,--out", tr.out, "Embedding JSON (stdout if omitted)");
  train_cmd->add_option("--log", tr.log_csv, "Per-step CSV log");
  train_cmd->add_option("--selection", tr.selection_csv, "Negative selection CSV");
  train_cmd->add_option("--loss", tr.loss, "triplet or marginal")->check(CLI::IsMember({"triplet", "marginal"}));
  train_cmd->add_option("--mining", tr.mining, "random_semi_hard, fixed_semi_hard or exhaustive");
  train_cmd->add_flag("--unhinged", tr.unhinged, "Drop the hinge");
  train_cmd->add_option("--alpha", tr.cfg.loss.alpha, "Margin");
  train_cmd->add_option("--beta", tr.cfg.loss.beta, "Marginal threshold");
  train_cmd->add_option("--steps", tr.cfg.steps, "SGD steps");
  train_cmd->add_option("--lr", tr.cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--classes-per-batch", tr.cfg.minibatch.classes_per_batch, "Classes per minibatch");
  train_cmd->add_option("--samples-per-class", tr.cfg.minibatch.samples_per_class, "Samples per class");
  train_cmd->add_option("--seed", tr.cfg.seed, "Training seed");
  train_cmd->add_option("--init", tr.init, "random or features")->check(CLI::IsMember({"random", "features"}));
  train_cmd->add_option("--lambda", tr.lambda, "Random mixing weight for feature init");
  train_cmd->add_option("--d", tr.dim, "Embedding dimension for random init");
  train_cmd->add_option("--init-seed", tr.init_seed, "Initialization seed");
  train_cmd->callback([&] { status = run_train(tr); });

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@K and k-means NMI of an embedding JSON");
  eval_cmd->add_option("embedding", ev.embedding, "Embedding JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ks", ev.ks, "Recall cutoffs")->delimiter(',');
  eval_cmd->add_option("--restarts", ev.restarts, "k-means restarts");
  eval_cmd->add_option("--seed", ev.seed, "k-means seed");
  eval_cmd->add_flag("--observed", ev.observed, "Score against observed instead of true labels");
  eval_cmd->callback([&] { status = run_eval(ev); });

  std::string sweep_config, sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Noise-rate sweep with topline comparison");
  sweep_cmd->add_option("config", sweep_config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  sweep_cmd->callback([&] { status = run_sweep(sweep_config, sweep_out); });

  std::uint64_t verify_seed = 1;
  std::string verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle and identity checks");
  verify_cmd->add_option("--seed", verify_seed, "Seed");
  verify_cmd->add_option("-o,--out", verify_out, "Report JSON (stdout if omitted)");
  verify_cmd->callback([&] { status = run_verify(verify_seed, verify_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
