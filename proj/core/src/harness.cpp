#include "noisyembed/harness.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "noisyembed/noise.hpp"
#include "noisyembed/risk.hpp"
#include "noisyembed/rng.hpp"

namespace noisyembed {

namespace {

enum SeedTag : std::uint64_t { kData = 1, kNoise, kSubsample, kInit, kTrain, kEval };

std::uint64_t derive(std::uint64_t base, int repeat, std::uint64_t tag, std::uint64_t extra = 0) {
  CounterRng rng = CounterRng(base).split(static_cast<std::uint64_t>(repeat)).split(tag).split(extra);
  return rng();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("malformed number in report CSV: " + s);
  return v;
}

double safe_ratio(double num, double den) {
  return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
}

double recall_or_nan(const EvalReport& r, int k) {
  auto it = r.recall_at.find(k);
  return it == r.recall_at.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
}

MethodSpec method(std::string name, LossFamily family, Mining mining) {
  MethodSpec m;
  m.name = std::move(name);
  m.loss.family = family;
  m.loss.mining = mining;
  return m;
}

}  // namespace

void SweepConfig::validate() const {
  if (noise_rates.empty()) throw std::invalid_argument("sweep: no noise rates");
  for (double p : noise_rates)
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("sweep: noise rates must lie in [0, 1)");
  if (methods.empty()) throw std::invalid_argument("sweep: no methods");
  for (const auto& m : methods) {
    m.loss.validate();
    if (m.name.empty()) throw std::invalid_argument("sweep: method without a name");
    if (m.name.find(',') != std::string::npos) throw std::invalid_argument("sweep: method names may not contain commas");
  }
  if (repeats < 1) throw std::invalid_argument("sweep: repeats must be at least 1");
  data.validate();
  if (data.num_classes < 3) throw std::invalid_argument("sweep: bound solvers need K >= 3");
  if (std::find(eval_ks.begin(), eval_ks.end(), 1) == eval_ks.end())
    throw std::invalid_argument("sweep: eval_ks must include 1");
  if (train.steps == 0 || !(train.learning_rate > 0.0)) throw std::invalid_argument("sweep: invalid training budget");
  if (kmeans_restarts < 1) throw std::invalid_argument("sweep: kmeans_restarts must be positive");
}

SweepConfig SweepConfig::defaults() {
  SweepConfig cfg;
  cfg.methods = {method("triplet_random", LossFamily::triplet, Mining::random_semi_hard),
                 method("triplet_fixed", LossFamily::triplet, Mining::fixed_semi_hard),
                 method("marginal_random", LossFamily::marginal, Mining::random_semi_hard),
                 method("marginal_features", LossFamily::marginal, Mining::random_semi_hard)};
  cfg.methods.back().init = InitMode::from_features;
  cfg.methods.back().init_lambda = 0.2;
  cfg.data = SynthSpec{10, 50, 16, 1.0, 0};
  cfg.train.steps = 1000;
  cfg.train.learning_rate = 0.05;
  cfg.train.minibatch = MinibatchSpec{12, 5, 0};
  return cfg;
}

nlohmann::json to_json(const SweepConfig& cfg) {
  nlohmann::json doc;
  doc["noise_rates"] = cfg.noise_rates;
  doc["methods"] = nlohmann::json::array();
  for (const auto& m : cfg.methods) {
    doc["methods"].push_back({{"name", m.name},
                              {"loss", to_string(m.loss.family)},
                              {"mining", to_string(m.loss.mining)},
                              {"hinged", m.loss.hinged},
                              {"alpha", m.loss.alpha},
                              {"beta", m.loss.beta},
                              {"init", to_string(m.init)},
                              {"init_lambda", m.init_lambda}});
  }
  doc["repeats"] = cfg.repeats;
  doc["base_seed"] = cfg.base_seed;
  doc["train"] = {{"steps", cfg.train.steps},
                  {"learning_rate", cfg.train.learning_rate},
                  {"classes_per_batch", cfg.train.minibatch.classes_per_batch},
                  {"samples_per_class", cfg.train.minibatch.samples_per_class}};
  doc["data"] = {{"K", cfg.data.num_classes},
                 {"per_class", cfg.data.per_class},
                 {"d", cfg.data.dim},
                 {"spread", cfg.data.spread}};
  doc["eval_ks"] = cfg.eval_ks;
  doc["kmeans_restarts"] = cfg.kmeans_restarts;
  doc["stratified_topline"] = cfg.stratified_topline;
  return doc;
}

namespace {

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string("sweep config: unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

SweepConfig sweep_config_from_json(const nlohmann::json& doc) {
  SweepConfig cfg = SweepConfig::defaults();
  try {
    reject_unknown(doc,
                   {"noise_rates", "methods", "repeats", "base_seed", "train", "data", "eval_ks",
                    "kmeans_restarts", "stratified_topline"},
                   "top level");
    read(doc, "noise_rates", cfg.noise_rates);
    read(doc, "repeats", cfg.repeats);
    read(doc, "base_seed", cfg.base_seed);
    read(doc, "eval_ks", cfg.eval_ks);
    read(doc, "kmeans_restarts", cfg.kmeans_restarts);
    read(doc, "stratified_topline", cfg.stratified_topline);
    if (doc.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : doc.at("methods")) {
        reject_unknown(m, {"name", "loss", "mining", "hinged", "alpha", "beta", "init", "init_lambda"}, "methods");
        MethodSpec spec;
        spec.name = m.at("name").get<std::string>();
        if (m.contains("loss")) spec.loss.family = parse_loss_family(m.at("loss").get<std::string>());
        if (m.contains("mining")) spec.loss.mining = parse_mining(m.at("mining").get<std::string>());
        read(m, "hinged", spec.loss.hinged);
        read(m, "alpha", spec.loss.alpha);
        read(m, "beta", spec.loss.beta);
        if (m.contains("init")) spec.init = parse_init_mode(m.at("init").get<std::string>());
        read(m, "init_lambda", spec.init_lambda);
        cfg.methods.push_back(std::move(spec));
      }
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      reject_unknown(t, {"steps", "learning_rate", "classes_per_batch", "samples_per_class"}, "train");
      read(t, "steps", cfg.train.steps);
      read(t, "learning_rate", cfg.train.learning_rate);
      read(t, "classes_per_batch", cfg.train.minibatch.classes_per_batch);
      read(t, "samples_per_class", cfg.train.minibatch.samples_per_class);
    }
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      reject_unknown(d, {"K", "per_class", "d", "spread"}, "data");
      read(d, "K", cfg.data.num_classes);
      read(d, "per_class", cfg.data.per_class);
      read(d, "d", cfg.data.dim);
      read(d, "spread", cfg.data.spread);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("sweep config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

bool SweepReport::any_failed() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.failed; });
}

CellResult run_cell(const SweepConfig& cfg, int repeat, std::size_t p_index, std::size_t method_index) {
  const MethodSpec& m = cfg.methods.at(method_index);
  CellResult cell;
  cell.method = m.name;
  cell.p = cfg.noise_rates.at(p_index);
  cell.repeat = repeat;
  cell.seed = derive(cfg.base_seed, repeat, kData);

  SynthSpec data_spec = cfg.data;
  data_spec.seed = cell.seed;
  const LabeledPointSet base = generate(data_spec);
  const int k = base.num_classes;

  const LabeledPointSet noisy =
      inject_noise(base, {cell.p, k, derive(cfg.base_seed, repeat, kNoise, p_index)});
  const Subsample top = subsample_clean(base, 1.0 - cell.p, derive(cfg.base_seed, repeat, kSubsample, p_index),
                                        cfg.stratified_topline);

  const InitSpec init{m.init, derive(cfg.base_seed, repeat, kInit), m.init_lambda};
  const EmbeddingState init_full = initialize_embeddings(base.size(), cfg.data.dim, init, &base);
  std::vector<double> init_rows;
  for (Index i : top.kept) {
    const auto r = init_full.row(i);
    init_rows.insert(init_rows.end(), r.begin(), r.end());
  }
  EmbeddingState init_top(cfg.data.dim, std::move(init_rows));

  TrainConfig tc = cfg.train;
  tc.loss = m.loss;
  tc.seed = derive(cfg.base_seed, repeat, kTrain, p_index);
  tc.snapshot_every = 0;
  tc.minibatch.classes_per_batch = std::min(tc.minibatch.classes_per_batch, k);

  const auto noisy_run = train(ObservedLabels::of(noisy), init_full, tc);
  const auto top_run = train(ObservedLabels::of(top.set), std::move(init_top), tc);

  EvalOptions eval{cfg.eval_ks, cfg.kmeans_restarts, derive(cfg.base_seed, repeat, kEval, p_index)};
  cell.noisy = evaluate(noisy_run.state, noisy.true_labels, k, eval);
  cell.topline = evaluate(top_run.state, top.set.true_labels, k, eval);
  cell.ratio = safe_ratio(cell.noisy.recall_at.at(1), cell.topline.recall_at.at(1));
  cell.nmi_ratio = safe_ratio(cell.noisy.nmi, cell.topline.nmi);

  // Skew of the miner over the whole noisy run; the converged state alone
  // leaves random semi-hard almost nothing to pick.
  if (noisy_run.log.selection.total_negative_selections() > 0) cell.skew = estimate_skew(noisy_run.log.selection);
  cell.p_star = m.loss.family == LossFamily::triplet ? solve_triplet_bound(k, cell.skew.eta).p_star
                                                     : solve_marginal_bound(k, cell.skew.gamma).p_star;
  return cell;
}

SweepReport run_sweep(const SweepConfig& cfg, std::size_t workers) {
  cfg.validate();
  const std::size_t np = cfg.noise_rates.size();
  const std::size_t nm = cfg.methods.size();
  const std::size_t total = static_cast<std::size_t>(cfg.repeats) * np * nm;
  SweepReport report;
  report.cells.resize(total);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      const int repeat = static_cast<int>(idx / (np * nm));
      const std::size_t pi = (idx / nm) % np;
      const std::size_t mi = idx % nm;
      try {
        report.cells[idx] = run_cell(cfg, repeat, pi, mi);
      } catch (const std::exception& e) {
        CellResult& c = report.cells[idx];
        c.method = cfg.methods[mi].name;
        c.p = cfg.noise_rates[pi];
        c.repeat = repeat;
        c.seed = derive(cfg.base_seed, repeat, kData);
        c.failed = true;
        c.error = e.what();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, total);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return report;
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("NOISYEMBED_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

CsvRow to_csv_row(const CellResult& c) {
  return {c.method, c.p, c.seed, recall_or_nan(c.noisy, 1), recall_or_nan(c.noisy, 10), c.noisy.nmi,
          recall_or_nan(c.topline, 1), c.ratio, c.skew.eta, c.p_star};
}

std::string report_csv(const SweepReport& report) {
  std::ostringstream out;
  out << "method,p,seed,rec@1,rec@10,nmi,topline_rec@1,ratio,eta,p_star\n";
  for (const auto& c : report.cells) {
    if (c.failed) continue;
    const CsvRow r = to_csv_row(c);
    out << r.method << ',' << format_double(r.p) << ',' << r.seed << ',' << format_double(r.rec1) << ','
        << format_double(r.rec10) << ',' << format_double(r.nmi) << ',' << format_double(r.topline_rec1) << ','
        << format_double(r.ratio) << ',' << format_double(r.eta) << ',' << format_double(r.p_star) << '\n';
  }
  return out.str();
}

std::vector<CsvRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,p,seed,rec@1,rec@10,nmi,topline_rec@1,ratio,eta,p_star")
    throw std::invalid_argument("report CSV: unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 10) throw std::invalid_argument("report CSV: expected 10 fields in '" + line + "'");
    CsvRow r;
    r.method = f[0];
    r.p = parse_double(f[1]);
    r.seed = std::stoull(f[2]);
    r.rec1 = parse_double(f[3]);
    r.rec10 = parse_double(f[4]);
    r.nmi = parse_double(f[5]);
    r.topline_rec1 = parse_double(f[6]);
    r.ratio = parse_double(f[7]);
    r.eta = parse_double(f[8]);
    r.p_star = parse_double(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  double sum = 0.0;
  for (double v : values)
    if (!std::isnan(v)) {
      sum += v;
      ++out.count;
    }
  if (out.count == 0) return {std::numeric_limits<double>::quiet_NaN(), 0.0, 0};
  out.mean = sum / static_cast<double>(out.count);
  if (out.count < 2) return out;
  double ss = 0.0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(out.count - 1) / static_cast<double>(out.count));
  return out;
}

nlohmann::json summarize(const SweepReport& report) {
  // method -> p -> metric -> values, with first-seen method order preserved.
  std::vector<std::string> method_order;
  std::map<std::string, std::map<double, std::map<std::string, std::vector<double>>>> acc;
  nlohmann::json failed = nlohmann::json::array();
  for (const auto& c : report.cells) {
    if (std::find(method_order.begin(), method_order.end(), c.method) == method_order.end())
      method_order.push_back(c.method);
    if (c.failed) {
      failed.push_back({{"method", c.method}, {"p", c.p}, {"seed", c.seed}, {"error", c.error}});
      continue;
    }
    auto& m = acc[c.method][c.p];
    m["rec@1"].push_back(recall_or_nan(c.noisy, 1));
    m["rec@10"].push_back(recall_or_nan(c.noisy, 10));
    m["nmi"].push_back(c.noisy.nmi);
    m["topline_rec@1"].push_back(recall_or_nan(c.topline, 1));
    m["topline_nmi"].push_back(c.topline.nmi);
    m["ratio"].push_back(c.ratio);
    m["nmi_ratio"].push_back(c.nmi_ratio);
    m["eta"].push_back(c.skew.eta);
    m["gamma"].push_back(c.skew.gamma);
    m["p_star"].push_back(c.p_star);
  }

  nlohmann::json doc;
  doc["methods"] = nlohmann::json::array();
  for (const auto& name : method_order) {
    nlohmann::json mj;
    mj["name"] = name;
    mj["points"] = nlohmann::json::array();
    nlohmann::json breakpoint = nullptr;
    for (const auto& [p, metrics] : acc[name]) {
      nlohmann::json pj;
      pj["p"] = p;
      for (const auto& [metric, values] : metrics) {
        const auto s = mean_se(values);
        pj[metric] = {{"mean", s.mean}, {"se", s.se}, {"n", s.count}};
      }
      const auto ratio = mean_se(metrics.at("ratio"));
      if (breakpoint.is_null() && ratio.count > 0 && ratio.mean < 0.9) breakpoint = p;
      mj["points"].push_back(std::move(pj));
    }
    mj["breakpoint"] = breakpoint;
    doc["methods"].push_back(std::move(mj));
  }
  doc["failed_cells"] = failed;
  return doc;
}

void emit_report(const SweepReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create report directory " + dir);
  {
    std::ofstream csv(fs::path(dir) / "sweep.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + (fs::path(dir) / "sweep.csv").string());
    csv << report_csv(report);
    if (!csv) throw std::runtime_error("write failed for sweep.csv");
  }
  std::ofstream js(fs::path(dir) / "summary.json");
  if (!js) throw std::runtime_error("cannot write " + (fs::path(dir) / "summary.json").string());
  js << summarize(report).dump(2) << '\n';
}

}  // namespace noisyembed
