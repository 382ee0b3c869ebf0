#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noisyembed/core.hpp"
#include "noisyembed/datagen.hpp"
#include "noisyembed/metrics.hpp"
#include "noisyembed/optimizer.hpp"
#include "noisyembed/sampling.hpp"

namespace noisyembed {

/// A (loss, mining, initialization) combination compared across noise rates.
struct MethodSpec {
  std::string name;
  LossConfig loss{};
  InitMode init = InitMode::random_uniform_sphere;
  double init_lambda = 0.0;
};

struct SweepConfig {
  std::vector<double> noise_rates{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<MethodSpec> methods;
  int repeats = 5;
  std::uint64_t base_seed = 1;
  TrainConfig train{};  ///< seed and snapshot fields are ignored; seeds derive per cell
  SynthSpec data{};
  std::vector<int> eval_ks{1, 10};
  int kmeans_restarts = 10;
  bool stratified_topline = true;

  void validate() const;

  /// Triplet/random, triplet/fixed, marginal/random and marginal/random
  /// from features (lambda = 0.2) on K = 10, 50 per class, d = 16.
  static SweepConfig defaults();
};

nlohmann::json to_json(const SweepConfig& cfg);

/// Missing keys keep their defaults(); unknown keys are rejected.
SweepConfig sweep_config_from_json(const nlohmann::json& doc);

struct CellResult {
  std::string method;
  double p = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;
  EvalReport noisy;
  EvalReport topline;
  double ratio = 0.0;      ///< noisy Rec@1 / topline Rec@1; NaN when topline is 0
  double nmi_ratio = 0.0;  ///< noisy NMI / topline NMI; NaN when topline is 0
  SkewEstimate skew;
  double p_star = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepReport {
  std::vector<CellResult> cells;  ///< config order: repeat, p, method
  [[nodiscard]] bool any_failed() const;
};

/// Runs every (repeat, p, method) cell on up to `workers` threads. Data,
/// noise realization, topline subsample, initialization and training seed
/// are shared by all methods of a (repeat, p) pair, and by the noisy and
/// topline arms of a cell. Failed cells are recorded, not thrown.
SweepReport run_sweep(const SweepConfig& cfg, std::size_t workers = 1);

/// Computes one cell. Exposed for tests.
CellResult run_cell(const SweepConfig& cfg, int repeat, std::size_t p_index, std::size_t method_index);

/// Worker count from NOISYEMBED_WORKERS, else the hardware concurrency.
std::size_t default_worker_count();

/// Raw cells as CSV:
/// method,p,seed,rec@1,rec@10,nmi,topline_rec@1,ratio,eta,p_star
std::string report_csv(const SweepReport& report);

struct CsvRow {
  std::string method;
  double p = 0.0;
  std::uint64_t seed = 0;
  double rec1 = 0.0;
  double rec10 = 0.0;
  double nmi = 0.0;
  double topline_rec1 = 0.0;
  double ratio = 0.0;
  double eta = 0.0;
  double p_star = 0.0;
};

std::vector<CsvRow> parse_report_csv(const std::string& text);
CsvRow to_csv_row(const CellResult& cell);

/// Means and standard errors per (method, p), plus per-method breakpoints
/// (first p whose mean ratio falls below 0.9) and failed cells.
nlohmann::json summarize(const SweepReport& report);

/// Writes <dir>/sweep.csv and <dir>/summary.json. Throws when the directory
/// cannot be created or written.
void emit_report(const SweepReport& report, const std::string& dir);

/// Mean and standard error helper; se is 0 for fewer than two values.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};
MeanSe mean_se(std::span<const double> values);

}  // namespace noisyembed
