#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noisyembed/harness.hpp"

using namespace noisyembed;

namespace {

SweepConfig tiny_config() {
  SweepConfig cfg = SweepConfig::defaults();
  cfg.methods.resize(2);
  cfg.noise_rates = {0.0, 0.3};
  cfg.repeats = 2;
  cfg.data.num_classes = 4;
  cfg.data.per_class = 10;
  cfg.data.dim = 8;
  cfg.train.steps = 30;
  cfg.kmeans_restarts = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config json round trip and rejection") {
  const auto cfg = SweepConfig::defaults();
  CHECK(cfg.methods.size() == 4);
  const auto back = sweep_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));

  auto doc = to_json(cfg);
  doc["colour"] = 1;
  CHECK_THROWS(sweep_config_from_json(doc));

  const auto partial = sweep_config_from_json(nlohmann::json{{"noise_rates", {0.2}}});
  CHECK(partial.noise_rates == std::vector<double>{0.2});
  CHECK(partial.repeats == cfg.repeats);

  CHECK_THROWS(sweep_config_from_json(nlohmann::json{{"noise_rates", {1.0}}}));
  CHECK_THROWS(sweep_config_from_json(nlohmann::json{{"repeats", 0}}));
  CHECK_THROWS(sweep_config_from_json(nlohmann::json{{"eval_ks", {5}}}));
  CHECK_THROWS(sweep_config_from_json(nlohmann::json{{"methods", nlohmann::json::array()}}));
}

TEST_CASE("sweep cells are complete, ordered and paired") {
  const auto cfg = tiny_config();
  const auto report = run_sweep(cfg, 2);
  REQUIRE(report.cells.size() == 8);
  CHECK_FALSE(report.any_failed());
  std::set<std::uint64_t> seeds;
  std::size_t k = 0;
  for (int rep = 0; rep < 2; ++rep)
    for (double p : cfg.noise_rates)
      for (const auto& m : cfg.methods) {
        const auto& c = report.cells[k++];
        CHECK(c.method == m.name);
        CHECK(c.p == p);
        CHECK(c.repeat == rep);
        seeds.insert(c.seed);
      }
  // The reported seed identifies the repeat.
  CHECK(seeds.size() == 2);

  // At p = 0 the noisy and topline arms are the same run.
  for (const auto& c : report.cells)
    if (c.p == 0.0) {
      CHECK(c.ratio == doctest::Approx(1.0));
      CHECK(c.noisy.recall_at == c.topline.recall_at);
    }
  const auto one = run_cell(cfg, 1, 1, 0);
  CHECK(one.noisy.recall_at == report.cells[6].noisy.recall_at);
}

TEST_CASE("csv round trip") {
  const auto report = run_sweep(tiny_config(), 1);
  const auto text = report_csv(report);
  CHECK(text.rfind("method,p,seed,rec@1,rec@10,nmi,topline_rec@1,ratio,eta,p_star\n", 0) == 0);
  const auto rows = parse_report_csv(text);
  REQUIRE(rows.size() == report.cells.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto want = to_csv_row(report.cells[i]);
    CHECK(rows[i].method == want.method);
    CHECK(rows[i].seed == want.seed);
    CHECK(rows[i].rec1 == want.rec1);
    CHECK(rows[i].nmi == want.nmi);
    CHECK(rows[i].eta == want.eta);
  }
  CHECK(report_csv(SweepReport{}) == "method,p,seed,rec@1,rec@10,nmi,topline_rec@1,ratio,eta,p_star\n");
}

TEST_CASE("summary and emitted files") {
  const auto report = run_sweep(tiny_config(), 1);
  const auto s = summarize(report);
  CHECK(s.contains("failed_cells"));
  const auto dir = std::filesystem::temp_directory_path() / "noisyembed_harness_test";
  std::filesystem::remove_all(dir);
  emit_report(report, dir.string());
  CHECK(std::filesystem::exists(dir / "sweep.csv"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  std::ifstream in(dir / "sweep.csv");
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == report_csv(report));
  std::filesystem::remove_all(dir);
  CHECK_THROWS(emit_report(report, "/proc/noisyembed/cannot"));
}

TEST_CASE("mean and standard error") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto m = mean_se(v);
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  const std::vector<double> single{7.0};
  CHECK(mean_se(single).se == 0.0);
}
