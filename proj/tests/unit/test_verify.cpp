#include <doctest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "noisyembed/verify.hpp"

using namespace noisyembed;

namespace {

VerifyOptions quick() {
  VerifyOptions o;
  o.monte_carlo_trials = 50000;
  o.identity_samples = 1000;
  o.gradient_configs = 20;
  o.ordering_instances = 2;
  o.ordering_perturbations = 20;
  return o;
}

}  // namespace

TEST_CASE("all checks pass and appear once each") {
  const auto r = run_all(1);
  CHECK(r.all_passed());
  std::set<std::string> names;
  for (const auto& c : r.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
    names.insert(c.name);
  }
  CHECK(names.size() == verify_check_names().size());
  CHECK(r.checks.size() == verify_check_names().size());
  CHECK_THROWS_AS((void)r.check("nope"), std::out_of_range);
}

TEST_CASE("a broken positive flip rate is caught") {
  auto o = quick();
  o.pair_rates = [](const NoiseSpec& s) {
    auto r = pair_noise_rates(s);
    const double k = s.num_classes;
    r.q_pos = 2 * s.p * (1 - s.p) + s.p * s.p * (1 - 2 / (k - 1));
    return r;
  };
  const auto r = run_all(1, o);
  CHECK_FALSE(r.check("noise_monte_carlo").passed);
  CHECK_FALSE(r.check("noise_enumeration").passed);
  CHECK_FALSE(r.all_passed());
}

TEST_CASE("report is deterministic and serializes") {
  const auto a = to_json(run_all(5, quick()));
  const auto b = to_json(run_all(5, quick()));
  CHECK(a == b);
  CHECK(a.contains("checks"));
}
