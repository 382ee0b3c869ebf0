#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisyembed/noise.hpp"

namespace noisyembed {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;   ///< worst observed deviation (or the check's headline value)
  double tolerance = 0.0;  ///< what `measured` was compared against
  std::string detail;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<VerifyCheck> checks;

  [[nodiscard]] bool all_passed() const;
  /// Throws std::out_of_range for an unknown name.
  [[nodiscard]] const VerifyCheck& check(const std::string& name) const;
};

struct VerifyOptions {
  /// Pair flip rates under test. Replace to confirm the oracles catch a
  /// broken closed form.
  std::function<PairNoiseRates(const NoiseSpec&)> pair_rates = pair_noise_rates;
  std::uint64_t monte_carlo_trials = 200000;
  std::size_t identity_samples = 10000;
  std::size_t gradient_configs = 100;
  int ordering_instances = 5;
  int ordering_perturbations = 100;
  double ordering_noise_rate = 0.2;
};

/// Names of the checks run_all produces, in report order.
const std::vector<std::string>& verify_check_names();

/// Runs every check with streams derived from `seed`. Never throws for a
/// failing check; failures are report entries.
VerifyReport run_all(std::uint64_t seed, const VerifyOptions& options = {});

nlohmann::json to_json(const VerifyReport& report);

}  // namespace noisyembed
