#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "frvm/error.hpp"
#include "frvm/random.hpp"
#include "frvm/scanner.hpp"
#include "frvm/simulator.hpp"

namespace frvm {

struct MonteCarloResult {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
};

/// Seed of trial i in a batch seeded with `seed`.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) { return derive_seed(seed, trial); }

/// Fraction of independent seeded campaigns that meet the campaign threshold.
/// Trials may be spread over `threads` workers; the result does not depend on it.
inline MonteCarloResult monte_carlo_asp(const ScanCampaign& campaign, const SimulationConfig& config,
                                        std::uint64_t trials, std::uint64_t seed, unsigned threads = 1) {
  if (trials == 0) throw ConfigError("trials must be at least 1");
  campaign.validate();
  config.validate();
  auto base = config;
  base.trace = TraceLevel::None;

  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> successes{0};
  auto worker = [&] {
    std::uint64_t local = 0;
    for (auto i = next.fetch_add(1); i < trials; i = next.fetch_add(1)) {
      if (execute_campaign(campaign, base, trial_seed(seed, i)).success) ++local;
    }
    successes += local;
  };

  threads = std::max(1u, threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MonteCarloResult r;
  r.trials = trials;
  r.successes = successes.load();
  r.estimate = static_cast<double>(r.successes) / static_cast<double>(trials);
  r.standard_error = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(trials));
  return r;
}

}  // namespace frvm
