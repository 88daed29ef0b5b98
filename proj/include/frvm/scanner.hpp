#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "frvm/address_pool.hpp"
#include "frvm/error.hpp"
#include "frvm/random.hpp"
#include "frvm/simulator.hpp"

namespace frvm {

enum class ScanStrategy : std::uint8_t { SequentialNoRepeat, UniformRandom };
enum class ScanGoal : std::uint8_t { HostDiscovery, ServiceDiscovery };

constexpr std::string_view to_string(ScanStrategy s) {
  return s == ScanStrategy::SequentialNoRepeat ? "sequential_no_repeat" : "uniform_random";
}
constexpr std::string_view to_string(ScanGoal g) {
  return g == ScanGoal::HostDiscovery ? "host_discovery" : "service_discovery";
}

inline ScanStrategy parse_scan_strategy(std::string_view s) {
  if (s == "sequential_no_repeat") return ScanStrategy::SequentialNoRepeat;
  if (s == "uniform_random") return ScanStrategy::UniformRandom;
  throw ConfigError("unknown scan strategy '" + std::string(s) + "'");
}
inline ScanGoal parse_scan_goal(std::string_view s) {
  if (s == "host_discovery") return ScanGoal::HostDiscovery;
  if (s == "service_discovery") return ScanGoal::ServiceDiscovery;
  throw ConfigError("unknown scan goal '" + std::string(s) + "'");
}

/// An attacker's probing plan.
///
/// Host discovery sends one ICMP probe per address (port 0). Service
/// discovery sends a SYN probe per (address, port) slot over `ports`.
struct ScanCampaign {
  ScanStrategy strategy = ScanStrategy::SequentialNoRepeat;
  std::uint64_t k = 1;
  double eta = 1.0;
  AddressPool target_pool{std::vector<Cidr>{Cidr::parse("10.0.0.0/24")}};
  std::vector<Port> ports;
  ScanGoal goal = ScanGoal::HostDiscovery;
  std::uint64_t threshold = 1;  // hosts that must be found for the campaign to count as a success
  std::string scanner = "scanner";

  std::uint64_t slots() const {
    return target_pool.capacity() * (goal == ScanGoal::ServiceDiscovery ? ports.size() : 1);
  }

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("scan rate eta must be positive and finite");
    if (goal == ScanGoal::ServiceDiscovery && ports.empty()) {
      throw ConfigError("service discovery needs at least one port");
    }
    if (strategy == ScanStrategy::SequentialNoRepeat && k > slots()) {
      throw ConfigError("no-repeat scan of " + std::to_string(k) + " probes exceeds the " +
                        std::to_string(slots()) + " available targets");
    }
  }
};

/// Probe list for a campaign; probe i is emitted at i / eta.
inline std::vector<Probe> generate_probes(const ScanCampaign& campaign, RandomSource& rng) {
  campaign.validate();
  const auto slots = campaign.slots();
  const bool services = campaign.goal == ScanGoal::ServiceDiscovery;
  const auto width = services ? campaign.ports.size() : 1;
  std::vector<Probe> probes;
  probes.reserve(campaign.k);

  auto make = [&](std::uint64_t i, std::uint64_t slot) {
    Probe p;
    p.index = i;
    p.time = static_cast<double>(i) / campaign.eta;
    p.target.vip = campaign.target_pool.at(slot / width);
    p.target.port = services ? campaign.ports[slot % width] : Port{0};
    p.kind = services ? PacketKind::SynProbe : PacketKind::IcmpProbe;
    probes.push_back(p);
  };

  if (campaign.strategy == ScanStrategy::UniformRandom) {
    for (std::uint64_t i = 0; i < campaign.k; ++i) make(i, rng.below(slots));
    return probes;
  }

  // Partial Fisher-Yates; a sparse swap table keeps large pools cheap.
  constexpr std::uint64_t kDenseLimit = 1u << 16;
  if (slots <= kDenseLimit) {
    std::vector<std::uint64_t> order(slots);
    for (std::uint64_t i = 0; i < slots; ++i) order[i] = i;
    for (std::uint64_t i = 0; i < campaign.k; ++i) {
      const auto j = i + rng.below(slots - i);
      std::swap(order[i], order[j]);
      make(i, order[i]);
    }
  } else {
    std::unordered_map<std::uint64_t, std::uint64_t> swapped;
    auto at = [&](std::uint64_t i) {
      const auto it = swapped.find(i);
      return it == swapped.end() ? i : it->second;
    };
    for (std::uint64_t i = 0; i < campaign.k; ++i) {
      const auto j = i + rng.below(slots - i);
      const auto vj = at(j);
      swapped[j] = at(i);
      make(i, vj);
    }
  }
  return probes;
}

struct ScanHit {
  std::uint64_t index = 0;
  VirtualEndpoint target;
  std::string host;
};

struct ScanOutcome {
  std::uint64_t probes_sent = 0;
  std::vector<ScanHit> hits;
  std::set<std::string> discovered_hosts;
  std::set<std::pair<std::string, Port>> discovered_services;
  std::optional<std::uint64_t> first_hit_index;
  bool success = false;
};

/// Seed stream used for probe generation inside execute_campaign.
inline constexpr std::uint64_t kProbeStream = 2;

/// Queues a campaign's probes on a simulator and returns them in index order.
/// The scanner must be a client node of the topology.
inline std::vector<Probe> schedule_campaign(Simulator& sim, const ScanCampaign& campaign, std::uint64_t seed) {
  campaign.validate();
  const auto scanner = sim.topology().require(campaign.scanner);
  if (sim.topology().node(scanner).role != NodeRole::Client) {
    throw ConfigError("scanner '" + campaign.scanner + "' must be a client node");
  }
  RandomSource probe_rng(derive_seed(seed, kProbeStream));
  auto probes = generate_probes(campaign, probe_rng);
  for (const auto& p : probes) sim.probe(p, scanner);
  return probes;
}

/// Scores the answered probes of a finished run.
inline ScanOutcome score_campaign(const ScanCampaign& campaign, const std::vector<Probe>& probes,
                                  const SimulationTrace& trace) {
  ScanOutcome out;
  out.probes_sent = probes.size();
  for (const auto& reply : trace.probe_replies) {
    if (reply.index >= probes.size()) continue;
    const auto& probe = probes[reply.index];
    out.hits.push_back({reply.index, probe.target, reply.responder});
    out.discovered_hosts.insert(reply.responder);
    if (probe.kind == PacketKind::SynProbe) out.discovered_services.emplace(reply.responder, probe.target.port);
    if (!out.first_hit_index || reply.index < *out.first_hit_index) out.first_hit_index = reply.index;
  }
  out.success = out.discovered_hosts.size() >= campaign.threshold;
  return out;
}

/// Runs a campaign alone against a simulated network.
///
/// The defender remaps on the config's schedule; a probe emitted at the same
/// instant as a remap sees the new map.
inline ScanOutcome execute_campaign(const ScanCampaign& campaign, SimulationConfig config, std::uint64_t seed) {
  Simulator sim(std::move(config), seed);
  const auto probes = schedule_campaign(sim, campaign, seed);
  return score_campaign(campaign, probes, sim.run());
}

}  // namespace frvm
