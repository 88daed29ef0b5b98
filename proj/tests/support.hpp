#pragma once

#include <string>
#include <vector>

#include "frvm/simulator.hpp"

namespace frvm::testing {

inline IpAddress ip(const char* text) { return IpAddress::parse(text); }

/// scanner - s1 - s2 - servers; `hosts` servers with the given services.
inline SimulationConfig line_network(std::size_t hosts, std::vector<Port> services,
                                     std::vector<std::string> pool = {"10.0.0.0/24"}, double latency = 1.0) {
  SimulationConfig cfg;
  auto& t = cfg.topology;
  t.add_switch("s1");
  t.add_switch("s2");
  t.connect("s1", "s2", latency);
  t.add_client("scanner", ip("198.51.100.66"));
  t.connect("scanner", "s1", latency);
  for (std::size_t i = 0; i < hosts; ++i) {
    const auto name = "h" + std::to_string(i + 1);
    t.add_server({name, IpAddress::from_octets(203, 0, 113, static_cast<std::uint8_t>(i + 1)), services,
                  name + ".example"});
    t.connect(name, "s2", latency);
  }
  cfg.virtual_pool = AddressPool::parse(pool);
  return cfg;
}

/// A pool of exactly `size` addresses (size < 2^16), carved from 10.50.0.0/16.
inline AddressPool pool_of_size(std::uint32_t size) {
  std::vector<Cidr> blocks;
  std::uint32_t base = IpAddress::parse("10.50.0.0").value();
  for (int bit = 15; bit >= 0; --bit) {
    const std::uint32_t block = 1u << bit;
    if (size & block) {
      blocks.push_back(Cidr{IpAddress(base), 32 - bit});
      base += block;
    }
  }
  return AddressPool(std::move(blocks));
}

}  // namespace frvm::testing
