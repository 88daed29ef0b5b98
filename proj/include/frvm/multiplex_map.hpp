#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "frvm/address_pool.hpp"
#include "frvm/error.hpp"
#include "frvm/ip.hpp"
#include "frvm/random.hpp"

namespace frvm {

/// The virtual address space, leased per service port.
///
/// Uniqueness is on (vIP, port): two services on different ports may hold the
/// same vIP, but two services on one port never do. Each port therefore owns
/// its own lease book over the same set of CIDR blocks.
class VirtualSpace {
 public:
  explicit VirtualSpace(AddressPool pool) : prototype_(std::move(pool)) {
    prototype_.release_all();
  }

  const AddressPool& prototype() const { return prototype_; }
  std::uint64_t capacity() const { return prototype_.capacity(); }
  bool contains(IpAddress ip) const { return prototype_.contains(ip); }

  AddressPool& pool_for(Port port) { return by_port_.try_emplace(port, prototype_).first->second; }

  const AddressPool* find_pool(Port port) const {
    const auto it = by_port_.find(port);
    return it == by_port_.end() ? nullptr : &it->second;
  }

  std::uint64_t allocated_count() const {
    std::uint64_t total = 0;
    for (const auto& [port, pool] : by_port_) total += pool.allocated_count();
    return total;
  }

 private:
  AddressPool prototype_;
  std::map<Port, AddressPool> by_port_;
};

enum class Direction { ToVirtual, ToReal };

constexpr Direction opposite(Direction d) {
  return d == Direction::ToVirtual ? Direction::ToReal : Direction::ToVirtual;
}

/// Bidirectional association between real services and their current vIPs.
class MultiplexMap {
 public:
  using Forward = std::map<RealEndpoint, VirtualEndpoint>;
  using Reverse = std::map<VirtualEndpoint, RealEndpoint>;

  /// Registers a service and leases it a fresh vIP.
  VirtualEndpoint bind(const RealEndpoint& real, VirtualSpace& space, RandomSource& rng) {
    if (forward_.contains(real)) {
      throw ConfigError("service " + real.to_string() + " is already mapped");
    }
    const VirtualEndpoint virt{space.pool_for(real.port).draw(rng), real.port};
    forward_.emplace(real, virt);
    reverse_.emplace(virt, real);
    return virt;
  }

  /// Registers a service with a chosen vIP (fixtures, replayed traces).
  void bind(const RealEndpoint& real, const VirtualEndpoint& virt, VirtualSpace& space) {
    if (real.port != virt.port) {
      throw ConfigError("translation must preserve the port: " + real.to_string() + " vs " +
                        virt.to_string());
    }
    if (forward_.contains(real)) {
      throw ConfigError("service " + real.to_string() + " is already mapped");
    }
    space.pool_for(virt.port).allocate(virt.vip);
    forward_.emplace(real, virt);
    reverse_.emplace(virt, real);
  }

  void unbind(const RealEndpoint& real, VirtualSpace& space) {
    const auto it = forward_.find(real);
    if (it == forward_.end()) throw LookupMiss("service " + real.to_string() + " is not mapped");
    space.pool_for(it->second.port).release(it->second.vip);
    reverse_.erase(it->second);
    forward_.erase(it);
  }

  std::optional<VirtualEndpoint> find_virtual(const RealEndpoint& real) const {
    const auto it = forward_.find(real);
    if (it == forward_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<RealEndpoint> find_real(const VirtualEndpoint& virt) const {
    const auto it = reverse_.find(virt);
    if (it == reverse_.end()) return std::nullopt;
    return it->second;
  }

  VirtualEndpoint to_virtual(const RealEndpoint& real) const {
    if (auto v = find_virtual(real)) return *v;
    throw LookupMiss("no virtual endpoint for " + real.to_string());
  }

  RealEndpoint to_real(const VirtualEndpoint& virt) const {
    if (auto r = find_real(virt)) return *r;
    throw LookupMiss("no real endpoint behind " + virt.to_string());
  }

  /// Every service currently reachable through `vip`, on any port.
  std::vector<RealEndpoint> services_at(IpAddress vip) const {
    std::vector<RealEndpoint> out;
    for (auto it = reverse_.lower_bound(VirtualEndpoint{vip, 0});
         it != reverse_.end() && it->first.vip == vip; ++it) {
      out.push_back(it->second);
    }
    return out;
  }

  const Forward& forward() const { return forward_; }
  const Reverse& reverse() const { return reverse_; }
  std::uint64_t epoch() const { return epoch_; }
  std::size_t size() const { return forward_.size(); }
  bool empty() const { return forward_.empty(); }

  /// Forward and reverse are exact inverses.
  bool consistent() const {
    if (forward_.size() != reverse_.size()) return false;
    for (const auto& [real, virt] : forward_) {
      const auto it = reverse_.find(virt);
      if (it == reverse_.end() || it->second != real || real.port != virt.port) return false;
    }
    return true;
  }

  friend void remap_all(MultiplexMap& map, VirtualSpace& space, RandomSource& rng);

 private:
  Forward forward_;
  Reverse reverse_;
  std::uint64_t epoch_ = 0;
};

/// Gives every mapped service a freshly drawn vIP.
///
/// All current leases are released before any new draw, so a service can
/// land on its previous vIP again. Draw order follows the forward map's
/// ordering, which keeps remaps reproducible for a given random stream.
inline void remap_all(MultiplexMap& map, VirtualSpace& space, RandomSource& rng) {
  std::map<Port, std::uint64_t> demand;
  for (const auto& [real, virt] : map.forward_) ++demand[real.port];
  for (const auto& [port, count] : demand) {
    if (count > space.capacity()) {
      throw AllocationError("port " + std::to_string(port) + " has " + std::to_string(count) +
                            " services but the virtual pool holds " +
                            std::to_string(space.capacity()) + " addresses");
    }
  }

  for (const auto& [real, virt] : map.forward_) space.pool_for(virt.port).release(virt.vip);

  MultiplexMap::Reverse reverse;
  for (auto& [real, virt] : map.forward_) {
    virt.vip = space.pool_for(real.port).draw(rng);
    reverse.emplace(virt, real);
  }
  map.reverse_ = std::move(reverse);
  ++map.epoch_;
}

/// Maps an endpoint across the real/virtual boundary. Ports are preserved.
inline Endpoint translate(const MultiplexMap& map, const Endpoint& endpoint, Direction direction) {
  if (direction == Direction::ToVirtual) {
    return map.to_virtual(RealEndpoint{endpoint.ip, endpoint.port}).endpoint();
  }
  return map.to_real(VirtualEndpoint{endpoint.ip, endpoint.port}).endpoint();
}

}  // namespace frvm
