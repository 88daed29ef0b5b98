#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "frvm/address_pool.hpp"
#include "frvm/error.hpp"
#include "frvm/flow_table.hpp"
#include "frvm/host.hpp"
#include "frvm/multiplex_map.hpp"
#include "frvm/packet.hpp"
#include "frvm/random.hpp"
#include "frvm/topology.hpp"

namespace frvm {

struct ControllerConfig {
  /// Keep reactive connection flows (and the vIPs they address) alive across
  /// multiplexing events. Off by default: a remap invalidates every old vIP.
  bool pin_connections = false;
};

struct InstallAction {
  NodeId switch_id;
  FlowEntry entry;
};

struct PacketOutAction {
  NodeId switch_id;
  PortNo port = 0;
  Packet packet;
};

struct DropAction {
  NodeId switch_id;
  std::string reason;
};

using ControllerAction = std::variant<InstallAction, PacketOutAction, DropAction>;

enum class DecisionType : std::uint8_t {
  DnsRewrite,
  SourceVirtualized,
  Authorized,
  Unauthorized,
  Devirtualized,
  StaleAddress,
  Unroutable,
  InstallSkipped,
};

constexpr std::string_view to_string(DecisionType type) {
  switch (type) {
    case DecisionType::DnsRewrite: return "dns_rewrite";
    case DecisionType::SourceVirtualized: return "source_virtualized";
    case DecisionType::Authorized: return "authorized";
    case DecisionType::Unauthorized: return "unauthorized";
    case DecisionType::Devirtualized: return "devirtualized";
    case DecisionType::StaleAddress: return "stale_address";
    case DecisionType::Unroutable: return "unroutable";
    case DecisionType::InstallSkipped: return "install_skipped";
  }
  return "?";
}

/// One controller decision, for the trace stream.
struct Decision {
  DecisionType type;
  std::string host;
  std::optional<Endpoint> from;
  std::optional<Endpoint> to;
};

struct PacketInResult {
  std::vector<ControllerAction> actions;
  std::vector<Decision> decisions;
};

struct MultiplexReport {
  std::uint64_t epoch = 0;
  std::size_t services = 0;
  std::size_t evicted = 0;
  std::size_t installed = 0;
};

/// The FRVM controller.
///
/// Owns the multiplex map and the virtual address space. Baseline flows (one
/// per service, on the host's edge switch) translate vIP:port to rIP:port;
/// everything else reaches the controller as a packet-in and is handled
/// per switch:
///
///  * a DNS A-record response naming a host's rIP is rewritten to the vIP of
///    the queried service;
///  * a destination rIP is replaced by the service vIP if the sender is
///    authorized, otherwise the packet is dropped;
///  * at the sender's edge switch the source rIP becomes the sender's vIP;
///  * at the destination's edge switch the destination vIP becomes the rIP.
///
/// Data packets and authorized rIP-addressed packets also get a connection
/// flow on the switch that raised the packet-in, so the rest of the flow
/// bypasses the controller. DNS and probe traffic is handled by packet-out only.
class Controller {
 public:
  Controller(const Topology& topology, AddressPool virtual_pool, AuthzPolicy policy,
             ControllerConfig config, RandomSource rng)
      : topology_(&topology),
        routes_(topology),
        space_(std::move(virtual_pool)),
        policy_(std::move(policy)),
        config_(config),
        rng_(rng) {
    for (const auto& node : topology.nodes()) {
      if (node.role != NodeRole::Switch && space_.contains(node.address)) {
        throw ConfigError("address " + node.address.to_string() + " of '" + node.name +
                          "' lies inside the virtual pool");
      }
    }
  }

  /// Epoch-0 assignment: one vIP per service and the baseline flows.
  MultiplexReport initialize(Fabric& fabric) {
    for (const auto& node : topology_->nodes()) {
      if (!node.host) continue;
      for (auto port : node.host->services) map_.bind({node.host->rip, port}, space_, rng_);
    }
    rebuild_default_sources();
    return {map_.epoch(), map_.size(), 0, install_baseline(fabric)};
  }

  /// Remaps every service, evicts all older flows and installs new baselines.
  MultiplexReport multiplex_event(Fabric& fabric) {
    std::vector<std::pair<NodeId, FlowEntry>> pinned_entries;
    if (config_.pin_connections) {
      for (const auto& [id, table] : fabric.tables()) {
        for (const auto& entry : table.entries()) {
          if (entry.origin != FlowOrigin::Connection) continue;
          pinned_entries.emplace_back(id, entry);
          const VirtualEndpoint target{entry.match.dst_ip, entry.match.dst_port.value_or(0)};
          if (auto host = resolve_virtual(target, PacketKind::Data)) {
            pinned_.insert_or_assign(target, *host);
          }
        }
      }
    }

    remap_all(map_, space_, rng_);
    rebuild_default_sources();
    MultiplexReport report{map_.epoch(), map_.size(), fabric.evict_epoch(map_.epoch()), 0};
    report.installed = install_baseline(fabric);

    for (auto& [id, entry] : pinned_entries) {
      auto& table = fabric.table(id);
      if (table.find_overlap(entry.match)) continue;
      entry.epoch_installed = map_.epoch();
      table.install(entry);
      ++report.installed;
    }
    return report;
  }

  PacketInResult on_packet_in(const Packet& packet, NodeId at, const Fabric& fabric) const {
    PacketInResult out;
    Packet p = packet;
    const auto epoch = map_.epoch();
    auto drop = [&](std::string reason) {
      out.actions.push_back(DropAction{at, std::move(reason)});
      return out;
    };

    // Type-A DNS response: never let a real address reach the client.
    if (p.kind == PacketKind::DnsResponse && p.dns && p.dns->answer) {
      if (const auto* host = topology_->host_by_rip(*p.dns->answer)) {
        const auto virt = map_.find_virtual({host->rip, p.dns->service_port});
        if (!virt) return drop("dns answer names a port with no service");
        out.decisions.push_back({DecisionType::DnsRewrite, host->host_id,
                                 Endpoint{host->rip, p.dns->service_port}, virt->endpoint()});
        p.dns->answer = virt->vip;
      }
    }

    // Destination.
    bool authorized_rip = false;
    std::optional<NodeId> destination;
    IpAddress new_dst = p.dst.ip;
    if (const auto* host = topology_->host_by_rip(p.dst.ip)) {
      const auto sender = topology_->find_by_address(p.src.ip);
      if (!sender || !policy_.permits(topology_->node(*sender).name, host->host_id)) {
        out.decisions.push_back({DecisionType::Unauthorized, host->host_id, p.src, p.dst});
        return drop("unauthorized real-address access");
      }
      auto virt = map_.find_virtual({host->rip, p.dst.port});
      if (!virt && p.kind == PacketKind::IcmpProbe) virt = default_vip(*host);
      if (!virt) return drop("no service on destination port");
      out.decisions.push_back({DecisionType::Authorized, host->host_id, p.dst,
                               Endpoint{virt->vip, p.dst.port}});
      authorized_rip = true;
      new_dst = virt->vip;
      destination = topology_->require(host->host_id);
    } else if (space_.contains(p.dst.ip)) {
      const auto real = resolve_virtual({p.dst.ip, p.dst.port}, p.kind);
      if (!real) {
        out.decisions.push_back({DecisionType::StaleAddress, "", p.src, p.dst});
        return drop("stale or unassigned virtual address");
      }
      destination = topology_->find_by_address(real->rip);
    } else if (auto node = topology_->find_by_address(p.dst.ip)) {
      destination = node;
    }
    if (!destination) {
      out.decisions.push_back({DecisionType::Unroutable, "", p.src, p.dst});
      return drop("unroutable destination");
    }

    const auto& dest_node = topology_->node(*destination);
    const bool at_dest_edge = topology_->edge_switch_of(*destination) == at;
    if (at_dest_edge && dest_node.host) {
      if (new_dst != dest_node.address) {
        out.decisions.push_back({DecisionType::Devirtualized, dest_node.name,
                                 Endpoint{new_dst, p.dst.port}, Endpoint{dest_node.address, p.dst.port}});
      }
      new_dst = dest_node.address;
    }

    // Source.
    std::optional<IpAddress> new_src;
    if (const auto* host = topology_->host_by_rip(p.src.ip)) {
      if (topology_->edge_switch_of(topology_->require(host->host_id)) != at) {
        return drop("real source address inside the fabric");
      }
      const auto virt = source_vip(*host, p.src.port);
      if (!virt) return drop("source host has no virtual address");
      out.decisions.push_back({DecisionType::SourceVirtualized, host->host_id, p.src,
                               Endpoint{virt->vip, p.src.port}});
      new_src = virt->vip;
    }

    const auto egress = routes_.egress(at, *destination);
    if (!egress) return drop("no route to destination");

    FlowAction action{*egress, std::nullopt, std::nullopt};
    if (new_dst != p.dst.ip) action.rewrite_dst = AddressRewrite{new_dst, std::nullopt};
    if (new_src) action.rewrite_src = AddressRewrite{*new_src, std::nullopt};

    if (p.kind == PacketKind::Data || authorized_rip) {
      FlowEntry entry{{p.src.ip, p.dst.ip, p.dst.port}, action, epoch, FlowOrigin::Connection};
      if (fabric.table(at).find_overlap(entry.match)) {
        out.decisions.push_back({DecisionType::InstallSkipped, dest_node.name, p.src, p.dst});
      } else {
        out.actions.push_back(InstallAction{at, std::move(entry)});
      }
    }

    if (action.rewrite_dst) p.dst = action.rewrite_dst->apply(p.dst);
    if (action.rewrite_src) p.src = action.rewrite_src->apply(p.src);
    p.hop_log.append({at, HopAction::PacketOut});
    out.actions.push_back(PacketOutAction{at, *egress, std::move(p)});
    return out;
  }

  /// Domain name to the current vIP of the given service.
  VirtualEndpoint resolve(std::string_view domain, Port port) const {
    const auto* host = topology_->host_by_domain(domain);
    if (!host) throw ResolutionError("unknown domain '" + std::string(domain) + "'");
    const auto virt = map_.find_virtual({host->rip, port});
    if (!virt) {
      throw ResolutionError("'" + std::string(domain) + "' has no service on port " +
                            std::to_string(port));
    }
    return *virt;
  }

  /// Domain name to the vIP of the host's lowest-numbered service.
  VirtualEndpoint resolve(std::string_view domain) const {
    const auto* host = topology_->host_by_domain(domain);
    if (!host) throw ResolutionError("unknown domain '" + std::string(domain) + "'");
    return resolve(domain, host->services.front());
  }

  const MultiplexMap& map() const { return map_; }
  const VirtualSpace& space() const { return space_; }
  const Topology& topology() const { return *topology_; }
  std::uint64_t epoch() const { return map_.epoch(); }

  /// The vIP a host uses as source address when the source port is not one
  /// of its services: the vIP of its lowest-numbered service.
  std::optional<VirtualEndpoint> default_vip(const HostRecord& host) const {
    return map_.find_virtual({host.rip, host.services.front()});
  }

 private:
  std::optional<VirtualEndpoint> source_vip(const HostRecord& host, Port port) const {
    if (auto v = map_.find_virtual({host.rip, port})) return v;
    return default_vip(host);
  }

  /// Real endpoint behind a virtual destination, or nothing when the address is stale.
  std::optional<RealEndpoint> resolve_virtual(const VirtualEndpoint& target, PacketKind kind) const {
    if (auto real = map_.find_real(target)) return real;
    // Reply to a host that sent from its default vIP on a non-service port.
    if (const auto it = default_sources_.find(target.vip);
        it != default_sources_.end() && it->second.size() == 1) {
      return RealEndpoint{it->second.front(), target.port};
    }
    if (kind == PacketKind::IcmpProbe) {
      const auto services = map_.services_at(target.vip);
      if (!services.empty()) return services.front();
    }
    if (const auto it = pinned_.find(target); it != pinned_.end()) return it->second;
    return std::nullopt;
  }

  std::size_t install_baseline(Fabric& fabric) {
    std::size_t installed = 0;
    for (const auto& [real, virt] : map_.forward()) {
      const auto node = *topology_->find_by_address(real.rip);
      const auto edge = topology_->edge_switch_of(node);
      fabric.table(edge).install(FlowEntry{
          {std::nullopt, virt.vip, virt.port},
          {topology_->edge_port_of(node), AddressRewrite{real.rip, std::nullopt}, std::nullopt},
          map_.epoch(),
          FlowOrigin::Baseline});
      ++installed;
    }
    return installed;
  }

  void rebuild_default_sources() {
    default_sources_.clear();
    for (const auto& node : topology_->nodes()) {
      if (!node.host) continue;
      if (auto v = default_vip(*node.host)) default_sources_[v->vip].push_back(node.host->rip);
    }
  }

  const Topology* topology_;
  Routes routes_;
  VirtualSpace space_;
  MultiplexMap map_;
  AuthzPolicy policy_;
  ControllerConfig config_;
  RandomSource rng_;
  std::map<IpAddress, std::vector<IpAddress>> default_sources_;
  std::map<VirtualEndpoint, RealEndpoint> pinned_;
};

}  // namespace frvm
