#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "frvm/error.hpp"
#include "frvm/host.hpp"
#include "frvm/ip.hpp"
#include "frvm/packet.hpp"

namespace frvm {

enum class NodeRole : std::uint8_t { Switch, Server, Client, Dns };

constexpr std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Switch: return "switch";
    case NodeRole::Server: return "server";
    case NodeRole::Client: return "client";
    case NodeRole::Dns: return "dns";
  }
  return "?";
}

struct Node {
  NodeId id;
  std::string name;
  NodeRole role = NodeRole::Switch;
  IpAddress address;               // rIP for servers; fixed address for clients and DNS
  std::optional<HostRecord> host;  // servers only
};

/// One end of a link as seen from a port.
struct Attachment {
  NodeId peer;
  PortNo peer_port = 0;
  double latency = 1.0;
};

/// Hosts, switches and point-to-point links. Ports are numbered from 1 in
/// the order links are added.
///
/// End nodes come in three roles: servers (FRVM-managed, with services),
/// clients (workstations and scanners with fixed addresses) and DNS servers.
class Topology {
 public:
  NodeId add_switch(std::string name) { return add_node(std::move(name), NodeRole::Switch, {}, {}); }

  NodeId add_server(HostRecord host) {
    if (host.services.empty()) {
      throw ConfigError("host '" + host.host_id + "' must offer at least one service");
    }
    std::sort(host.services.begin(), host.services.end());
    if (std::adjacent_find(host.services.begin(), host.services.end()) != host.services.end()) {
      throw ConfigError("host '" + host.host_id + "' lists a service port twice");
    }
    auto name = host.host_id;
    const auto rip = host.rip;
    return add_node(std::move(name), NodeRole::Server, rip, std::move(host));
  }

  NodeId add_client(std::string name, IpAddress ip) {
    return add_node(std::move(name), NodeRole::Client, ip, {});
  }

  NodeId add_dns(std::string name, IpAddress ip) {
    return add_node(std::move(name), NodeRole::Dns, ip, {});
  }

  void connect(NodeId a, NodeId b, double latency = 1.0) {
    if (a.value >= nodes_.size() || b.value >= nodes_.size()) throw ConfigError("link to unknown node");
    if (a == b) throw ConfigError("self-link on '" + nodes_[a.value].name + "'");
    if (!(latency > 0.0)) throw ConfigError("link latency must be positive");
    const auto port_a = static_cast<PortNo>(ports_[a.value].size() + 1);
    const auto port_b = static_cast<PortNo>(ports_[b.value].size() + 1);
    ports_[a.value].push_back({b, port_b, latency});
    ports_[b.value].push_back({a, port_a, latency});
  }

  void connect(std::string_view a, std::string_view b, double latency = 1.0) {
    connect(require(a), require(b), latency);
  }

  /// Throws ConfigError unless the topology is usable by the simulator.
  void validate() const {
    std::size_t end_hosts = 0;
    std::size_t switches = 0;
    for (const auto& node : nodes_) {
      if (node.role == NodeRole::Switch) {
        ++switches;
        continue;
      }
      ++end_hosts;
      const auto& links = ports_[node.id.value];
      if (links.size() != 1 || nodes_[links.front().peer.value].role != NodeRole::Switch) {
        throw ConfigError("end host '" + node.name + "' must attach to exactly one switch");
      }
    }
    if (switches == 0) throw ConfigError("topology has no switches");
    if (end_hosts < 2) throw ConfigError("topology needs at least two end hosts");

    std::vector<bool> seen(nodes_.size(), false);
    std::deque<NodeId> queue{NodeId{0}};
    seen[0] = true;
    while (!queue.empty()) {
      const auto at = queue.front();
      queue.pop_front();
      for (const auto& link : ports_[at.value]) {
        if (!seen[link.peer.value]) {
          seen[link.peer.value] = true;
          queue.push_back(link.peer);
        }
      }
    }
    for (const auto& node : nodes_) {
      if (!seen[node.id.value]) throw ConfigError("node '" + node.name + "' is disconnected");
    }
  }

  const Node& node(NodeId id) const { return nodes_.at(id.value); }
  std::span<const Node> nodes() const { return nodes_; }

  std::optional<NodeId> find(std::string_view name) const {
    const auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  NodeId require(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw ConfigError("unknown node '" + std::string(name) + "'");
  }

  /// End node owning `ip` (a server's rIP or a client/DNS address).
  std::optional<NodeId> find_by_address(IpAddress ip) const {
    const auto it = by_address_.find(ip);
    if (it == by_address_.end()) return std::nullopt;
    return it->second;
  }

  const HostRecord* host_by_rip(IpAddress ip) const {
    const auto id = find_by_address(ip);
    if (!id) return nullptr;
    const auto& n = nodes_[id->value];
    return n.host ? &*n.host : nullptr;
  }

  const HostRecord* host_by_domain(std::string_view domain) const {
    for (const auto& n : nodes_) {
      if (n.host && n.host->domain_name == domain) return &*n.host;
    }
    return nullptr;
  }

  std::vector<NodeId> switches() const { return with_role(NodeRole::Switch); }
  std::vector<NodeId> servers() const { return with_role(NodeRole::Server); }

  std::optional<Attachment> peer(NodeId id, PortNo port) const {
    const auto& links = ports_.at(id.value);
    if (port == kLocalPort || port > links.size()) return std::nullopt;
    return links[port - 1];
  }

  std::size_t port_count(NodeId id) const { return ports_.at(id.value).size(); }

  NodeId edge_switch_of(NodeId end_node) const { return ports_.at(end_node.value).at(0).peer; }
  PortNo edge_port_of(NodeId end_node) const { return ports_.at(end_node.value).at(0).peer_port; }

  bool is_switch(NodeId id) const { return nodes_.at(id.value).role == NodeRole::Switch; }

 private:
  NodeId add_node(std::string name, NodeRole role, IpAddress address, std::optional<HostRecord> host) {
    if (name.empty()) throw ConfigError("node names must be non-empty");
    if (by_name_.contains(name)) throw ConfigError("duplicate node name '" + name + "'");
    if (role != NodeRole::Switch) {
      if (by_address_.contains(address)) {
        throw ConfigError("address " + address.to_string() + " is assigned twice");
      }
    }
    const NodeId id{static_cast<std::uint32_t>(nodes_.size())};
    if (role != NodeRole::Switch) by_address_.emplace(address, id);
    by_name_.emplace(name, id);
    nodes_.push_back({id, std::move(name), role, address, std::move(host)});
    ports_.emplace_back();
    return id;
  }

  std::vector<NodeId> with_role(NodeRole role) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_) {
      if (n.role == role) out.push_back(n.id);
    }
    return out;
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<Attachment>> ports_;
  std::map<std::string, NodeId, std::less<>> by_name_;
  std::unordered_map<IpAddress, NodeId> by_address_;
};

/// Shortest-path next hops between switches (hop count, ties broken by the
/// lowest port number).
class Routes {
 public:
  explicit Routes(const Topology& topology) : topology_(&topology) {
    const auto& nodes = topology.nodes();
    next_port_.assign(nodes.size(), std::vector<PortNo>(nodes.size(), kLocalPort));
    for (const auto& target : nodes) {
      if (target.role != NodeRole::Switch) continue;
      // Reverse BFS from the target; a switch's next hop is the port it was reached through.
      std::vector<bool> seen(nodes.size(), false);
      std::deque<NodeId> queue{target.id};
      seen[target.id.value] = true;
      while (!queue.empty()) {
        const auto at = queue.front();
        queue.pop_front();
        for (PortNo p = 1; p <= topology.port_count(at); ++p) {
          const auto link = *topology.peer(at, p);
          if (seen[link.peer.value] || !topology.is_switch(link.peer)) continue;
          seen[link.peer.value] = true;
          next_port_[link.peer.value][target.id.value] = link.peer_port;
          queue.push_back(link.peer);
        }
      }
    }
  }

  /// Egress port on `from_switch` toward `destination` (a switch or an end host).
  std::optional<PortNo> egress(NodeId from_switch, NodeId destination) const {
    if (!topology_->is_switch(destination)) {
      const auto edge = topology_->edge_switch_of(destination);
      if (edge == from_switch) return topology_->edge_port_of(destination);
      destination = edge;
    }
    if (from_switch == destination) return std::nullopt;
    const auto port = next_port_[from_switch.value][destination.value];
    if (port == kLocalPort) return std::nullopt;
    return port;
  }

 private:
  const Topology* topology_;
  std::vector<std::vector<PortNo>> next_port_;
};

}  // namespace frvm
