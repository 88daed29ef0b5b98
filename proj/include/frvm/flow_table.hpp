#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frvm/error.hpp"
#include "frvm/ip.hpp"
#include "frvm/packet.hpp"

namespace frvm {

/// Exact-match triple. A missing source address or port is a wildcard.
struct FlowMatch {
  std::optional<IpAddress> src_ip;
  IpAddress dst_ip;
  std::optional<Port> dst_port;

  bool matches(const Packet& packet) const {
    return packet.dst.ip == dst_ip && (!src_ip || *src_ip == packet.src.ip) &&
           (!dst_port || *dst_port == packet.dst.port);
  }

  /// True when some concrete (src, dst, port) triple satisfies both matches.
  bool overlaps(const FlowMatch& other) const {
    return dst_ip == other.dst_ip && (!src_ip || !other.src_ip || *src_ip == *other.src_ip) &&
           (!dst_port || !other.dst_port || *dst_port == *other.dst_port);
  }

  friend bool operator==(const FlowMatch&, const FlowMatch&) = default;
};

/// Address rewrite. An empty port keeps the packet's port.
struct AddressRewrite {
  IpAddress ip;
  std::optional<Port> port;

  Endpoint apply(const Endpoint& e) const { return {ip, port.value_or(e.port)}; }
  friend bool operator==(const AddressRewrite&, const AddressRewrite&) = default;
};

struct FlowAction {
  PortNo forward_port = 0;
  std::optional<AddressRewrite> rewrite_dst;
  std::optional<AddressRewrite> rewrite_src;
  friend bool operator==(const FlowAction&, const FlowAction&) = default;
};

/// Baseline entries come from a multiplexing event; connection entries are
/// installed reactively on packet-in.
enum class FlowOrigin : std::uint8_t { Baseline, Connection };

struct FlowEntry {
  FlowMatch match;
  FlowAction action;
  std::uint64_t epoch_installed = 0;
  FlowOrigin origin = FlowOrigin::Baseline;
  friend bool operator==(const FlowEntry&, const FlowEntry&) = default;
};

/// Rewrites and the hop record. Fields without a rewrite are untouched.
inline Packet apply(const FlowEntry& entry, Packet packet, NodeId at) {
  if (entry.action.rewrite_dst) packet.dst = entry.action.rewrite_dst->apply(packet.dst);
  if (entry.action.rewrite_src) packet.src = entry.action.rewrite_src->apply(packet.src);
  packet.hop_log.append({at, HopAction::Matched});
  return packet;
}

class FlowTable {
 public:
  FlowTable(NodeId switch_id, std::string name) : switch_id_(switch_id), name_(std::move(name)) {}

  NodeId switch_id() const { return switch_id_; }
  const std::string& name() const { return name_; }
  const std::vector<FlowEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// The unique matching entry, or nullptr on a miss.
  const FlowEntry* match(const Packet& packet) const {
    for (const auto& entry : entries_) {
      if (entry.match.matches(packet)) return &entry;
    }
    return nullptr;
  }

  const FlowEntry* find_overlap(const FlowMatch& match) const {
    for (const auto& entry : entries_) {
      if (entry.match.overlaps(match)) return &entry;
    }
    return nullptr;
  }

  void install(FlowEntry entry) {
    if (const auto* clash = find_overlap(entry.match)) {
      throw InstallError("entry " + describe_match(entry.match) + " on " + name_ +
                         " overlaps existing entry " + describe_match(clash->match));
    }
    entries_.push_back(std::move(entry));
  }

  /// Removes every entry installed before `older_than`. Returns the count removed.
  std::size_t evict_epoch(std::uint64_t older_than) {
    return std::erase_if(entries_,
                         [&](const FlowEntry& e) { return e.epoch_installed < older_than; });
  }

  std::size_t count_epoch(std::uint64_t epoch) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [&](const FlowEntry& e) { return e.epoch_installed == epoch; }));
  }

  std::size_t count_older_than(std::uint64_t epoch) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [&](const FlowEntry& e) { return e.epoch_installed < epoch; }));
  }

  /// Line-oriented dump with the columns Src_IP, Dst_IP, Dst_Port, Action, Epoch.
  std::string dump() const {
    std::ostringstream out;
    out << "# switch " << name_ << " entries " << entries_.size() << '\n';
    out << "Src_IP\tDst_IP\tDst_Port\tAction\tEpoch\n";
    for (const auto& e : entries_) {
      out << (e.match.src_ip ? e.match.src_ip->to_string() : "*") << '\t'
          << e.match.dst_ip.to_string() << '\t'
          << (e.match.dst_port ? std::to_string(*e.match.dst_port) : "*") << '\t'
          << describe_action(e.action) << '\t' << e.epoch_installed << '\n';
    }
    return out.str();
  }

  static std::string describe_match(const FlowMatch& m) {
    return (m.src_ip ? m.src_ip->to_string() : "*") + "->" + m.dst_ip.to_string() + ":" +
           (m.dst_port ? std::to_string(*m.dst_port) : "*");
  }

  static std::string describe_action(const FlowAction& a) {
    std::string out = "forward:" + std::to_string(a.forward_port);
    auto rewrite = [](const AddressRewrite& r) {
      return r.ip.to_string() + ":" + (r.port ? std::to_string(*r.port) : "*");
    };
    if (a.rewrite_dst) out += " set_dst:" + rewrite(*a.rewrite_dst);
    if (a.rewrite_src) out += " set_src:" + rewrite(*a.rewrite_src);
    return out;
  }

 private:
  NodeId switch_id_;
  std::string name_;
  std::vector<FlowEntry> entries_;
};

/// The flow tables of every switch in the network.
class Fabric {
 public:
  void add_switch(NodeId id, std::string name) {
    tables_.try_emplace(id, id, std::move(name));
  }

  FlowTable& table(NodeId id) {
    const auto it = tables_.find(id);
    if (it == tables_.end()) throw LookupMiss("no flow table for node " + std::to_string(id.value));
    return it->second;
  }

  const FlowTable& table(NodeId id) const {
    const auto it = tables_.find(id);
    if (it == tables_.end()) throw LookupMiss("no flow table for node " + std::to_string(id.value));
    return it->second;
  }

  const std::map<NodeId, FlowTable>& tables() const { return tables_; }

  std::size_t evict_epoch(std::uint64_t older_than) {
    std::size_t removed = 0;
    for (auto& [id, t] : tables_) removed += t.evict_epoch(older_than);
    return removed;
  }

  std::size_t stale_entries(std::uint64_t current_epoch) const {
    std::size_t stale = 0;
    for (const auto& [id, t] : tables_) stale += t.count_older_than(current_epoch);
    return stale;
  }

  std::size_t total_entries() const {
    std::size_t total = 0;
    for (const auto& [id, t] : tables_) total += t.size();
    return total;
  }

 private:
  std::map<NodeId, FlowTable> tables_;
};

}  // namespace frvm
