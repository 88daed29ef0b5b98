#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frvm/ip.hpp"

namespace frvm {

/// Index of a node (switch or end host) in a Topology.
struct NodeId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

/// Switch or host port number. Port 0 is reserved for locally originated packets.
using PortNo = std::uint32_t;
inline constexpr PortNo kLocalPort = 0;

enum class PacketKind : std::uint8_t { DnsQuery, DnsResponse, IcmpProbe, SynProbe, Data };

constexpr std::string_view to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::DnsQuery: return "DnsQuery";
    case PacketKind::DnsResponse: return "DnsResponse";
    case PacketKind::IcmpProbe: return "IcmpProbe";
    case PacketKind::SynProbe: return "SynProbe";
    case PacketKind::Data: return "Data";
  }
  return "?";
}

inline std::optional<PacketKind> parse_packet_kind(std::string_view text) {
  for (auto kind : {PacketKind::DnsQuery, PacketKind::DnsResponse, PacketKind::IcmpProbe,
                    PacketKind::SynProbe, PacketKind::Data}) {
    if (text == to_string(kind)) return kind;
  }
  return std::nullopt;
}

constexpr bool is_probe(PacketKind kind) {
  return kind == PacketKind::IcmpProbe || kind == PacketKind::SynProbe;
}

enum class HopAction : std::uint8_t { Matched, PacketIn, PacketOut, Dropped };

constexpr std::string_view to_string(HopAction action) {
  switch (action) {
    case HopAction::Matched: return "matched";
    case HopAction::PacketIn: return "packet_in";
    case HopAction::PacketOut: return "packet_out";
    case HopAction::Dropped: return "dropped";
  }
  return "?";
}

struct HopRecord {
  NodeId node;
  HopAction action = HopAction::Matched;
  friend constexpr auto operator<=>(const HopRecord&, const HopRecord&) = default;
};

/// Append-only record of the switches a packet passed through.
class HopLog {
 public:
  void append(HopRecord record) { entries_.push_back(record); }
  std::span<const HopRecord> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<HopRecord> entries_;
};

/// DNS question (and, in a response, the A-record answer).
struct DnsPayload {
  std::string name;
  Port service_port = 0;
  std::optional<IpAddress> answer;
};

struct Packet {
  std::uint64_t id = 0;
  Endpoint src;
  Endpoint dst;
  PacketKind kind = PacketKind::Data;
  bool response = false;
  std::string payload_tag;
  std::optional<DnsPayload> dns;
  // Trace metadata; not visible to switches.
  std::optional<std::uint64_t> probe_index;
  std::optional<NodeId> responder;
  HopLog hop_log;
};

}  // namespace frvm
