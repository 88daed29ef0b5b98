#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "frvm/ip.hpp"
#include "frvm/multiplex_map.hpp"
#include "frvm/packet.hpp"

namespace frvm {

enum class TraceLevel : std::uint8_t { None, Full };

enum class TraceType : std::uint8_t {
  Assign,
  Multiplex,
  Send,
  Probe,
  Hop,
  PacketIn,
  Decision,
  Install,
  Deliver,
  Drop,
  Capture,
  Assert,
};

constexpr std::string_view to_string(TraceType type) {
  switch (type) {
    case TraceType::Assign: return "assign";
    case TraceType::Multiplex: return "multiplex";
    case TraceType::Send: return "send";
    case TraceType::Probe: return "probe";
    case TraceType::Hop: return "hop";
    case TraceType::PacketIn: return "packet_in";
    case TraceType::Decision: return "decision";
    case TraceType::Install: return "install";
    case TraceType::Deliver: return "deliver";
    case TraceType::Drop: return "drop";
    case TraceType::Capture: return "capture";
    case TraceType::Assert: return "assert";
  }
  return "?";
}

struct TraceRecord {
  double time = 0.0;
  std::uint64_t seq = 0;
  TraceType type = TraceType::Hop;
  std::string node;
  std::string peer;
  std::optional<std::uint64_t> packet;
  std::optional<PacketKind> kind;
  bool response = false;
  std::optional<Endpoint> src;
  std::optional<Endpoint> dst;
  std::optional<IpAddress> dns_answer;
  std::string tag;
  std::uint64_t epoch = 0;
  std::string detail;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["t"] = time;
    j["seq"] = seq;
    j["type"] = to_string(type);
    j["epoch"] = epoch;
    if (!node.empty()) j["node"] = node;
    if (!peer.empty()) j["peer"] = peer;
    if (packet) j["pkt"] = *packet;
    if (kind) j["kind"] = to_string(*kind);
    if (response) j["response"] = true;
    if (src) j["src"] = src->to_string();
    if (dst) j["dst"] = dst->to_string();
    if (dns_answer) j["answer"] = dns_answer->to_string();
    if (!tag.empty()) j["tag"] = tag;
    if (!detail.empty()) j["detail"] = detail;
    return j;
  }
};

struct AssertResult {
  double time = 0.0;
  std::string name;
  bool ok = true;
  std::string message;
};

struct ProbeReply {
  std::uint64_t index = 0;
  VirtualEndpoint target;
  std::string responder;
  double time = 0.0;
};

struct SimulationCounters {
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t packet_ins = 0;
  std::uint64_t multiplex_events = 0;
  std::uint64_t core_rip_exposures = 0;
};

struct SimulationTrace {
  std::vector<TraceRecord> records;
  SimulationCounters counters;
  std::vector<AssertResult> assertions;
  std::vector<ProbeReply> probe_replies;
  std::uint64_t in_flight = 0;

  std::size_t count(TraceType type) const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.type == type ? 1 : 0;
    return n;
  }

  const AssertResult* first_failure() const {
    for (const auto& a : assertions) {
      if (!a.ok) return &a;
    }
    return nullptr;
  }

  /// One JSON object per line, LF terminated.
  std::string to_ndjson() const {
    std::string out;
    for (const auto& r : records) {
      out += r.to_json().dump();
      out += '\n';
    }
    return out;
  }
};

}  // namespace frvm
