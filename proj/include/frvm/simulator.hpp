#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "frvm/address_pool.hpp"
#include "frvm/controller.hpp"
#include "frvm/error.hpp"
#include "frvm/flow_table.hpp"
#include "frvm/host.hpp"
#include "frvm/packet.hpp"
#include "frvm/random.hpp"
#include "frvm/topology.hpp"
#include "frvm/trace.hpp"

namespace frvm {

inline constexpr Port kDnsPort = 53;
inline constexpr Port kFirstEphemeralPort = 49152;

struct SimulationConfig {
  Topology topology;
  AddressPool virtual_pool{std::vector<Cidr>{Cidr::parse("10.0.0.0/24")}};
  std::optional<AddressPool> real_pool;
  MultiplexSchedule schedule = MultiplexSchedule::never();
  AuthzPolicy authz;
  ControllerConfig controller;
  std::optional<double> end_time;
  TraceLevel trace = TraceLevel::Full;
  /// Hosts open a Data connection to the address in every DNS answer they get.
  bool follow_dns_answers = true;

  void validate() const {
    topology.validate();
    for (const auto& node : topology.nodes()) {
      if (node.role != NodeRole::Switch && virtual_pool.contains(node.address)) {
        throw ConfigError("address of '" + node.name + "' lies inside the virtual pool");
      }
    }
    if (real_pool) {
      if (real_pool->overlaps(virtual_pool)) {
        throw ConfigError("real and virtual address pools overlap");
      }
      for (const auto& node : topology.nodes()) {
        if (node.role == NodeRole::Server && !real_pool->contains(node.address)) {
          throw ConfigError("rIP of '" + node.name + "' lies outside the real pool");
        }
      }
    }
    if (end_time && !(*end_time >= 0.0)) throw ConfigError("end_time must be non-negative");
  }
};

/// Probe scheduled by a scan campaign.
struct Probe {
  std::uint64_t index = 0;
  double time = 0.0;
  VirtualEndpoint target;
  PacketKind kind = PacketKind::IcmpProbe;
};

/// Where a workload packet goes: a node's own address, a literal endpoint, or
/// an endpoint captured earlier in the run under a variable name.
struct NodeTarget {
  std::string name;
  Port port = 0;
};
struct VariableTarget {
  std::string name;
  std::optional<Port> port;
};
using SendTarget = std::variant<NodeTarget, Endpoint, VariableTarget>;

struct SendRequest {
  std::string from;
  PacketKind kind = PacketKind::Data;
  SendTarget to = Endpoint{};
  std::optional<Port> src_port;
  std::string tag;
  std::optional<DnsPayload> dns;
};

class Simulator;

/// Named check run at a scheduled time. Returns an error message on failure.
struct ScenarioCheck {
  std::string name;
  std::function<std::optional<std::string>(Simulator&)> check;
  bool is_capture = false;
};

struct PacketArrival {
  Packet packet;
  NodeId node;
  PortNo in_port = kLocalPort;
};
struct MultiplexTick {};
struct ScanProbe {
  Probe probe;
  NodeId scanner;
};
struct HostSend {
  SendRequest request;
};
struct ScenarioAssert {
  ScenarioCheck check;
};

using EventBody = std::variant<PacketArrival, MultiplexTick, ScanProbe, HostSend, ScenarioAssert>;

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventBody body;

  bool is_tick() const { return std::holds_alternative<MultiplexTick>(body); }
};

/// Execution order: time, then multiplexing ticks before anything else at the
/// same instant, then insertion order.
struct EventLater {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.is_tick() != b.is_tick()) return b.is_tick();
    return a.seq > b.seq;
  }
};

/// What happened to the last packet carrying a given payload tag.
struct PacketFate {
  std::uint64_t packet = 0;
  bool delivered = false;
  bool dropped = false;
  std::string node;
  std::string reason;
  std::size_t packet_ins = 0;
  std::optional<IpAddress> dns_answer;
  Endpoint dst;
};

/// Deterministic discrete-event simulation of an FRVM network.
///
/// Construction performs the epoch-0 assignment at t = 0 and, unless the
/// schedule is static, schedules the first multiplexing event at t = T.
/// A run ends at `end_time` when one is set, otherwise as soon as only
/// multiplexing ticks remain queued.
class Simulator {
 public:
  Simulator(SimulationConfig config, std::uint64_t seed)
      : config_(std::make_unique<SimulationConfig>(std::move(config))) {
    config_->validate();
    controller_ = std::make_unique<Controller>(config_->topology, config_->virtual_pool,
                                               config_->authz, config_->controller,
                                               RandomSource(derive_seed(seed, 1)));
    for (auto id : config_->topology.switches()) {
      fabric_.add_switch(id, config_->topology.node(id).name);
    }
    const auto report = controller_->initialize(fabric_);
    if (tracing()) {
      TraceRecord r = record(TraceType::Assign);
      r.detail = "services=" + std::to_string(report.services) +
                 " installed=" + std::to_string(report.installed);
      trace_.records.push_back(std::move(r));
    }
    if (!config_->schedule.is_static()) {
      push(config_->schedule.interval(), MultiplexTick{});
    }
  }

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  void send(double at, SendRequest request) { push(at, HostSend{std::move(request)}); }

  void probe(const Probe& probe, NodeId scanner) { push(probe.time, ScanProbe{probe, scanner}); }

  void check(double at, ScenarioCheck check) { push(at, ScenarioAssert{std::move(check)}); }

  /// Injects a packet that `from` transmits at time `at`.
  void inject(double at, Packet packet, NodeId from) {
    packet.id = next_packet_id_++;
    ++trace_.counters.injected;
    push(at, PacketArrival{std::move(packet), from, kLocalPort});
  }

  /// Runs until the stop condition. May be called again after scheduling more work.
  SimulationTrace run() {
    while (!queue_.empty()) {
      const auto& top = queue_.front();
      if (config_->end_time && top.time > *config_->end_time) break;
      if (!config_->end_time && pending_ == 0) break;
      std::pop_heap(queue_.begin(), queue_.end(), EventLater{});
      Event event = std::move(queue_.back());
      queue_.pop_back();
      if (!event.is_tick()) --pending_;
      now_ = event.time;
      current_seq_ = event.seq;
      dispatch(std::move(event));
    }
    auto result = trace_;
    result.in_flight = 0;
    for (const auto& e : queue_) {
      if (std::holds_alternative<PacketArrival>(e.body)) ++result.in_flight;
    }
    return result;
  }

  /// Handles one packet arriving at a node and returns the events it causes.
  /// Controller and flow-table updates happen immediately.
  std::vector<Event> deliver(Packet packet, NodeId at, PortNo in_port) {
    std::vector<Event> out;
    const auto& node = topology().node(at);
    if (node.role == NodeRole::Switch) {
      switch_receive(std::move(packet), at, out);
    } else if (in_port == kLocalPort) {
      transmit(std::move(packet), at, 1, out);
    } else {
      host_receive(std::move(packet), at, out);
    }
    return out;
  }

  double now() const { return now_; }
  const Topology& topology() const { return config_->topology; }
  const SimulationConfig& config() const { return *config_; }
  const Controller& controller() const { return *controller_; }
  const Fabric& fabric() const { return fabric_; }
  const SimulationCounters& counters() const { return trace_.counters; }
  const std::vector<TraceRecord>& records() const { return trace_.records; }

  const PacketFate* fate(const std::string& tag) const {
    const auto it = fates_.find(tag);
    return it == fates_.end() ? nullptr : &it->second;
  }

  std::optional<Endpoint> variable(const std::string& name) const {
    const auto it = variables_.find(name);
    if (it == variables_.end()) return std::nullopt;
    return it->second;
  }

  void set_variable(const std::string& name, Endpoint value) { variables_[name] = value; }

 private:
  bool tracing() const { return config_->trace == TraceLevel::Full; }

  TraceRecord record(TraceType type) const {
    TraceRecord r;
    r.time = now_;
    r.seq = current_seq_;
    r.type = type;
    r.epoch = controller_->epoch();
    return r;
  }

  TraceRecord packet_record(TraceType type, const Packet& p, NodeId node) const {
    TraceRecord r = record(type);
    r.node = topology().node(node).name;
    r.packet = p.id;
    r.kind = p.kind;
    r.response = p.response;
    r.src = p.src;
    r.dst = p.dst;
    if (p.dns) r.dns_answer = p.dns->answer;
    r.tag = p.payload_tag;
    return r;
  }

  template <typename Body>
  void push(double at, Body body) {
    Event e{at, next_seq_++, EventBody{std::move(body)}};
    if (!e.is_tick()) ++pending_;
    queue_.push_back(std::move(e));
    std::push_heap(queue_.begin(), queue_.end(), EventLater{});
  }

  void enqueue(std::vector<Event>& events) {
    for (auto& e : events) {
      e.seq = next_seq_++;
      if (!e.is_tick()) ++pending_;
      queue_.push_back(std::move(e));
      std::push_heap(queue_.begin(), queue_.end(), EventLater{});
    }
  }

  void dispatch(Event event) {
    std::visit(
        [&](auto& body) {
          using T = std::decay_t<decltype(body)>;
          if constexpr (std::is_same_v<T, PacketArrival>) {
            auto next = deliver(std::move(body.packet), body.node, body.in_port);
            enqueue(next);
          } else if constexpr (std::is_same_v<T, MultiplexTick>) {
            multiplex_tick();
          } else if constexpr (std::is_same_v<T, ScanProbe>) {
            emit_probe(body.probe, body.scanner);
          } else if constexpr (std::is_same_v<T, HostSend>) {
            host_send(body.request);
          } else {
            run_check(body.check);
          }
        },
        event.body);
  }

  void multiplex_tick() {
    const auto report = controller_->multiplex_event(fabric_);
    ++trace_.counters.multiplex_events;
    if (tracing()) {
      TraceRecord r = record(TraceType::Multiplex);
      r.detail = "services=" + std::to_string(report.services) + " evicted=" +
                 std::to_string(report.evicted) + " installed=" + std::to_string(report.installed);
      trace_.records.push_back(std::move(r));
    }
    push(now_ + config_->schedule.interval(), MultiplexTick{});
  }

  Port ephemeral_port(NodeId node) {
    auto& next = ephemeral_[node.value];
    if (next < kFirstEphemeralPort) next = kFirstEphemeralPort;
    const Port port = next;
    next = next == 65535 ? kFirstEphemeralPort : static_cast<Port>(next + 1);
    return port;
  }

  void emit_probe(const Probe& probe, NodeId scanner) {
    Packet p;
    p.id = next_packet_id_++;
    p.kind = probe.kind;
    p.src = {topology().node(scanner).address, ephemeral_port(scanner)};
    p.dst = probe.target.endpoint();
    p.probe_index = probe.index;
    probe_targets_[probe.index] = probe.target;
    ++trace_.counters.injected;
    if (tracing()) trace_.records.push_back(packet_record(TraceType::Probe, p, scanner));
    std::vector<Event> out;
    transmit(std::move(p), scanner, 1, out);
    enqueue(out);
  }

  void host_send(const SendRequest& request) {
    const auto from = topology().require(request.from);
    const auto& node = topology().node(from);
    if (node.role == NodeRole::Switch) throw ConfigError("switch '" + request.from + "' cannot send");
    Packet p;
    p.id = next_packet_id_++;
    p.kind = request.kind;
    p.src = {node.address, request.src_port ? *request.src_port : ephemeral_port(from)};
    p.dst = resolve_target(request.to);
    p.payload_tag = request.tag;
    p.dns = request.dns;
    ++trace_.counters.injected;
    if (tracing()) trace_.records.push_back(packet_record(TraceType::Send, p, from));
    std::vector<Event> out;
    transmit(std::move(p), from, 1, out);
    enqueue(out);
  }

  Endpoint resolve_target(const SendTarget& target) const {
    if (const auto* literal = std::get_if<Endpoint>(&target)) return *literal;
    if (const auto* node = std::get_if<NodeTarget>(&target)) {
      return {topology().node(topology().require(node->name)).address, node->port};
    }
    const auto& var = std::get<VariableTarget>(target);
    const auto value = variable(var.name);
    if (!value) throw ConfigError("variable '" + var.name + "' used before capture");
    return {value->ip, var.port.value_or(value->port)};
  }

  void run_check(ScenarioCheck& check) {
    const auto failure = check.check(*this);
    if (check.is_capture) {
      if (tracing()) {
        TraceRecord r = record(TraceType::Capture);
        r.detail = check.name;
        if (auto v = variable(check.name)) r.dst = *v;
        trace_.records.push_back(std::move(r));
      }
      return;
    }
    trace_.assertions.push_back({now_, check.name, !failure, failure.value_or("")});
    if (tracing()) {
      TraceRecord r = record(TraceType::Assert);
      r.detail = check.name + (failure ? " FAIL: " + *failure : " ok");
      trace_.records.push_back(std::move(r));
    }
  }

  void switch_receive(Packet packet, NodeId at, std::vector<Event>& out) {
    if (const auto* entry = fabric_.table(at).match(packet)) {
      const auto port = entry->action.forward_port;
      transmit(apply(*entry, std::move(packet), at), at, port, out);
      return;
    }
    packet.hop_log.append({at, HopAction::PacketIn});
    ++trace_.counters.packet_ins;
    if (tracing()) trace_.records.push_back(packet_record(TraceType::PacketIn, packet, at));

    auto result = controller_->on_packet_in(packet, at, fabric_);
    if (tracing()) {
      for (const auto& d : result.decisions) {
        TraceRecord r = record(TraceType::Decision);
        r.node = topology().node(at).name;
        r.packet = packet.id;
        r.detail = std::string(to_string(d.type)) + (d.host.empty() ? "" : " host=" + d.host);
        r.src = d.from;
        r.dst = d.to;
        trace_.records.push_back(std::move(r));
      }
    }
    for (auto& action : result.actions) {
      if (auto* install = std::get_if<InstallAction>(&action)) {
        if (tracing()) {
          TraceRecord r = record(TraceType::Install);
          r.node = topology().node(install->switch_id).name;
          r.packet = packet.id;
          r.detail = FlowTable::describe_match(install->entry.match) + " " +
                     FlowTable::describe_action(install->entry.action);
          trace_.records.push_back(std::move(r));
        }
        fabric_.table(install->switch_id).install(std::move(install->entry));
      } else if (auto* packet_out = std::get_if<PacketOutAction>(&action)) {
        transmit(std::move(packet_out->packet), packet_out->switch_id, packet_out->port, out);
      } else {
        const auto& drop = std::get<DropAction>(action);
        packet.hop_log.append({at, HopAction::Dropped});
        finish(packet, at, false, drop.reason);
      }
    }
  }

  void transmit(Packet packet, NodeId from, PortNo port, std::vector<Event>& out) {
    const auto link = topology().peer(from, port);
    if (!link) {
      finish(packet, from, false, "no link on egress port");
      return;
    }
    if (topology().is_switch(from) && topology().is_switch(link->peer) && carries_rip(packet)) {
      ++trace_.counters.core_rip_exposures;
    }
    if (tracing()) {
      TraceRecord r = packet_record(TraceType::Hop, packet, from);
      r.peer = topology().node(link->peer).name;
      trace_.records.push_back(std::move(r));
    }
    out.push_back(Event{now_ + link->latency, 0, PacketArrival{std::move(packet), link->peer, link->peer_port}});
  }

  bool carries_rip(const Packet& p) const {
    auto is_rip = [&](IpAddress ip) { return topology().host_by_rip(ip) != nullptr; };
    return is_rip(p.src.ip) || is_rip(p.dst.ip) || (p.dns && p.dns->answer && is_rip(*p.dns->answer));
  }

  void finish(const Packet& p, NodeId at, bool delivered, const std::string& reason) {
    if (delivered) {
      ++trace_.counters.delivered;
    } else {
      ++trace_.counters.dropped;
    }
    if (tracing()) {
      TraceRecord r = packet_record(delivered ? TraceType::Deliver : TraceType::Drop, p, at);
      r.detail = reason;
      trace_.records.push_back(std::move(r));
    }
    if (!p.payload_tag.empty()) {
      PacketFate fate;
      fate.packet = p.id;
      fate.delivered = delivered;
      fate.dropped = !delivered;
      fate.node = topology().node(at).name;
      fate.reason = reason;
      fate.dst = p.dst;
      for (const auto& hop : p.hop_log.entries()) {
        fate.packet_ins += hop.action == HopAction::PacketIn ? 1 : 0;
      }
      if (p.dns) fate.dns_answer = p.dns->answer;
      fates_[p.payload_tag] = std::move(fate);
    }
  }

  void host_receive(Packet packet, NodeId at, std::vector<Event>& out) {
    const auto& node = topology().node(at);
    if (packet.dst.ip != node.address) {
      finish(packet, at, false, "misaddressed");
      return;
    }
    const bool listening = node.host && std::binary_search(node.host->services.begin(),
                                                            node.host->services.end(), packet.dst.port);
    if (packet.response) {
      finish(packet, at, true, "");
      if (packet.probe_index) {
        trace_.probe_replies.push_back({*packet.probe_index, probe_target(*packet.probe_index),
                                        packet.responder ? topology().node(*packet.responder).name : "",
                                        now_});
      }
      if (packet.kind == PacketKind::DnsResponse) follow_answer(packet, at, out);
      return;
    }

    switch (packet.kind) {
      case PacketKind::IcmpProbe:
        finish(packet, at, true, "");
        reply(packet, at, out);
        return;
      case PacketKind::SynProbe:
      case PacketKind::Data:
        if (!listening) {
          finish(packet, at, false, "port closed");
          return;
        }
        finish(packet, at, true, "");
        reply(packet, at, out);
        return;
      case PacketKind::DnsQuery: {
        if (node.role != NodeRole::Dns || !packet.dns) {
          finish(packet, at, false, "not a resolver");
          return;
        }
        finish(packet, at, true, "");
        Packet answer = make_reply(packet, at);
        if (const auto* host = topology().host_by_domain(packet.dns->name)) {
          answer.dns->answer = host->rip;
        }
        transmit_reply(std::move(answer), at, out);
        return;
      }
      case PacketKind::DnsResponse:
        // Unsolicited responses are not produced by the model; treat as delivered.
        finish(packet, at, true, "");
        follow_answer(packet, at, out);
        return;
    }
  }

  Packet make_reply(const Packet& request, NodeId at) {
    Packet r;
    r.id = next_packet_id_++;
    r.kind = request.kind == PacketKind::DnsQuery ? PacketKind::DnsResponse : request.kind;
    r.response = true;
    r.src = {topology().node(at).address, request.dst.port};
    r.dst = request.src;
    r.dns = request.dns;
    r.probe_index = request.probe_index;
    r.responder = at;
    if (!request.payload_tag.empty()) r.payload_tag = request.payload_tag + ".reply";
    ++trace_.counters.injected;
    return r;
  }

  void reply(const Packet& request, NodeId at, std::vector<Event>& out) {
    transmit_reply(make_reply(request, at), at, out);
  }

  void transmit_reply(Packet reply, NodeId at, std::vector<Event>& out) {
    if (tracing()) trace_.records.push_back(packet_record(TraceType::Send, reply, at));
    transmit(std::move(reply), at, 1, out);
  }

  void follow_answer(const Packet& response, NodeId at, std::vector<Event>& out) {
    if (!config_->follow_dns_answers || !response.dns || !response.dns->answer) return;
    Packet p;
    p.id = next_packet_id_++;
    p.kind = PacketKind::Data;
    p.src = {topology().node(at).address, ephemeral_port(at)};
    p.dst = {*response.dns->answer, response.dns->service_port};
    if (!response.payload_tag.empty()) {
      auto base = response.payload_tag;
      constexpr std::string_view suffix = ".reply";
      if (base.ends_with(suffix)) base.resize(base.size() - suffix.size());
      p.payload_tag = base + ".data";
    }
    ++trace_.counters.injected;
    if (tracing()) trace_.records.push_back(packet_record(TraceType::Send, p, at));
    transmit(std::move(p), at, 1, out);
  }

  VirtualEndpoint probe_target(std::uint64_t index) const {
    const auto it = probe_targets_.find(index);
    return it == probe_targets_.end() ? VirtualEndpoint{} : it->second;
  }

  std::unique_ptr<SimulationConfig> config_;
  std::unique_ptr<Controller> controller_;
  Fabric fabric_;
  std::vector<Event> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t current_seq_ = 0;
  std::uint64_t next_packet_id_ = 1;
  std::uint64_t pending_ = 0;
  double now_ = 0.0;
  SimulationTrace trace_;
  std::map<std::string, PacketFate> fates_;
  std::map<std::string, Endpoint> variables_;
  std::map<std::uint32_t, Port> ephemeral_;
  std::map<std::uint64_t, VirtualEndpoint> probe_targets_;
};

/// Builds, runs and returns the trace of one simulation.
inline SimulationTrace run(SimulationConfig config, const std::vector<std::pair<double, SendRequest>>& workload,
                           std::uint64_t seed) {
  Simulator sim(std::move(config), seed);
  for (const auto& [at, request] : workload) sim.send(at, request);
  return sim.run();
}

}  // namespace frvm
