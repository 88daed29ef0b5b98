// Builds a two-switch network by hand, lets a client resolve a server by
// name, then shows what a scanner sees before and after a remap.

#include <iostream>

#include "frvm/asp.hpp"
#include "frvm/simulator.hpp"

using namespace frvm;

int main() {
  SimulationConfig cfg;
  auto& topo = cfg.topology;
  topo.add_switch("s1");
  topo.add_switch("s2");
  topo.add_server({"web", IpAddress::parse("203.0.113.10"), {80, 443}, "web.example"});
  topo.add_client("alice", IpAddress::parse("198.51.100.20"));
  topo.add_dns("dns", IpAddress::parse("198.51.100.53"));
  topo.connect("alice", "s1");
  topo.connect("s1", "s2");
  topo.connect("web", "s2");
  topo.connect("dns", "s1");
  cfg.virtual_pool = AddressPool::parse({"10.9.0.0/16"});
  cfg.schedule = MultiplexSchedule::every(30);

  Simulator sim(std::move(cfg), 1);
  const auto before = sim.controller().resolve("web.example", 80);
  std::cout << "web:80 is at " << before.to_string() << " in epoch " << sim.controller().epoch() << "\n";

  SendRequest lookup;
  lookup.from = "alice";
  lookup.kind = PacketKind::DnsQuery;
  lookup.to = NodeTarget{"dns", 53};
  lookup.tag = "lookup";
  lookup.dns = DnsPayload{"web.example", 80, std::nullopt};
  sim.send(1, lookup);

  SendRequest probe;
  probe.from = "alice";
  probe.kind = PacketKind::SynProbe;
  probe.to = before.endpoint();
  probe.tag = "old-address";
  sim.send(40, probe);

  const auto trace = sim.run();
  for (const auto* tag : {"lookup.reply", "lookup.data", "lookup.data.reply", "old-address"}) {
    const auto* fate = sim.fate(tag);
    std::cout << tag << ": " << (fate && fate->delivered ? "delivered" : "dropped");
    if (fate && fate->dns_answer) std::cout << " (answer " << fate->dns_answer->to_string() << ")";
    if (fate && fate->dropped) std::cout << " (" << fate->reason << ")";
    std::cout << "\n";
  }
  std::cout << "remaps: " << trace.counters.multiplex_events
            << ", real addresses seen between switches: " << trace.counters.core_rip_exposures << "\n";

  std::cout << "\nsingle target, N = 65536, scanning everything once:\n"
            << "  static " << asp_static_at_least_one(65536, 1, 65536) << "\n"
            << "  remapped every probe " << asp_frvm_at_least_one(65536, 65536) << "\n";
}
