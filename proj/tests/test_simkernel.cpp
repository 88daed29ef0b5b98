#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "frvm/scenario.hpp"
#include "frvm/simulator.hpp"
#include "support.hpp"

using namespace frvm;
using frvm::testing::ip;
using frvm::testing::line_network;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scenario preset(const std::string& name) {
  return parse_scenario_text(read_file(std::string(FRVM_SOURCE_DIR) + "/presets/" + name + ".json"));
}

std::string traced(const Scenario& s) {
  const auto run = run_scenario(s, s.seed);
  return header_line(s.source, s.seed) + run.trace.to_ndjson();
}

SendRequest request(const char* from, PacketKind kind, SendTarget to, const char* tag) {
  SendRequest r;
  r.from = from;
  r.kind = kind;
  r.to = std::move(to);
  r.tag = tag;
  return r;
}

}  // namespace

TEST(Simulator, EmptyWorkloadThreeTicks) {
  auto cfg = line_network(1, {80});
  cfg.schedule = MultiplexSchedule::every(10);
  cfg.end_time = 30;
  Simulator sim(std::move(cfg), 1);
  const auto trace = sim.run();
  EXPECT_EQ(trace.count(TraceType::Multiplex), 3u);
  EXPECT_EQ(trace.counters.multiplex_events, 3u);
  EXPECT_EQ(sim.controller().epoch(), 3u);
}

TEST(Simulator, StaticScheduleNeverRemaps) {
  auto cfg = line_network(2, {80});
  cfg.end_time = 1000;
  Simulator sim(std::move(cfg), 1);
  EXPECT_EQ(sim.run().counters.multiplex_events, 0u);
}

TEST(Simulator, MalformedTopologiesAreRejected) {
  {
    SimulationConfig cfg;
    cfg.topology.add_switch("s1");
    cfg.topology.add_server({"h1", ip("203.0.113.1"), {80}, ""});
    cfg.topology.connect("h1", "s1");
    EXPECT_THROW(Simulator(std::move(cfg), 1), ConfigError);  // one end host
  }
  {
    auto cfg = line_network(1, {80});
    cfg.topology.add_server({"h9", ip("203.0.113.9"), {80}, ""});
    EXPECT_THROW(Simulator(std::move(cfg), 1), ConfigError);  // detached host
  }
  {
    auto cfg = line_network(1, {80});
    cfg.topology.add_switch("island");
    EXPECT_THROW(Simulator(std::move(cfg), 1), ConfigError);  // disconnected
  }
  {
    auto cfg = line_network(1, {80});
    cfg.real_pool = AddressPool::parse({"10.0.0.0/16"});
    EXPECT_THROW(Simulator(std::move(cfg), 1), ConfigError);  // pools overlap
  }
  {
    auto cfg = line_network(1, {80});
    cfg.real_pool = AddressPool::parse({"192.0.2.0/24"});
    EXPECT_THROW(Simulator(std::move(cfg), 1), ConfigError);  // rIP outside real pool
  }
  EXPECT_THROW(line_network(1, {}), ConfigError);
  EXPECT_THROW(line_network(1, {80, 80}), ConfigError);
}

TEST(Simulator, IcmpProbeToCurrentVipIsAnswered) {
  auto cfg = line_network(1, {80});
  Simulator sim(std::move(cfg), 4);
  const auto v = sim.controller().resolve("h1.example", 80);
  sim.probe({0, 0.0, {v.vip, 0}, PacketKind::IcmpProbe}, sim.topology().require("scanner"));
  const auto trace = sim.run();
  ASSERT_EQ(trace.probe_replies.size(), 1u);
  EXPECT_EQ(trace.probe_replies[0].responder, "h1");
  EXPECT_EQ(trace.probe_replies[0].target, (VirtualEndpoint{v.vip, 0}));
}

TEST(Simulator, SynProbeToClosedPortIsDropped) {
  auto cfg = line_network(1, {80});
  Simulator sim(std::move(cfg), 4);
  const auto v = sim.controller().resolve("h1.example", 80);
  sim.send(0, request("scanner", PacketKind::SynProbe, Endpoint{v.vip, 22}, "closed"));
  sim.send(0, request("scanner", PacketKind::SynProbe, Endpoint{v.vip, 80}, "open"));
  const auto trace = sim.run();
  ASSERT_TRUE(sim.fate("closed"));
  EXPECT_TRUE(sim.fate("closed")->dropped);
  EXPECT_EQ(sim.fate("closed")->reason, "port closed");
  EXPECT_TRUE(sim.fate("open.reply")->delivered);
  EXPECT_EQ(trace.count(TraceType::Drop), 1u);
}

TEST(Simulator, StaleSynProbeMissesAndIsDropped) {
  auto cfg = line_network(1, {80}, {"10.0.0.0/16"});
  cfg.schedule = MultiplexSchedule::every(10);
  Simulator sim(std::move(cfg), 4);
  const auto v = sim.controller().resolve("h1.example", 80);
  sim.send(15, request("scanner", PacketKind::SynProbe, v.endpoint(), "stale"));
  sim.run();
  ASSERT_NE(sim.controller().resolve("h1.example", 80), v);
  const auto* fate = sim.fate("stale");
  ASSERT_TRUE(fate);
  EXPECT_TRUE(fate->dropped);
  EXPECT_GE(fate->packet_ins, 1u);
  EXPECT_EQ(fate->node, "s1");
}

TEST(Simulator, TicksRunBeforeOtherEventsAtTheSameInstant) {
  auto cfg = line_network(1, {80}, {"10.0.0.0/16"});
  cfg.schedule = MultiplexSchedule::every(10);
  Simulator sim(std::move(cfg), 4);
  const auto v = sim.controller().resolve("h1.example", 80);
  sim.send(10, request("scanner", PacketKind::SynProbe, v.endpoint(), "at-tick"));
  const auto trace = sim.run();
  ASSERT_GE(trace.records.size(), 3u);
  EXPECT_EQ(trace.records[1].type, TraceType::Multiplex);
  EXPECT_EQ(trace.records[2].type, TraceType::Send);
  EXPECT_TRUE(sim.fate("at-tick")->dropped);
}

TEST(Simulator, ConservationCausalityAndNoCoreExposure) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto cfg = line_network(4, {22, 80}, {"10.0.0.0/24"}, 0.5);
    cfg.topology.add_client("admin", ip("198.51.100.10"));
    cfg.topology.connect("admin", "s1", 0.25);
    cfg.topology.add_dns("dns", ip("198.51.100.53"));
    cfg.topology.connect("dns", "s2", 2.0);
    cfg.authz.allow("admin", "h2");
    cfg.schedule = MultiplexSchedule::every(7);
    Simulator sim(std::move(cfg), seed);
    RandomSource rng(seed * 31);
    for (int i = 0; i < 40; ++i) {
      const double at = static_cast<double>(rng.below(60));
      const auto host = "h" + std::to_string(1 + rng.below(4));
      const Port port = rng.below(2) ? 80 : 22;
      const auto tag = "w" + std::to_string(i);
      switch (rng.below(5)) {
        case 0: {
          auto r = request("admin", PacketKind::DnsQuery, NodeTarget{"dns", 53}, tag.c_str());
          r.dns = DnsPayload{host + ".example", port, std::nullopt};
          sim.send(at, r);
          break;
        }
        case 1:
          sim.send(at, request("admin", PacketKind::Data, NodeTarget{host, port}, tag.c_str()));
          break;
        case 2:
          sim.send(at, request("h1", PacketKind::Data, Endpoint{sim.controller().resolve(host + ".example", port).endpoint()}, tag.c_str()));
          break;
        case 3:
          sim.send(at, request("scanner", PacketKind::IcmpProbe, Endpoint{IpAddress::from_octets(10, 0, 0, static_cast<std::uint8_t>(rng.below(256))), 0}, tag.c_str()));
          break;
        default:
          sim.send(at, request("scanner", PacketKind::SynProbe, Endpoint{IpAddress::from_octets(10, 0, 0, static_cast<std::uint8_t>(rng.below(256))), port}, tag.c_str()));
      }
    }
    const auto trace = sim.run();
    EXPECT_EQ(trace.in_flight, 0u);
    EXPECT_EQ(trace.counters.injected, trace.counters.delivered + trace.counters.dropped) << seed;
    EXPECT_EQ(trace.counters.core_rip_exposures, 0u) << seed;
    double last = 0.0;
    for (const auto& r : trace.records) {
      EXPECT_GE(r.time, last);
      last = r.time;
    }
    // A reply leaves no earlier than its request arrived plus one link.
    for (const auto& r : trace.records) {
      if (r.type != TraceType::Deliver || r.tag.ends_with(".reply") || r.tag.empty()) continue;
      const auto* reply = sim.fate(r.tag + ".reply");
      if (reply) {
        for (const auto& q : trace.records) {
          if (q.type == TraceType::Deliver && q.tag == r.tag + ".reply") EXPECT_GE(q.time, r.time + 0.25);
        }
      }
    }
  }
}

TEST(Simulator, IdenticalInputsGiveIdenticalTraces) {
  const auto s = preset("fig2");
  EXPECT_EQ(traced(s), traced(s));
  auto other = s;
  EXPECT_NE(run_scenario(other, s.seed + 1).trace.to_ndjson(), run_scenario(s, s.seed).trace.to_ndjson());
}

TEST(Simulator, DomainNameExchangeMatchesGolden) {
  const auto s = preset("fig2");
  const auto run = run_scenario(s, s.seed);
  EXPECT_TRUE(run.failures().empty()) << run.failures().front().message;
  EXPECT_EQ(header_line(s.source, s.seed) + run.trace.to_ndjson(),
            read_file(std::string(FRVM_SOURCE_DIR) + "/tests/golden/fig2.ndjson"));
}

TEST(Simulator, RealAddressExchangeMatchesGolden) {
  const auto s = preset("fig3");
  const auto run = run_scenario(s, s.seed);
  EXPECT_TRUE(run.failures().empty()) << run.failures().front().message;
  EXPECT_EQ(header_line(s.source, s.seed) + run.trace.to_ndjson(),
            read_file(std::string(FRVM_SOURCE_DIR) + "/tests/golden/fig3.ndjson"));
}

TEST(Simulator, DnsAnswerCarriesOnlyAVip) {
  const auto s = preset("fig2");
  const auto run = run_scenario(s, s.seed);
  bool saw_answer = false;
  for (const auto& r : run.trace.records) {
    if (r.type != TraceType::Deliver || !r.dns_answer) continue;
    saw_answer = true;
    EXPECT_TRUE(s.simulation->virtual_pool.contains(*r.dns_answer));
  }
  EXPECT_TRUE(saw_answer);
}
