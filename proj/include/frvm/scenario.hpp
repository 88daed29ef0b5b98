#pragma once

// Scenario files: JSON documents describing a network, a workload, scans,
// assertions and analytic sweeps.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "frvm/asp.hpp"
#include "frvm/error.hpp"
#include "frvm/monte_carlo.hpp"
#include "frvm/scanner.hpp"
#include "frvm/simulator.hpp"

namespace frvm {

using Json = nlohmann::json;

/// FNV-1a, 64 bit.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Digest of a config document; key order does not matter.
inline std::string config_digest(const Json& doc) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto h = fnv1a64(doc.dump());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

inline std::string header_line(const Json& doc, std::uint64_t seed) {
  return "# config-digest=" + config_digest(doc) + " seed=" + std::to_string(seed) + "\n";
}

/// Shortest round-trip decimal text, independent of locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline const Json& need(const Json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + ": missing '" + key + "'");
  return *it;
}

inline std::string get_string(const Json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

inline double get_number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::uint64_t get_count(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(where + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline Port get_port(const Json& v, const std::string& where) {
  const auto n = get_count(v, where);
  if (n > 65535) throw ConfigError(where + ": port out of range");
  return static_cast<Port>(n);
}

inline bool get_bool(const Json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
  return v.get<bool>();
}

template <typename F>
auto wrap(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline AddressPool get_pool(const Json& v, const std::string& where) {
  std::vector<std::string> blocks;
  if (v.is_string()) {
    blocks.push_back(v.get<std::string>());
  } else if (v.is_array()) {
    for (const auto& b : v) blocks.push_back(get_string(b, where));
  } else {
    throw ConfigError(where + ": expected a CIDR string or a list of them");
  }
  return wrap(where, [&] { return AddressPool::parse(blocks); });
}

inline IpAddress get_ip(const Json& v, const std::string& where) {
  const auto text = get_string(v, where);
  return wrap(where, [&] { return IpAddress::parse(text); });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sweeps

/// One analytic model evaluated over a grid of parameters.
struct SweepSeries {
  std::string model;
  std::vector<std::uint64_t> N;
  std::vector<std::uint64_t> n{1};
  Json k;  // grid spec, resolved per N
  std::vector<std::uint64_t> x{1};
  std::vector<std::uint64_t> m;  // services per host, overhead model only
};

struct StatisticSpec {
  std::string type;
  std::uint64_t N = 0;
  std::uint64_t n = 0;
  Json k;
};

struct SweepSpec {
  std::vector<SweepSeries> series;
  std::vector<StatisticSpec> statistics;
};

struct SweepRow {
  std::string model;
  std::optional<std::uint64_t> N, n, k, x;
  std::string r;
  double asp = 0.0;
  double stderr_value = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kCsvColumns = "model,N,n,k,x,r,asp,stderr,trials,seed";

inline const std::set<std::string, std::less<>>& sweep_models() {
  static const std::set<std::string, std::less<>> models{
      "static_exact", "static_at_least_one", "static_tail", "frvm_pmf",
      "frvm_at_least_one", "frvm_multi", "overhead_flow_entries"};
  return models;
}

/// Expands a grid spec. Accepted forms: a list of integers;
/// {"from", "to", "step"} (inclusive); {"pow2": [a, b]} for 2^a..2^b;
/// {"fraction": [q...]} for round(q N); {"linspace": s} for round(i N / s), i = 0..s.
inline std::vector<std::uint64_t> expand_grid(const Json& spec, std::uint64_t N, const std::string& where) {
  using namespace detail;
  std::vector<std::uint64_t> out;
  if (spec.is_array()) {
    for (const auto& v : spec) out.push_back(get_count(v, where));
    return out;
  }
  if (spec.is_number_integer()) return {get_count(spec, where)};
  if (!spec.is_object()) throw ConfigError(where + ": expected a list or a range object");
  if (spec.contains("pow2")) {
    check_keys(spec, {"pow2"}, where);
    const auto& r = spec["pow2"];
    if (!r.is_array() || r.size() != 2) throw ConfigError(where + ": pow2 takes [low, high]");
    const auto lo = get_count(r[0], where);
    const auto hi = get_count(r[1], where);
    if (hi > 62) throw ConfigError(where + ": pow2 exponent too large");
    for (auto e = lo; e <= hi; ++e) out.push_back(std::uint64_t{1} << e);
    return out;
  }
  if (spec.contains("fraction")) {
    check_keys(spec, {"fraction"}, where);
    for (const auto& q : spec["fraction"]) {
      const double f = get_number(q, where);
      if (!(f >= 0.0 && f <= 1.0)) throw ConfigError(where + ": fraction outside [0, 1]");
      out.push_back(partial_scan_count(N, f));
    }
    return out;
  }
  if (spec.contains("linspace")) {
    check_keys(spec, {"linspace"}, where);
    const auto steps = get_count(spec["linspace"], where);
    if (steps == 0) throw ConfigError(where + ": linspace needs at least one step");
    for (std::uint64_t i = 0; i <= steps; ++i) {
      out.push_back(static_cast<std::uint64_t>(
          std::llround(static_cast<long double>(i) * static_cast<long double>(N) / steps)));
    }
    return out;
  }
  check_keys(spec, {"from", "to", "step"}, where);
  const auto from = get_count(need(spec, "from", where), where);
  const auto to = get_count(need(spec, "to", where), where);
  const auto step = spec.contains("step") ? get_count(spec["step"], where) : 1;
  if (step == 0) throw ConfigError(where + ": step must be positive");
  for (auto v = from; v <= to; v += step) {
    out.push_back(v);
    if (to - v < step) break;
  }
  return out;
}

inline std::string describe_grid(const Json& spec) { return spec.dump(); }

inline SweepSpec parse_sweep(const Json& j) {
  using namespace detail;
  SweepSpec spec;
  check_keys(j, {"series", "statistics"}, "sweep");
  if (j.contains("series")) {
    std::size_t i = 0;
    for (const auto& s : j["series"]) {
      const auto where = "sweep.series[" + std::to_string(i++) + "]";
      check_keys(s, {"model", "N", "n", "k", "x", "m"}, where);
      SweepSeries series;
      series.model = get_string(need(s, "model", where), where + ".model");
      if (!sweep_models().contains(series.model)) {
        throw ConfigError(where + ": unknown model '" + series.model + "'");
      }
      auto list = [&](const char* key, std::vector<std::uint64_t>& dst) {
        if (!s.contains(key)) return;
        dst = expand_grid(s[key], 0, where + "." + key);
      };
      if (series.model == "overhead_flow_entries") {
        list("n", series.n);
        series.m = expand_grid(need(s, "m", where), 0, where + ".m");
      } else {
        series.N = expand_grid(need(s, "N", where), 0, where + ".N");
        list("n", series.n);
        list("x", series.x);
        series.k = need(s, "k", where);
        for (auto N : series.N) expand_grid(series.k, N, where + ".k");
      }
      spec.series.push_back(std::move(series));
    }
  }
  if (j.contains("statistics")) {
    std::size_t i = 0;
    for (const auto& s : j["statistics"]) {
      const auto where = "sweep.statistics[" + std::to_string(i++) + "]";
      check_keys(s, {"type", "N", "n", "k"}, where);
      StatisticSpec st;
      st.type = get_string(need(s, "type", where), where);
      if (st.type != "mean_reduction_ratio") throw ConfigError(where + ": unknown statistic '" + st.type + "'");
      st.N = get_count(need(s, "N", where), where);
      st.n = get_count(need(s, "n", where), where);
      st.k = need(s, "k", where);
      expand_grid(st.k, st.N, where + ".k");
      spec.statistics.push_back(std::move(st));
    }
  }
  return spec;
}

/// Evaluates every series; throws ConfigError on a parameter outside a model's domain.
inline std::vector<SweepRow> evaluate_sweep(const SweepSpec& spec, std::uint64_t seed) {
  std::vector<SweepRow> rows;
  for (const auto& s : spec.series) {
    if (s.model == "overhead_flow_entries") {
      for (auto n : s.n) {
        for (auto m : s.m) {
          SweepRow row{s.model, std::nullopt, n, m, std::nullopt, "", 0.0, 0.0, 0, seed};
          row.asp = static_cast<double>(overhead_flow_entries(n, m));
          rows.push_back(std::move(row));
        }
      }
      continue;
    }
    const bool is_static = s.model.starts_with("static");
    for (auto N : s.N) {
      const auto ks = expand_grid(s.k, N, "k");
      for (auto n : s.n) {
        for (auto k : ks) {
          for (auto x : s.x) {
            SweepRow row{s.model, N, n, k, x, is_static ? "inf" : "1", 0.0, 0.0, 0, seed};
            try {
              if (s.model == "static_exact") {
                row.asp = asp_static_exact(N, n, k, x);
              } else if (s.model == "static_at_least_one") {
                row.x = 1;
                row.asp = asp_static_at_least_one(N, n, k);
              } else if (s.model == "static_tail") {
                if (n > N || k > N || x > n) throw DomainError("invalid hypergeometric parameters");
                row.asp = asp_static_tail(N, n, k, x);
              } else if (s.model == "frvm_pmf") {
                if (N == 0 || n > N) throw DomainError("invalid success probability");
                row.asp = asp_frvm_pmf(k, x, static_cast<double>(n) / static_cast<double>(N));
              } else if (s.model == "frvm_at_least_one") {
                row.n = 1;
                row.x = 1;
                row.asp = asp_frvm_at_least_one(N, k);
              } else {
                row.asp = asp_frvm_multi(N, n, k, x);
              }
            } catch (const DomainError& e) {
              throw ConfigError("sweep " + s.model + " at N=" + std::to_string(N) + " n=" + std::to_string(n) +
                                " k=" + std::to_string(k) + " x=" + std::to_string(x) + ": " + e.what());
            }
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  return rows;
}

inline std::string csv_row(const SweepRow& row) {
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string(); };
  return row.model + "," + opt(row.N) + "," + opt(row.n) + "," + opt(row.k) + "," + opt(row.x) + "," + row.r +
         "," + format_double(row.asp) + "," + format_double(row.stderr_value) + "," + std::to_string(row.trials) +
         "," + std::to_string(row.seed) + "\n";
}

/// Comment lines for the requested statistics.
inline std::vector<std::string> evaluate_statistics(const SweepSpec& spec) {
  std::vector<std::string> out;
  for (const auto& st : spec.statistics) {
    const auto grid = expand_grid(st.k, st.N, "k");
    const double value = mean_reduction_ratio(st.N, st.n, grid);
    out.push_back("# " + st.type + " N=" + std::to_string(st.N) + " n=" + std::to_string(st.n) +
                  " k=" + describe_grid(st.k) + " value=" + format_double(value) + "\n");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios

struct CaptureSpec {
  double at = 0.0;
  std::string name;
  std::optional<std::string> domain;      // resolve through the controller
  std::optional<std::string> answer_tag;  // take the answer of a DNS response
  Port port = 0;
};

struct AssertSpec {
  double at = 0.0;
  std::string name;
  std::string type;
  Json args;
};

/// Closed form a Monte-Carlo run is compared against.
struct Expectation {
  std::string model;  // frvm_at_least_one | frvm_multi | static_at_least_one
  std::uint64_t N = 0, n = 1, k = 0, x = 1;

  double value() const {
    if (model == "frvm_at_least_one") return asp_frvm_at_least_one(N, k);
    if (model == "static_at_least_one") return asp_static_at_least_one(N, n, k);
    return asp_frvm_multi(N, n, k, x);
  }
};

struct Scenario {
  Json source;
  std::string name;
  std::uint64_t seed = 0;
  std::optional<SimulationConfig> simulation;
  std::vector<std::pair<double, SendRequest>> workload;
  std::vector<CaptureSpec> captures;
  std::vector<AssertSpec> assertions;
  std::optional<ScanCampaign> campaign;
  std::uint64_t trials = 1;
  std::optional<Expectation> expect;
  std::optional<SweepSpec> sweep;
  std::optional<double> campaign_r;

  bool has_simulation() const { return simulation.has_value(); }
};

namespace detail {

inline Topology parse_topology(const Json& j) {
  check_keys(j, {"switches", "servers", "clients", "dns", "links"}, "topology");
  Topology t;
  const auto at = [](const char* what, std::size_t i) { return std::string("topology.") + what + "[" + std::to_string(i) + "]"; };
  if (j.contains("switches")) {
    std::size_t i = 0;
    for (const auto& s : j["switches"]) {
      const auto name = get_string(s, at("switches", i++));
      wrap("topology", [&] { return t.add_switch(name); });
    }
  }
  if (j.contains("servers")) {
    std::size_t i = 0;
    for (const auto& s : j["servers"]) {
      const auto where = at("servers", i++);
      check_keys(s, {"name", "rip", "services", "domain"}, where);
      HostRecord h;
      h.host_id = get_string(need(s, "name", where), where + ".name");
      h.rip = get_ip(need(s, "rip", where), where + ".rip");
      for (const auto& p : need(s, "services", where)) h.services.push_back(get_port(p, where + ".services"));
      if (s.contains("domain")) h.domain_name = get_string(s["domain"], where + ".domain");
      wrap(where, [&] { return t.add_server(std::move(h)); });
    }
  }
  auto plain = [&](const char* key, bool dns) {
    if (!j.contains(key)) return;
    std::size_t i = 0;
    for (const auto& c : j[key]) {
      const auto where = at(key, i++);
      check_keys(c, {"name", "ip"}, where);
      const auto name = get_string(need(c, "name", where), where + ".name");
      const auto ip = get_ip(need(c, "ip", where), where + ".ip");
      wrap(where, [&] { return dns ? t.add_dns(name, ip) : t.add_client(name, ip); });
    }
  };
  plain("clients", false);
  plain("dns", true);
  if (j.contains("links")) {
    std::size_t i = 0;
    for (const auto& l : j["links"]) {
      const auto where = at("links", i++);
      check_keys(l, {"a", "b", "latency"}, where);
      const auto a = get_string(need(l, "a", where), where + ".a");
      const auto b = get_string(need(l, "b", where), where + ".b");
      const double latency = l.contains("latency") ? get_number(l["latency"], where + ".latency") : 1.0;
      wrap(where, [&] {
        t.connect(a, b, latency);
        return 0;
      });
    }
  }
  return t;
}

inline SendTarget parse_target(const Json& j, const std::string& where) {
  check_keys(j, {"node", "ip", "var", "port"}, where);
  const int forms = int(j.contains("node")) + int(j.contains("ip")) + int(j.contains("var"));
  if (forms != 1) throw ConfigError(where + ": give exactly one of node, ip, var");
  std::optional<Port> port;
  if (j.contains("port")) port = get_port(j["port"], where + ".port");
  if (j.contains("node")) return NodeTarget{get_string(j["node"], where + ".node"), port.value_or(0)};
  if (j.contains("ip")) return Endpoint{get_ip(j["ip"], where + ".ip"), port.value_or(0)};
  return VariableTarget{get_string(j["var"], where + ".var"), port};
}

inline ScanCampaign parse_campaign(const Json& j, const AddressPool& default_pool, std::optional<double>& r) {
  check_keys(j, {"strategy", "k", "eta", "r", "target_pool", "ports", "goal", "threshold", "scanner"}, "campaign");
  ScanCampaign c;
  c.target_pool = default_pool;
  if (j.contains("strategy")) c.strategy = wrap("campaign.strategy", [&] { return parse_scan_strategy(get_string(j["strategy"], "campaign.strategy")); });
  c.k = get_count(need(j, "k", "campaign"), "campaign.k");
  if (j.contains("eta")) c.eta = get_number(j["eta"], "campaign.eta");
  if (j.contains("r")) {
    r = get_number(j["r"], "campaign.r");
    if (!(*r > 0.0) || !std::isfinite(*r)) throw ConfigError("campaign.r must be positive and finite");
  }
  if (j.contains("target_pool")) c.target_pool = get_pool(j["target_pool"], "campaign.target_pool");
  if (j.contains("ports")) {
    for (const auto& p : j["ports"]) c.ports.push_back(get_port(p, "campaign.ports"));
  }
  if (j.contains("goal")) c.goal = wrap("campaign.goal", [&] { return parse_scan_goal(get_string(j["goal"], "campaign.goal")); });
  if (j.contains("threshold")) c.threshold = get_count(j["threshold"], "campaign.threshold");
  if (j.contains("scanner")) c.scanner = get_string(j["scanner"], "campaign.scanner");
  wrap("campaign", [&] {
    c.validate();
    return 0;
  });
  return c;
}

inline const std::set<std::string, std::less<>>& assertion_types() {
  static const std::set<std::string, std::less<>> types{
      "flow_count", "stale_flow_count", "delivered", "dropped", "table_miss",
      "dns_answer_virtual", "no_rip_on_core_links", "epoch", "multiplex_count"};
  return types;
}

}  // namespace detail

/// Parses and fully validates a scenario document. Throws ConfigError.
inline Scenario parse_scenario(const Json& doc) {
  using namespace detail;
  check_keys(doc, {"name", "description", "seed", "virtual_pool", "real_pool", "multiplex_interval", "end_time",
                   "pin_connections", "follow_dns_answers", "topology", "authz", "workload", "captures",
                   "assertions", "campaign", "trials", "expect", "sweep"},
             "scenario");
  Scenario s;
  s.source = doc;
  if (doc.contains("name")) s.name = get_string(doc["name"], "name");
  if (doc.contains("seed")) s.seed = get_count(doc["seed"], "seed");
  if (doc.contains("sweep")) s.sweep = parse_sweep(doc["sweep"]);

  if (!doc.contains("topology")) {
    for (auto key : {"workload", "captures", "assertions", "campaign", "authz"}) {
      if (doc.contains(key)) throw ConfigError(std::string(key) + " needs a topology");
    }
    return s;
  }

  SimulationConfig cfg;
  cfg.topology = parse_topology(doc["topology"]);
  cfg.virtual_pool = get_pool(need(doc, "virtual_pool", "scenario"), "virtual_pool");
  if (doc.contains("real_pool")) cfg.real_pool = get_pool(doc["real_pool"], "real_pool");
  if (doc.contains("end_time")) cfg.end_time = get_number(doc["end_time"], "end_time");
  if (doc.contains("pin_connections")) cfg.controller.pin_connections = get_bool(doc["pin_connections"], "pin_connections");
  if (doc.contains("follow_dns_answers")) cfg.follow_dns_answers = get_bool(doc["follow_dns_answers"], "follow_dns_answers");
  if (doc.contains("authz")) {
    for (const auto& pair : doc["authz"]) {
      if (!pair.is_array() || pair.size() != 2) throw ConfigError("authz: expected [source, destination] pairs");
      cfg.authz.allow(get_string(pair[0], "authz"), get_string(pair[1], "authz"));
    }
  }
  if (doc.contains("campaign")) s.campaign = parse_campaign(doc["campaign"], cfg.virtual_pool, s.campaign_r);

  if (doc.contains("multiplex_interval") && !doc["multiplex_interval"].is_null()) {
    if (s.campaign_r) throw ConfigError("give either multiplex_interval or campaign.r, not both");
    const double T = get_number(doc["multiplex_interval"], "multiplex_interval");
    cfg.schedule = wrap("multiplex_interval", [&] { return MultiplexSchedule::every(T); });
  } else if (s.campaign_r) {
    // r = eta / theta = eta * T
    cfg.schedule = MultiplexSchedule::every(*s.campaign_r / s.campaign->eta);
  }
  wrap("scenario", [&] {
    cfg.validate();
    return 0;
  });

  const auto& topo = cfg.topology;
  auto known_node = [&](const std::string& name, const std::string& where) {
    if (!topo.find(name)) throw ConfigError(where + ": unknown node '" + name + "'");
  };
  for (const auto& [src, dst] : cfg.authz.allowed()) {
    known_node(src, "authz");
    known_node(dst, "authz");
  }

  std::set<std::string> variables;
  if (doc.contains("captures")) {
    std::size_t i = 0;
    for (const auto& c : doc["captures"]) {
      const auto where = "captures[" + std::to_string(i++) + "]";
      check_keys(c, {"at", "name", "domain", "dns_answer", "port"}, where);
      CaptureSpec cap;
      cap.at = get_number(need(c, "at", where), where + ".at");
      cap.name = get_string(need(c, "name", where), where + ".name");
      if (c.contains("domain")) cap.domain = get_string(c["domain"], where + ".domain");
      if (c.contains("dns_answer")) cap.answer_tag = get_string(c["dns_answer"], where + ".dns_answer");
      if (cap.domain.has_value() == cap.answer_tag.has_value()) {
        throw ConfigError(where + ": give exactly one of domain, dns_answer");
      }
      if (cap.domain && !topo.host_by_domain(*cap.domain)) {
        throw ConfigError(where + ": unknown domain '" + *cap.domain + "'");
      }
      cap.port = get_port(need(c, "port", where), where + ".port");
      variables.insert(cap.name);
      s.captures.push_back(std::move(cap));
    }
  }

  if (doc.contains("workload")) {
    std::size_t i = 0;
    for (const auto& w : doc["workload"]) {
      const auto where = "workload[" + std::to_string(i++) + "]";
      check_keys(w, {"at", "from", "kind", "to", "src_port", "tag", "dns"}, where);
      SendRequest req;
      const double at = get_number(need(w, "at", where), where + ".at");
      req.from = get_string(need(w, "from", where), where + ".from");
      known_node(req.from, where);
      if (topo.is_switch(*topo.find(req.from))) throw ConfigError(where + ": switches do not send");
      const auto kind = get_string(need(w, "kind", where), where + ".kind");
      const auto parsed = parse_packet_kind(kind);
      if (!parsed) throw ConfigError(where + ": unknown packet kind '" + kind + "'");
      req.kind = *parsed;
      req.to = parse_target(need(w, "to", where), where + ".to");
      if (const auto* node = std::get_if<NodeTarget>(&req.to)) known_node(node->name, where + ".to");
      if (const auto* var = std::get_if<VariableTarget>(&req.to); var && !variables.contains(var->name)) {
        throw ConfigError(where + ": variable '" + var->name + "' is never captured");
      }
      if (w.contains("src_port")) req.src_port = get_port(w["src_port"], where + ".src_port");
      if (w.contains("tag")) req.tag = get_string(w["tag"], where + ".tag");
      if (w.contains("dns")) {
        const auto& d = w["dns"];
        check_keys(d, {"name", "port"}, where + ".dns");
        req.dns = DnsPayload{get_string(need(d, "name", where), where + ".dns.name"),
                             get_port(need(d, "port", where), where + ".dns.port"), std::nullopt};
      }
      if (req.kind == PacketKind::DnsQuery && !req.dns) throw ConfigError(where + ": DnsQuery needs a dns section");
      s.workload.emplace_back(at, std::move(req));
    }
  }

  if (doc.contains("assertions")) {
    std::size_t i = 0;
    for (const auto& a : doc["assertions"]) {
      const auto where = "assertions[" + std::to_string(i++) + "]";
      if (!a.is_object()) throw ConfigError(where + ": expected an object");
      const auto type = get_string(need(a, "type", where), where + ".type");
      if (!assertion_types().contains(type)) throw ConfigError(where + ": unknown assertion type '" + type + "'");
      std::vector<double> times;
      if (a.contains("every")) {
        const double every = get_number(a["every"], where + ".every");
        const double from = get_number(need(a, "at", where), where + ".at");
        const double until = get_number(need(a, "until", where), where + ".until");
        if (!(every > 0.0)) throw ConfigError(where + ": every must be positive");
        for (std::uint64_t r = 0;; ++r) {
          const double t = from + static_cast<double>(r) * every;
          if (t > until) break;
          times.push_back(t);
        }
      } else {
        times.push_back(get_number(need(a, "at", where), where + ".at"));
      }
      if (a.contains("switch")) known_node(get_string(a["switch"], where + ".switch"), where);
      const auto name = a.contains("name") ? get_string(a["name"], where + ".name") : type;
      for (double t : times) s.assertions.push_back({t, name, type, a});
    }
  }

  if (doc.contains("trials")) {
    s.trials = get_count(doc["trials"], "trials");
    if (s.trials == 0) throw ConfigError("trials must be at least 1");
  }
  if (doc.contains("expect")) {
    const auto& e = doc["expect"];
    check_keys(e, {"model", "N", "n", "k", "x"}, "expect");
    Expectation ex;
    ex.model = get_string(need(e, "model", "expect"), "expect.model");
    if (ex.model != "frvm_at_least_one" && ex.model != "frvm_multi" && ex.model != "static_at_least_one") {
      throw ConfigError("expect: unsupported model '" + ex.model + "'");
    }
    ex.N = get_count(need(e, "N", "expect"), "expect.N");
    if (e.contains("n")) ex.n = get_count(e["n"], "expect.n");
    ex.k = get_count(need(e, "k", "expect"), "expect.k");
    if (e.contains("x")) ex.x = get_count(e["x"], "expect.x");
    try {
      (void)ex.value();
    } catch (const DomainError& err) {
      throw ConfigError(std::string("expect: ") + err.what());
    }
    if (!s.campaign) throw ConfigError("expect needs a campaign");
    s.expect = ex;
  }
  if (s.campaign) {
    const auto scanner = topo.find(s.campaign->scanner);
    if (!scanner || topo.node(*scanner).role != NodeRole::Client) {
      throw ConfigError("campaign.scanner must name a client node");
    }
  }
  s.simulation = std::move(cfg);
  return s;
}

inline Scenario parse_scenario_text(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  return parse_scenario(doc);
}

namespace detail {

inline std::optional<std::string> evaluate_assertion(const AssertSpec& spec, Simulator& sim) {
  const auto& a = spec.args;
  auto fate_of = [&](const char* key) -> const PacketFate* {
    return sim.fate(a.at(key).get<std::string>());
  };
  auto expect_count = [&](std::size_t actual) -> std::optional<std::string> {
    const auto want = a.at("equals").get<std::uint64_t>();
    if (actual == want) return std::nullopt;
    return "expected " + std::to_string(want) + ", found " + std::to_string(actual);
  };
  const auto epoch = sim.controller().epoch();
  const auto& type = spec.type;

  if (type == "flow_count") {
    const auto origin = a.value("origin", std::string("any"));
    const auto which = a.value("epoch", std::string("current"));
    std::size_t n = 0;
    for (const auto& [id, table] : sim.fabric().tables()) {
      if (a.contains("switch") && sim.topology().node(id).name != a["switch"].get<std::string>()) continue;
      for (const auto& e : table.entries()) {
        if (origin == "baseline" && e.origin != FlowOrigin::Baseline) continue;
        if (origin == "connection" && e.origin != FlowOrigin::Connection) continue;
        if (which == "current" && e.epoch_installed != epoch) continue;
        if (which == "stale" && e.epoch_installed >= epoch) continue;
        ++n;
      }
    }
    return expect_count(n);
  }
  if (type == "stale_flow_count") return expect_count(sim.fabric().stale_entries(epoch));
  if (type == "epoch") return expect_count(epoch);
  if (type == "multiplex_count") return expect_count(sim.counters().multiplex_events);
  if (type == "no_rip_on_core_links") {
    const auto n = sim.counters().core_rip_exposures;
    if (n == 0) return std::nullopt;
    return std::to_string(n) + " packet(s) carried a real address between switches";
  }

  const auto tag = a.at("tag").get<std::string>();
  const auto* fate = fate_of("tag");
  if (!fate) return "no packet tagged '" + tag + "' has terminated";
  if (type == "delivered") {
    if (fate->delivered) return std::nullopt;
    return "'" + tag + "' was dropped at " + fate->node + " (" + fate->reason + ")";
  }
  if (type == "dropped" || type == "table_miss") {
    if (!fate->dropped) return "'" + tag + "' was delivered to " + fate->node;
    if (a.contains("reason_contains") &&
        fate->reason.find(a["reason_contains"].get<std::string>()) == std::string::npos) {
      return "'" + tag + "' dropped for '" + fate->reason + "'";
    }
    if (type == "table_miss" && fate->packet_ins == 0) return "'" + tag + "' never missed a flow table";
    return std::nullopt;
  }
  // dns_answer_virtual
  if (!fate->dns_answer) return "'" + tag + "' carried no DNS answer";
  if (sim.topology().host_by_rip(*fate->dns_answer)) return "DNS answer exposes real address " + fate->dns_answer->to_string();
  if (!sim.controller().space().contains(*fate->dns_answer)) {
    return "DNS answer " + fate->dns_answer->to_string() + " is outside the virtual pool";
  }
  return std::nullopt;
}

}  // namespace detail

struct ScenarioRun {
  SimulationTrace trace;
  std::optional<ScanOutcome> outcome;
  std::optional<MonteCarloResult> monte_carlo;
  std::optional<double> expected;
  std::string flow_dump;

  /// Assertion failures, including a Monte-Carlo estimate outside 3 standard errors.
  std::vector<AssertResult> failures() const {
    std::vector<AssertResult> out;
    for (const auto& a : trace.assertions) {
      if (!a.ok) out.push_back(a);
    }
    if (monte_carlo && expected) {
      const double tol = 3.0 * monte_carlo->standard_error;
      const double diff = std::abs(monte_carlo->estimate - *expected);
      if (diff > tol) {
        out.push_back({0.0, "montecarlo_within_3se", false,
                       "estimate " + format_double(monte_carlo->estimate) + " vs closed form " +
                           format_double(*expected) + " (3 SE = " + format_double(tol) + ")"});
      }
    }
    return out;
  }
};

/// Runs the simulation part of a scenario. With trials > 1 and a campaign,
/// the campaign is run as a Monte-Carlo batch instead of a single traced run.
inline ScenarioRun run_scenario(const Scenario& s, std::uint64_t seed, std::optional<std::uint64_t> trials = {}) {
  if (!s.simulation) throw ConfigError("scenario has no topology to simulate");
  ScenarioRun out;
  const auto n_trials = trials.value_or(s.trials);
  if (s.campaign && n_trials > 1) {
    out.monte_carlo = monte_carlo_asp(*s.campaign, *s.simulation, n_trials, seed);
    if (s.expect) out.expected = s.expect->value();
    return out;
  }

  Simulator sim(*s.simulation, seed);
  for (const auto& [at, req] : s.workload) sim.send(at, req);
  for (const auto& cap : s.captures) {
    ScenarioCheck check;
    check.name = cap.name;
    check.is_capture = true;
    check.check = [cap](Simulator& sim) -> std::optional<std::string> {
      if (cap.domain) {
        const auto v = sim.controller().resolve(*cap.domain, cap.port);
        sim.set_variable(cap.name, v.endpoint());
        return std::nullopt;
      }
      const auto* fate = sim.fate(*cap.answer_tag);
      if (!fate || !fate->dns_answer) return "no DNS answer under '" + *cap.answer_tag + "'";
      sim.set_variable(cap.name, {*fate->dns_answer, cap.port});
      return std::nullopt;
    };
    sim.check(cap.at, std::move(check));
  }
  for (const auto& spec : s.assertions) {
    ScenarioCheck check;
    check.name = spec.name;
    check.check = [spec](Simulator& sim) { return detail::evaluate_assertion(spec, sim); };
    sim.check(spec.at, std::move(check));
  }
  std::vector<Probe> probes;
  if (s.campaign) probes = schedule_campaign(sim, *s.campaign, seed);
  out.trace = sim.run();
  if (s.campaign) out.outcome = score_campaign(*s.campaign, probes, out.trace);
  for (const auto& [id, table] : sim.fabric().tables()) out.flow_dump += table.dump();
  return out;
}

/// One NDJSON record describing a campaign outcome.
inline std::string outcome_record(const Scenario& s, const ScenarioRun& run, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  if (s.campaign) {
    j["k"] = s.campaign->k;
    j["N"] = s.campaign->slots();
    std::uint64_t live = 0;
    for (const auto& node : s.simulation->topology.nodes()) live += node.host ? 1 : 0;
    j["n"] = live;
    const auto& sched = s.simulation->schedule;
    if (sched.is_static()) {
      j["r"] = "inf";
    } else {
      j["r"] = s.campaign->eta * sched.interval();
    }
  }
  if (run.outcome) {
    j["discovered"] = run.outcome->discovered_hosts.size();
    j["hits"] = run.outcome->hits.size();
    if (run.outcome->first_hit_index) {
      j["first_hit"] = *run.outcome->first_hit_index;
    } else {
      j["first_hit"] = nullptr;
    }
    j["success"] = run.outcome->success;
  }
  if (run.monte_carlo) {
    j["trials"] = run.monte_carlo->trials;
    j["successes"] = run.monte_carlo->successes;
    j["estimate"] = run.monte_carlo->estimate;
    j["stderr"] = run.monte_carlo->standard_error;
    if (run.expected) j["closed_form"] = *run.expected;
  }
  return j.dump() + "\n";
}

}  // namespace frvm
