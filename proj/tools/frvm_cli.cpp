// frvm_cli: analytic sweeps, protocol simulations and flow-table dumps.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "frvm/scenario.hpp"
#include "frvm_presets.hpp"

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kAssertion = 2, kRuntime = 3 };

struct Options {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;
  std::string out;
};

frvm::Json load_document(const Options& opt) {
  if (opt.config.empty() == opt.preset.empty()) {
    throw frvm::ConfigError("give exactly one of --config or --preset");
  }
  std::string text;
  if (!opt.preset.empty()) {
    const auto& presets = frvm::builtin_presets();
    const auto it = presets.find(opt.preset);
    if (it == presets.end()) {
      std::string names;
      for (const auto& [name, body] : presets) names += " " + name;
      throw frvm::ConfigError("unknown preset '" + opt.preset + "'; available:" + names);
    }
    text = it->second;
  } else {
    std::ifstream in(opt.config, std::ios::binary);
    if (!in) throw frvm::ConfigError("cannot read " + opt.config);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  try {
    return frvm::Json::parse(text);
  } catch (const frvm::Json::exception& e) {
    throw frvm::ConfigError(std::string("malformed config: ") + e.what());
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

struct Loaded {
  frvm::Json doc;
  frvm::Scenario scenario;
  std::uint64_t seed;
};

Loaded load(const Options& opt) {
  auto doc = load_document(opt);
  if (opt.trials) doc["trials"] = *opt.trials;
  auto scenario = frvm::parse_scenario(doc);
  const auto seed = opt.seed.value_or(scenario.seed);
  return {std::move(doc), std::move(scenario), seed};
}

int cmd_sweep(const Options& opt) {
  const auto loaded = load(opt);
  if (!loaded.scenario.sweep) throw frvm::ConfigError("config has no sweep section");
  const auto& spec = *loaded.scenario.sweep;
  const auto rows = frvm::evaluate_sweep(spec, loaded.seed);
  const auto stats = frvm::evaluate_statistics(spec);

  std::string text = frvm::header_line(loaded.doc, loaded.seed);
  for (const auto& line : stats) {
    text += line;
    std::cerr << line.substr(2);
  }
  text += std::string(frvm::kCsvColumns) + "\n";
  for (const auto& row : rows) text += frvm::csv_row(row);
  write_output(opt.out, text);
  return kOk;
}

int report_failures(const frvm::ScenarioRun& run) {
  const auto failures = run.failures();
  if (failures.empty()) return kOk;
  for (const auto& f : failures) {
    std::cerr << "assertion failed: " << f.name << " at t=" << frvm::format_double(f.time) << ": " << f.message
              << "\n";
  }
  return kAssertion;
}

int cmd_simulate(const Options& opt) {
  const auto loaded = load(opt);
  const auto& s = loaded.scenario;
  if (!s.has_simulation()) throw frvm::ConfigError("config has no topology to simulate");
  const auto run = frvm::run_scenario(s, loaded.seed);
  const auto header = frvm::header_line(loaded.doc, loaded.seed);

  std::string outcome;
  if (s.campaign) outcome = header + frvm::outcome_record(s, run, loaded.seed);
  if (run.monte_carlo) {
    // A Monte-Carlo batch has no single trace; the outcome is the result.
    write_output(opt.out, outcome);
  } else {
    write_output(opt.out, header + run.trace.to_ndjson());
    if (!outcome.empty()) {
      write_output(opt.out.empty() || opt.out == "-" ? opt.out : opt.out + ".outcome.ndjson", outcome);
    }
  }
  return report_failures(run);
}

int cmd_dump_flows(const Options& opt) {
  const auto loaded = load(opt);
  if (!loaded.scenario.has_simulation()) throw frvm::ConfigError("config has no topology to simulate");
  const auto run = frvm::run_scenario(loaded.scenario, loaded.seed, 1);
  write_output(opt.out, frvm::header_line(loaded.doc, loaded.seed) + run.flow_dump);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FRVM moving-target-defense simulator and ASP analytics"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Scenario or sweep file (JSON)");
    sub->add_option("--preset", opt.preset, "Built-in preset name");
    sub->add_option("--seed", opt.seed, "Seed override");
    sub->add_option("--trials", opt.trials, "Monte-Carlo trial count override");
    sub->add_option("--out", opt.out, "Output path (default: stdout)");
  };
  auto* sweep = app.add_subcommand("sweep", "Evaluate closed-form ASP models over a parameter grid");
  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write its trace");
  auto* dump = app.add_subcommand("dump-flows", "Run a scenario and print the final flow tables");
  for (auto* sub : {sweep, simulate, dump}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sweep->parsed()) return cmd_sweep(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    return cmd_dump_flows(opt);
  } catch (const frvm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
