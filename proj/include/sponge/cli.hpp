#pragma once

#include <CLI11.hpp>

#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sponge/io.hpp"

namespace sponge::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

inline void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const std::string& value) {
  if (i + 1 == parts.size()) {
    node[parts[i]] = value;
    return;
  }
  YAML::Node child = node[parts[i]];
  set_path(child, parts, i + 1, value);
}

/// Scenario with `key` (dotted path) replaced by `value`.
inline Scenario with_override(const YAML::Node& root, const fs::path& base, const std::string& source, const std::string& key,
                              const std::string& value) {
  YAML::Node copy = YAML::Clone(root);
  const auto parts = split(key, '.');
  if (parts.empty()) throw ConfigError("--param must name a scenario key");
  set_path(copy, parts, 0, value);
  return scenario_from_yaml(copy, base, source + " [" + key + "=" + value + "]");
}

inline nlohmann::ordered_json probe_json(const Scenario& s) {
  const auto windows = scenario_windows(s);
  const auto bounds = feasibility_bounds(s);
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < windows.size(); ++k) {
    arr.push_back({{"index", windows[k].index},
                   {"start_tick", windows[k].start_tick},
                   {"end_tick", windows[k].end_tick},
                   {"max_dissipation_kwh", bounds[k].kwh()}});
  }
  return {{"windows", arr}};
}

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fleet coordination simulator for energy dissipation targets"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Simulate a scenario and print its summary");
  run->add_option("scenario", scenario_path, "Scenario YAML file")->required();
  run->add_option("--out", out_dir, "Directory for timeseries.csv and summary.json");
  run->add_option("--seed", seed, "Override the scenario seed");

  std::vector<double> weights;
  double total = 0.0;
  auto* oracle = app.add_subcommand("oracle", "Solve the share allocation for quadratic utilities");
  oracle->add_option("--a", weights, "Comma-separated utility coefficients")->required()->delimiter(',');
  oracle->add_option("--total", total, "Sum of shares")->required();

  auto* probe = app.add_subcommand("probe", "Report the all-EV dissipation bound per window");
  probe->add_option("scenario", scenario_path, "Scenario YAML file")->required();

  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of one key");
  sweep->add_option("scenario", scenario_path, "Scenario YAML file")->required();
  sweep->add_option("--param", param, "Dotted key, e.g. controller.kp")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kConfigError;
  }

  try {
    if (*oracle) {
      const auto sol = kkt_oracle(weights, total);
      std::ostringstream line;
      line.precision(12);
      for (std::size_t i = 0; i < sol.shares.size(); ++i) line << (i ? "," : "") << sol.shares[i];
      out << line.str() << "\n";
      return kOk;
    }

    const fs::path path(scenario_path);
    const auto source = path.string();
    const YAML::Node root = parse_yaml(read_text(path), source);

    if (*probe) {
      out << detail::probe_json(scenario_from_yaml(root, path.parent_path(), source)).dump() << "\n";
      return kOk;
    }

    if (*run) {
      Scenario s = scenario_from_yaml(root, path.parent_path(), source);
      if (seed) s.fleet.seed = *seed;
      for (const auto& w : scenario_warnings(s)) err << "warning: " << w << "\n";
      const auto result = run_scenario(s);
      const auto summary = summary_json(result.summary);
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_timeseries(result.records, fs::path(out_dir) / "timeseries.csv");
        std::ofstream js(fs::path(out_dir) / "summary.json");
        if (!js) throw IoError("cannot write " + (fs::path(out_dir) / "summary.json").string());
        js << summary.dump(2) << "\n";
      }
      out << summary.dump() << "\n";
      return kOk;
    }

    // sweep: scenarios are built up front so config errors surface before any run.
    std::vector<Scenario> scenarios;
    for (const auto& v : values) scenarios.push_back(detail::with_override(root, path.parent_path(), source, param, v));
    std::vector<std::future<RunSummary>> jobs;
    for (const auto& s : scenarios) {
      jobs.push_back(std::async(std::launch::async, [&s] { return run_scenario(s).summary; }));
    }
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < jobs.size(); ++k) rows.push_back({{"value", values[k]}, {"summary", summary_json(jobs[k].get())}});
    out << nlohmann::ordered_json{{"param", param}, {"runs", rows}}.dump() << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace sponge::cli
