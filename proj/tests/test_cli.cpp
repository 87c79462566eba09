#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "sponge/cli.hpp"

using namespace sponge;

namespace {

const fs::path kScenarios = SPONGE_SCENARIO_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "sponge_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string scenario(const char* name) { return (kScenarios / name).string(); }

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sponge_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, OracleTwoAgents) {
  const auto r = invoke({"oracle", "--a", "1,2", "--total", "0.9"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.6,0.3\n");
}

TEST(Cli, OracleRejectsInfeasibleTotal) {
  const auto r = invoke({"oracle", "--a", "1,2", "--total", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("total share"), std::string::npos);
}

TEST(Cli, RunZeroForecast) {
  const auto r = invoke({"run", scenario("zero_forecast.yaml")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["final_deficit_kwh"].get<double>(), 0.0);
  for (const auto& w : j["windows"]) EXPECT_EQ(w["deficit_kwh"].get<double>(), 0.0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST(Cli, RunMissingScenarioPrintsUsage) {
  const auto r = invoke({"run"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownSubcommandOrFlag) {
  EXPECT_EQ(invoke({}).code, 1);
  auto r = invoke({"simulate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  r = invoke({"run", scenario("paper_exact.yaml"), "--fast"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, HelpExitsZero) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("oracle"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitOne) {
  auto r = invoke({"run", "/nonexistent/scenario.yaml"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);
  const auto dir = temp_dir("config");
  std::ofstream(dir / "bad.yaml") << "forecast_probe_fraction: 0.5\nvehicle: {battery_kwh: -1}\n";
  r = invoke({"run", (dir / "bad.yaml").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("vehicle.battery_kwh"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, RunWarnsAboutUnreachableSaturation) {
  EXPECT_TRUE(invoke({"run", scenario("forecast_file.yaml")}).err.empty());
  const auto dir = temp_dir("warn");
  std::ofstream(dir / "weak.yaml") << "n_vehicles: 20\nforecast_probe_fraction: 0.5\ncontroller: {type: exact, kp: 0.001}\n";
  const auto r = invoke({"run", (dir / "weak.yaml").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning: controller.kp"), std::string::npos) << r.err;
  fs::remove_all(dir);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  const auto dir = temp_dir("runtime");
  std::ofstream(dir / "blocker") << "x";
  const auto r = invoke({"run", scenario("best_effort.yaml"), "--out", (dir / "blocker" / "sub").string()});
  EXPECT_EQ(r.code, 2);
  fs::remove_all(dir);
}

TEST(Cli, RunWritesOutputsAndSeedOverrideChangesThem) {
  const auto dir = temp_dir("out");
  ASSERT_EQ(invoke({"run", scenario("paper_sponge.yaml"), "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(invoke({"run", scenario("paper_sponge.yaml"), "--out", (dir / "b").string(), "--seed", "1"}).code, 0);
  ASSERT_EQ(invoke({"run", scenario("paper_sponge.yaml"), "--out", (dir / "c").string(), "--seed", "2"}).code, 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const auto a = slurp(dir / "a" / "timeseries.csv");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 1001);
  EXPECT_EQ(a, slurp(dir / "b" / "timeseries.csv"));
  EXPECT_NE(a, slurp(dir / "c" / "timeseries.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(summary["windows"].size(), 4u);
  fs::remove_all(dir);
}

TEST(Cli, ProbeReportsPerWindowBounds) {
  const auto r = invoke({"probe", scenario("paper_exact.yaml")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto s = load_scenario(scenario("paper_exact.yaml"));
  const auto windows = scenario_windows(s);
  ASSERT_EQ(j["windows"].size(), windows.size());
  for (const auto& w : windows) {
    EXPECT_DOUBLE_EQ(j["windows"][w.index]["max_dissipation_kwh"].get<double>(), feasibility_probe(s, w).kwh());
  }
}

TEST(Cli, SweepGivesOneRowPerValue) {
  const auto r = invoke({"sweep", scenario("paper_exact.yaml"), "--param", "controller.kp", "--values", "0.004,0.008,0.02"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["param"], "controller.kp");
  ASSERT_EQ(j["runs"].size(), 3u);
  EXPECT_EQ(j["runs"][1]["value"], "0.008");

  auto s = load_scenario(scenario("paper_exact.yaml"));
  s.gains.kp = 0.008;
  const auto direct = run_scenario(s).summary;
  EXPECT_DOUBLE_EQ(j["runs"][1]["summary"]["final_deficit_kwh"].get<double>(), direct.final_deficit.kwh());
  EXPECT_DOUBLE_EQ(j["runs"][1]["summary"]["windows"][2]["achieved_kwh"].get<double>(), direct.windows[2].achieved.kwh());
}

TEST(Cli, SweepValidatesEveryValueFirst) {
  const auto r = invoke({"sweep", scenario("paper_exact.yaml"), "--param", "n_vehicles", "--values", "10,-1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("n_vehicles=-1"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(invoke({"sweep", scenario("paper_exact.yaml"), "--param", "vehicle.wheels", "--values", "4"}).code, 1);
}

TEST(Cli, ExecutableExitCodes) {
  const std::string exe = SPONGE_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int raw = std::system((exe + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("oracle --a 1,2 --total 0.9"), 0);
  EXPECT_EQ(status("run"), 1);
  EXPECT_EQ(status("bogus"), 1);
  EXPECT_EQ(status("run " + scenario("zero_forecast.yaml")), 0);
}
