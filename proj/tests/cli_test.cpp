#include "dpimap/cli/commands.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace dpimap::cli {
namespace {

namespace fs = std::filesystem;

EnvLookup env_of(std::map<std::string, std::string> vars) {
  auto shared = std::make_shared<std::map<std::string, std::string>>(std::move(vars));
  return [shared](const std::string& name) -> const char* {
    const auto it = shared->find(name);
    return it == shared->end() ? nullptr : it->second.c_str();
  };
}

const EnvLookup kNoEnv = env_of({});

RunSpec parse(const std::string& text, const EnvLookup& env = kNoEnv) {
  std::istringstream in(text);
  return parse_run_spec(in, env);
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

// ---- configuration

TEST(ParseRunSpecTest, TopLevelAndSections) {
  const auto s = parse(
      "# comment\n"
      "num_uavs = 80\n"
      "protocol = feedback\n"
      "region = 300, 200, 100\n"
      "[sim]\n"
      "v_max = 40\n"
      "bim_exchange = off\n"
      "mobility = anchored\n"
      "[sweep]\n"
      "num_uavs = 40, 140\n"
      "protocol = dpi,broadcast\n"
      "repetitions = 3\n");
  EXPECT_EQ(s.config.num_uavs, 80);
  EXPECT_EQ(s.config.protocol, Protocol::kFeedback);
  EXPECT_EQ(s.config.region, Vec3(300, 200, 100));
  EXPECT_EQ(s.config.v_max, 40.0);
  EXPECT_FALSE(s.config.bim_exchange);
  EXPECT_EQ(s.config.mobility, sim::Mobility::kAnchored);
  EXPECT_EQ(s.num_uavs, (std::vector<int>{40, 140}));
  EXPECT_EQ(s.protocols, (std::vector<Protocol>{Protocol::kDpi, Protocol::kBroadcast}));
  EXPECT_TRUE(s.v_max.empty());
  EXPECT_EQ(s.repetitions, 3);
}

TEST(ParseRunSpecTest, MissingNumUavsNamesTheKey) {
  try {
    parse("duration = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.fields(), std::vector<std::string>{"num_uavs"});
    EXPECT_NE(std::string(e.what()).find("num_uavs"), std::string::npos);
  }
}

TEST(ParseRunSpecTest, UnknownKeysAndSectionsAreErrors) {
  try {
    parse("num_uavs = 4\nnum_uav = 3\n[sweep]\nreps = 2\n[extra]\nx = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.fields(), (std::vector<std::string>{"num_uav", "sweep.reps", "[extra]"}));
  }
}

TEST(ParseRunSpecTest, BadValuesNameTheField) {
  for (const std::string bad : {"v_max = fast", "protocol = carrier", "region = 1,2", "seed = -4", "bim_exchange = maybe"}) {
    try {
      parse("num_uavs = 4\n" + bad + "\n");
      FAIL() << bad;
    } catch (const ConfigError& e) {
      ASSERT_EQ(e.fields().size(), 1u);
      EXPECT_EQ(bad.rfind(e.fields()[0], 0), 0u) << bad;
    }
  }
}

TEST(ParseRunSpecTest, ValidationFailureListsFields) {
  try {
    parse("num_uavs = 4\nv_min = 10\nv_max = 5\nec_rate = 0\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.fields(), (std::vector<std::string>{"v_max", "ec_rate"}));
  }
}

TEST(ParseRunSpecTest, EnvironmentOverridesFile) {
  const auto s = parse("num_uavs = 40\nv_max = 20\n[sweep]\nrepetitions = 2\n",
                       env_of({{"DPIMAP_V_MAX", "60"}, {"DPIMAP_PROTOCOL", "broadcast"},
                               {"DPIMAP_SWEEP_REPETITIONS", "7"}}));
  EXPECT_EQ(s.config.v_max, 60.0);
  EXPECT_EQ(s.config.protocol, Protocol::kBroadcast);
  EXPECT_EQ(s.repetitions, 7);
}

TEST(ParseRunSpecTest, EnvironmentCanSupplyNumUavs) {
  EXPECT_EQ(parse("", env_of({{"DPIMAP_NUM_UAVS", "12"}})).config.num_uavs, 12);
}

// ---- CSV

TEST(CsvTest, NumberFormatting) {
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(0.1234567), "0.123457");
  EXPECT_EQ(format_number(1234567.0), "1.23457e+06");
  EXPECT_EQ(format_number(sim::kNaN), "");
}

TEST(CsvTest, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(quote_field("plain"), "plain");
  EXPECT_EQ(quote_field("a,b"), "\"a,b\"");
  EXPECT_EQ(quote_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(quote_field("two\nlines"), "\"two\nlines\"");
  std::ostringstream os;
  write_row(os, {"x", "", "y,z"});
  EXPECT_EQ(os.str(), "x,,\"y,z\"\n");
}

// ---- commands

TEST(CmdRunTest, HeaderAndOneRow) {
  auto s = parse("num_uavs = 20\nduration = 3\nseed = 5\n");
  std::ostringstream os;
  cmd_run(s, os);
  const auto rows = read_csv(os.str());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"seed", "protocol", "num_uavs", "v_max", "latency_mean_ms",
                                               "latency_p90_ms", "hit_rate", "disturbance_rate", "mapping_accuracy",
                                               "ad_range_p90_m", "vd_range_p90_m", "fused_range_p90_m"}));
  ASSERT_EQ(rows[1].size(), rows[0].size());
  EXPECT_EQ(rows[1][0], "5");
  EXPECT_EQ(rows[1][1], "dpi");
  EXPECT_EQ(rows[1][2], "20");
  EXPECT_EQ(rows[1][3], "20");
}

TEST(CmdSweepTest, CountsRunAndAggregateRows) {
  auto s = parse(
      "num_uavs = 10\nduration = 2.5\n[sweep]\nnum_uavs = 10, 15, 20\nprotocol = broadcast, feedback, dpi\n"
      "repetitions = 5\n");
  std::ostringstream os;
  cmd_sweep(s, 2, os);
  const auto rows = read_csv(os.str());
  ASSERT_EQ(rows.size(), 1u + 45u + 9u);
  EXPECT_EQ(rows[0], sweep_columns());
  int runs = 0, aggregates = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), rows[0].size()) << i;
    runs += rows[i][0] == "run";
    aggregates += rows[i][0] == "aggregate";
  }
  EXPECT_EQ(runs, 45);
  EXPECT_EQ(aggregates, 9);
}

TEST(CmdSweepTest, AggregateIsMeanOfMembers) {
  auto s = parse("num_uavs = 30\nduration = 3\nprotocol = broadcast\n[sweep]\nrepetitions = 4\n");
  std::ostringstream os;
  cmd_sweep(s, 1, os);
  const auto rows = read_csv(os.str());
  ASSERT_EQ(rows.size(), 6u);
  const std::size_t col = 5;  // latency_mean_ms
  ASSERT_EQ(rows[0][col], "latency_mean_ms");
  double sum = 0.0, sq = 0.0;
  for (int i = 1; i <= 4; ++i) {
    const double v = std::stod(rows[static_cast<std::size_t>(i)][col]);
    sum += v;
    sq += v * v;
  }
  const double m = sum / 4;
  EXPECT_NEAR(std::stod(rows[5][col]), m, 1e-5 * m);
  const double sd = std::sqrt((sq - 4 * m * m) / 3);
  const std::size_t ci = col + metric_columns().size();
  ASSERT_EQ(rows[0][ci], "latency_mean_ms_ci90");
  EXPECT_NEAR(std::stod(rows[5][ci]), 1.6448536 * sd / 2.0, 1e-3 * sd);
  EXPECT_EQ(rows[1][1], "1");
  EXPECT_EQ(rows[4][1], "4");
  EXPECT_EQ(rows[5][1], "");
}

TEST(CmdSweepTest, ProtocolsShareSeedsAcrossCells) {
  auto s = parse("num_uavs = 10\n[sweep]\nnum_uavs = 10, 20\nprotocol = broadcast, dpi\nrepetitions = 2\n");
  s.config.seed = 100;
  const auto jobs = expand_sweep(s);
  ASSERT_EQ(jobs.size(), 8u);
  const std::vector<std::uint64_t> seeds = {100, 101, 100, 101, 102, 103, 102, 103};
  for (std::size_t i = 0; i < jobs.size(); ++i) EXPECT_EQ(jobs[i].config.seed, seeds[i]) << i;
  EXPECT_EQ(jobs[2].config.protocol, Protocol::kDpi);
  EXPECT_EQ(jobs[4].config.num_uavs, 20);
  EXPECT_EQ(jobs[7].cell, 3u);
}

TEST(CmdSweepTest, EmptyAxesBehaveAsRun) {
  auto s = parse("num_uavs = 15\nduration = 3\n");
  std::ostringstream a, b;
  cmd_run(s, a);
  cmd_sweep(s, 4, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(CmdSweepTest, JobCapRefusalReportsCount) {
  auto s = parse("num_uavs = 5\n[sweep]\nnum_uavs = 5, 6\nrepetitions = 6000\n");
  try {
    expand_sweep(s);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("12000"), std::string::npos);
  }
}

TEST(CmdSweepTest, ParallelOutputMatchesSerial) {
  auto s = parse("num_uavs = 20\nduration = 3\n[sweep]\nprotocol = broadcast, feedback, dpi\nrepetitions = 2\n");
  std::ostringstream a, b;
  cmd_sweep(s, 1, a);
  cmd_sweep(s, 3, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(CmdValidateTest, SuitesPassAndUnknownSuiteThrows) {
  std::ostringstream os;
  EXPECT_EQ(cmd_validate("matcher", os), kExitOk);
  EXPECT_NE(os.str().find("PASS matcher: optimality bound instances"), std::string::npos);
  EXPECT_EQ(os.str().find("FAIL"), std::string::npos);
  EXPECT_THROW(cmd_validate("everything", os), InvalidInput);
}

// ---- binary

class CliBinaryTest : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("dpimap_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  int invoke(const std::string& args) {
    const std::string cmd = std::string(DPIMAP_CLI_PATH) + " " + args + " > " + (dir / "stdout").string() +
                            " 2> " + (dir / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

TEST_F(CliBinaryTest, RunWritesIdenticalFiles) {
  const auto cfg = write("a.ini", "num_uavs = 20\nduration = 3\n");
  const auto out1 = dir / "1.csv";
  const auto out2 = dir / "2.csv";
  ASSERT_EQ(invoke("run --config " + cfg.string() + " --seed 4 --output " + out1.string()), 0);
  ASSERT_EQ(invoke("run --config " + cfg.string() + " --seed 4 --output " + out2.string()), 0);
  EXPECT_EQ(slurp(out1), slurp(out2));
  EXPECT_EQ(read_csv(slurp(out1)).size(), 2u);
  EXPECT_EQ(read_csv(slurp(out1))[1][0], "4");
}

TEST_F(CliBinaryTest, MissingNumUavsExitsTwo) {
  const auto cfg = write("a.ini", "duration = 3\n");
  EXPECT_EQ(invoke("run --config " + cfg.string()), 2);
  EXPECT_NE(slurp(dir / "stderr").find("num_uavs"), std::string::npos);
}

TEST_F(CliBinaryTest, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke(""), 2);
  EXPECT_EQ(invoke("run"), 2);
  EXPECT_EQ(invoke("validate bogus"), 2);
  EXPECT_EQ(invoke("run --config " + (dir / "missing.ini").string()), 2);
}

TEST_F(CliBinaryTest, ValidateMatcherExitsZero) {
  EXPECT_EQ(invoke("validate matcher"), 0);
  EXPECT_NE(slurp(dir / "stdout").find("PASS"), std::string::npos);
}

}  // namespace
}  // namespace dpimap::cli
