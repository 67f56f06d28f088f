#include "dpimap/cli/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace dpimap;

int emit(const std::string& text, const std::string& output) {
  if (output.empty()) {
    std::cout << text;
    return cli::kExitOk;
  }
  std::ofstream out(output, std::ios::binary);
  if (!out || !(out << text)) {
    std::cerr << "error: cannot write " << output << "\n";
    return cli::kExitInputError;
  }
  return cli::kExitOk;
}

cli::RunSpec load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto spec = cli::load_run_spec(path);
  if (seed) spec.config.seed = *seed;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DPI-Mapping swarm simulator"};
  app.require_subcommand(1);

  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string suite = "all";

  auto* run = app.add_subcommand("run", "Run one simulation and write one CSV row");
  run->add_option("--config", config_path, "Configuration file")->required();
  run->add_option("--seed", seed, "Override the configured seed");
  run->add_option("--output", output, "CSV output path (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Run the configured sweep axes and write run and aggregate rows");
  sweep->add_option("--config", config_path, "Configuration file")->required();
  sweep->add_option("--seed", seed, "Override the base seed");
  sweep->add_option("--output", output, "CSV output path (default stdout)");
  sweep->add_option("--jobs", jobs, "Parallel simulations")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Run oracle suites and report each check");
  validate->add_option("suite", suite, "matcher, filter or all")->check(CLI::IsMember({"matcher", "filter", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitInputError;
  }

  try {
    std::ostringstream text;
    if (*run) {
      cli::cmd_run(load(config_path, seed), text);
      return emit(text.str(), output);
    }
    if (*sweep) {
      cli::cmd_sweep(load(config_path, seed), jobs, text);
      return emit(text.str(), output);
    }
    const int code = cli::cmd_validate(suite, text);
    std::cout << text.str();
    return code;
  } catch (const sim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitInputError;
  } catch (const InvalidInput& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return cli::kExitInputError;
  }
}
