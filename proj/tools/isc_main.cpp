#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "isc/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Individual synthetic control estimation"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  int threads = 0;
  std::uint64_t seed = 0;

  const char* names[][2] = {
      {"estimate", "ISC effects with bootstrap intervals per band and subgroup"},
      {"baselines", "PSM, DID and SDID comparison estimates"},
      {"placebo", "placebo series on each case's donors"},
      {"profile", "RMSPE, runtime and donor frequency over a K grid"},
      {"simulate", "write a random-walk panel"},
      {"validate", "check config and data, report eligible counts"},
  };
  for (const auto& [name, help] : names) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_dir, "override output_dir");
    sub->add_option("-j,--threads", threads, "override threads")->check(CLI::PositiveNumber);
    sub->add_option("-s,--seed", seed, "override seed");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();

  isc::RunConfig config;
  try {
    config = isc::load_config(config_path);
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (threads > 0) config.threads = threads;
    if (sub->count("--seed")) {
      config.seed = seed;
      if (config.simulation) config.simulation->seed = seed;
    }
  } catch (const isc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return isc::kExitConfig;
  }
  return isc::run_command(command, config, std::cerr);
}
