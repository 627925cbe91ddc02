#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "isc/config.hpp"

namespace isc {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitDegenerate = 4 };

/// No treated unit survived banding and eligibility.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each command writes into config.output_dir and finishes with a JSON report.
void cmd_estimate(const RunConfig& config, std::ostream& log);
void cmd_baselines(const RunConfig& config, std::ostream& log);
void cmd_placebo(const RunConfig& config, std::ostream& log);
void cmd_profile(const RunConfig& config, std::ostream& log);
void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_validate(const RunConfig& config, std::ostream& log);

/// Dispatches by name and maps failures to exit codes, printing the message
/// to `log`.
int run_command(const std::string& name, const RunConfig& config, std::ostream& log);

/// Loads the config file, then run_command. Config errors map to exit 2.
int run_command_file(const std::string& name, const std::string& config_path, std::ostream& log);

/// Lower-case, filesystem-safe form of a label.
std::string file_token(const std::string& s);

}  // namespace isc
