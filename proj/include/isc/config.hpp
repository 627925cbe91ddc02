#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isc/baselines.hpp"
#include "isc/donor_selection.hpp"
#include "isc/inference.hpp"
#include "isc/io.hpp"
#include "isc/panel.hpp"
#include "isc/simulation.hpp"

namespace isc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Subgroup {
  std::string name = "all";
  std::string column;  // empty: no filter
  std::vector<std::string> values;
};

struct DerivedRatio {
  std::string name;
  std::string numerator;
  std::string denominator;
};

struct DeflatorConfig {
  std::string column;
  int base_period = 0;
};

struct TrimConfig {
  double lower = 0.01;
  double upper = 0.99;
};

struct ProfileConfig {
  std::vector<int> k_grid{1, 2, 5, 10, 20, 50, 100, 200, 500};
  int reps = 1;
  bool parallel = false;
};

/// Everything a command needs. Data come from `input` or, when absent, from
/// the `simulation` section.
struct RunConfig {
  std::filesystem::path input;
  char delimiter = ',';
  io::Schema schema;
  std::vector<std::string> outcomes;  // defaults to schema.outcome
  std::vector<DerivedRatio> derived;
  TreatmentSpec treatment;
  DistanceConfig distance;
  SolverOptions solver;
  BootstrapConfig bootstrap;
  bool within_bootstrap = false;
  AlignOptions window;
  std::vector<Subgroup> subgroups;  // defaults to one unfiltered group
  std::optional<DeflatorConfig> deflator;
  std::optional<TrimConfig> trim;
  std::filesystem::path output_dir = "out";
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::vector<Method> methods{Method::PSM, Method::DID, Method::SDID};
  PsmOptions psm;
  SdidOptions sdid;
  ProfileConfig profile;
  std::optional<SimConfig> simulation;

  /// Throws ConfigError for inconsistent settings.
  void validate() const;
  std::uint64_t require_seed(const std::string& command) const;
};

/// Parses a JSON document. Unknown keys are rejected so typos surface.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace isc
