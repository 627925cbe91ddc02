#include "isc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace isc {

using nlohmann::json;

namespace {

// Reads keys of one JSON object and remembers which were used.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }
  ~Section() = default;

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), where_ + "." + key);
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("unknown key " + where_ + "." + k);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

void read_schema(Section s, RunConfig& c) {
  s.get("unit", c.schema.unit);
  s.get("period", c.schema.period);
  s.get("outcome", c.schema.outcome);
  s.get("outcomes", c.outcomes);
  s.get("covariates", c.schema.covariates);
  s.get("hours", c.schema.hours);
  s.get("treated", c.schema.treated);
  s.get("stratum", c.schema.stratum);
  s.finish();
}

// Returns whether the section sets its own seed.
bool read_simulation(Section s, SimConfig& sim) {
  const bool own_seed = s.has("seed");
  s.get("n_units", sim.n_units);
  s.get("n_subpops", sim.n_subpops);
  s.get("n_treated", sim.n_treated);
  s.get("n_steps", sim.n_steps);
  s.get("t0_step", sim.t0_step);
  s.get("seed", sim.seed);
  s.get("treatment_down_prob_shift", sim.treatment_down_prob_shift);
  s.get("treated_pre_trend", sim.treated_pre_trend);
  s.get("hours_levels", sim.hours_levels);
  if (s.has("subpop_params")) {
    const json& arr = s.raw("subpop_params");
    if (!arr.is_array()) throw ConfigError("simulation.subpop_params must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section p(arr[i], "simulation.subpop_params[" + std::to_string(i) + "]");
      SubpopParams sp;
      p.get("drift", sp.drift);
      p.get("step_sd", sp.step_sd);
      p.finish();
      sim.subpop_params.push_back(sp);
    }
  }
  s.finish();
  return own_seed;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  RunConfig c;
  Section s(root, "config");

  std::string input, delimiter = ",", output_dir = "out";
  s.get("input", input);
  c.input = input;
  s.get("delimiter", delimiter);
  if (delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
  c.delimiter = delimiter[0];
  s.get("output_dir", output_dir);
  c.output_dir = output_dir;
  s.get("threads", c.threads);
  if (s.has("seed")) {
    std::uint64_t seed = 0;
    s.get("seed", seed);
    c.seed = seed;
  }
  s.get("within_bootstrap", c.within_bootstrap);

  if (s.has("schema")) read_schema(s.sub("schema"), c);

  if (s.has("derived")) {
    const json& arr = s.raw("derived");
    if (!arr.is_array()) throw ConfigError("derived must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section d(arr[i], "derived[" + std::to_string(i) + "]");
      DerivedRatio r;
      d.get("name", r.name);
      d.get("numerator", r.numerator);
      d.get("denominator", r.denominator);
      d.finish();
      c.derived.push_back(r);
    }
  }

  if (s.has("treatment")) {
    Section t = s.sub("treatment");
    t.get("band_edges", c.treatment.band_edges);
    t.get("min_pre_periods", c.treatment.min_pre_periods);
    t.get("min_consecutive_treated", c.treatment.min_consecutive_treated);
    t.finish();
  }

  if (s.has("distance")) {
    Section d = s.sub("distance");
    std::string metric = metric_name(c.distance.metric);
    d.get("metric", metric);
    try {
      c.distance.metric = parse_metric(metric);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    d.get("p", c.distance.p);
    d.get("k", c.distance.k);
    d.get("standardize", c.distance.standardize);
    d.finish();
  }

  if (s.has("solver")) {
    Section d = s.sub("solver");
    d.get("tol", c.solver.tol);
    d.get("max_iter", c.solver.max_iter);
    d.finish();
  }

  if (s.has("bootstrap")) {
    Section b = s.sub("bootstrap");
    b.get("replicates", c.bootstrap.replicates);
    b.get("level", c.bootstrap.level);
    b.finish();
  }

  if (s.has("window")) {
    Section w = s.sub("window");
    w.get("pre_max", c.window.pre_max);
    w.get("post_max", c.window.post_max);
    w.get("min_pre_periods", c.window.min_pre_periods);
    w.get("match_stratum", c.window.match_stratum);
    w.finish();
  }

  if (s.has("subgroups")) {
    const json& arr = s.raw("subgroups");
    if (!arr.is_array()) throw ConfigError("subgroups must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section g(arr[i], "subgroups[" + std::to_string(i) + "]");
      Subgroup sg;
      g.get("name", sg.name);
      g.get("column", sg.column);
      g.get("values", sg.values);
      g.finish();
      c.subgroups.push_back(sg);
    }
  }

  if (s.has("deflator")) {
    Section d = s.sub("deflator");
    DeflatorConfig dc;
    d.get("column", dc.column);
    d.get("base_period", dc.base_period);
    d.finish();
    c.deflator = dc;
  }

  if (s.has("trim")) {
    Section d = s.sub("trim");
    TrimConfig tc;
    d.get("lower", tc.lower);
    d.get("upper", tc.upper);
    d.finish();
    c.trim = tc;
  }

  if (s.has("methods")) {
    std::vector<std::string> names;
    s.get("methods", names);
    c.methods.clear();
    for (const auto& n : names) {
      try {
        c.methods.push_back(parse_method(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  if (s.has("psm")) {
    Section d = s.sub("psm");
    d.get("caliper", c.psm.caliper);
    d.finish();
  }

  if (s.has("sdid")) {
    Section d = s.sub("sdid");
    d.get("pre", c.sdid.pre);
    d.get("post", c.sdid.post);
    d.finish();
  }

  if (s.has("profile")) {
    Section d = s.sub("profile");
    d.get("k_grid", c.profile.k_grid);
    d.get("reps", c.profile.reps);
    d.get("parallel", c.profile.parallel);
    d.finish();
  }

  if (s.has("simulation")) {
    SimConfig sim;
    if (!read_simulation(s.sub("simulation"), sim) && c.seed) sim.seed = *c.seed;
    c.simulation = sim;
  }

  s.finish();
  if (c.outcomes.empty()) c.outcomes.push_back(c.schema.outcome);
  if (c.subgroups.empty()) c.subgroups.push_back(Subgroup{});
  c.psm.post_max = c.window.post_max;
  c.sdid.solver = c.solver;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void RunConfig::validate() const {
  try {
    treatment.validate();
    distance.validate();
    bootstrap.validate();
    if (simulation) simulation->validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (window.pre_max < 1 || window.post_max < 0) throw ConfigError("window needs pre_max >= 1 and post_max >= 0");
  if (window.min_pre_periods < 1) throw ConfigError("window.min_pre_periods must be >= 1");
  if (solver.tol <= 0.0 || solver.max_iter < 1) throw ConfigError("solver needs tol > 0 and max_iter >= 1");
  if (!(psm.caliper > 0.0)) throw ConfigError("psm.caliper must be > 0");
  if (sdid.pre < 1 || sdid.post < 1) throw ConfigError("sdid.pre and sdid.post must be >= 1");
  if (profile.reps < 1 || profile.k_grid.empty()) throw ConfigError("profile needs a k_grid and reps >= 1");
  for (int k : profile.k_grid)
    if (k < 1) throw ConfigError("profile.k_grid entries must be >= 1");
  if (trim && !(trim->lower >= 0.0 && trim->lower < trim->upper && trim->upper <= 1.0))
    throw ConfigError("trim needs 0 <= lower < upper <= 1");
  for (const auto& g : subgroups)
    if (!g.column.empty() && g.values.empty()) throw ConfigError("subgroup '" + g.name + "' has a column but no values");
  std::set<std::string> names;
  for (const auto& g : subgroups)
    if (!names.insert(g.name).second) throw ConfigError("duplicate subgroup name '" + g.name + "'");
}

std::uint64_t RunConfig::require_seed(const std::string& command) const {
  if (!seed) throw ConfigError(command + " is stochastic and needs a seed");
  return *seed;
}

}  // namespace isc
