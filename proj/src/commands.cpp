#include "isc/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <ostream>

#include "json.hpp"

#include "isc/baselines.hpp"
#include "isc/pipeline.hpp"
#include "isc/rng.hpp"

namespace isc {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string file_token(const std::string& s) {
  std::string out;
  for (char ch : s) {
    const auto u = static_cast<unsigned char>(ch);
    out += std::isalnum(u) || ch == '-' || ch == '.' ? static_cast<char>(std::tolower(u)) : '_';
  }
  return out.empty() ? "_" : out;
}

namespace {

// Raw rows plus the schema that reads them.
struct Source {
  io::Table table;
  io::Schema schema;
  std::vector<std::string> outcomes;
  bool simulated = false;
};

Source load_source(const RunConfig& c) {
  Source s;
  if (!c.input.empty()) {
    s.table = io::read_table(c.input, c.delimiter);
    s.schema = c.schema;
    s.outcomes = c.outcomes;
  } else {
    if (!c.simulation) throw ConfigError("config needs an input path or a simulation section");
    const PanelDataset ds = generate_population(*c.simulation);
    s.table = io::panel_table(ds);
    s.schema = io::panel_table_schema(ds);
    s.outcomes = {s.schema.outcome};
    s.simulated = true;
  }
  return s;
}

PanelDataset prepare(const RunConfig& c, const Source& src, const std::string& outcome, const Subgroup& group) {
  io::Table t = src.table;
  for (const auto& d : c.derived) t = io::add_ratio_column(t, d.name, d.numerator, d.denominator);
  if (!group.column.empty()) t = io::filter_rows(t, group.column, group.values);
  io::Schema schema = src.schema;
  schema.outcome = outcome;
  PanelDataset ds = io::load_panel(t, schema);
  if (c.deflator) ds = apply_deflator(ds, io::deflator_index(t, schema.period, c.deflator->column), c.deflator->base_period);
  if (c.trim) ds = trim_outcomes(ds, c.trim->lower, c.trim->upper);
  return ds;
}

IscOptions isc_options(const RunConfig& c) {
  IscOptions o;
  o.align = c.window;
  o.distance = c.distance;
  o.solver = c.solver;
  o.threads = c.threads;
  return o;
}

BootstrapConfig bootstrap_for(const RunConfig& c, std::uint64_t seed, const std::string& tag) {
  BootstrapConfig b = c.bootstrap;
  b.seed = splitmix64(seed ^ fnv1a(tag));
  return b;
}

// Eligible treated units of one band, in dataset order.
std::vector<UnitId> band_members(const PanelDataset& ds, const std::vector<UnitId>& eligible, int band) {
  std::vector<UnitId> out;
  for (const auto& id : eligible)
    if (ds.unit(id).band == band) out.push_back(id);
  return out;
}

struct Banded {
  PanelDataset dataset;
  std::vector<UnitId> eligible;
  ojson summary;
};

Banded band_and_filter(const RunConfig& c, PanelDataset ds, const std::string& outcome, const Subgroup& group) {
  std::size_t n_treated = 0;
  for (const auto& u : ds.units()) n_treated += u.treated() ? 1 : 0;
  BandAssignment ba = assign_bands(ds, c.treatment);
  Banded b{std::move(ba.dataset), {}, ojson::object()};
  b.eligible = filter_eligible(b.dataset, c.treatment);
  b.summary["outcome"] = outcome;
  b.summary["subgroup"] = group.name;
  b.summary["n_units"] = ds.n_units();
  b.summary["n_observations"] = ds.n_observations();
  b.summary["n_treated"] = n_treated;
  b.summary["dropped_missing_hours"] = ba.dropped;
  b.summary["n_eligible"] = b.eligible.size();
  return b;
}

fs::path out_file(const RunConfig& c, const std::string& kind, const std::string& outcome, const std::string& band,
                  const std::string& subgroup) {
  return c.output_dir / (file_token(kind) + "_" + file_token(outcome) + "_" + file_token(band) + "_" + file_token(subgroup) + ".csv");
}

ojson failures_json(const std::vector<CaseFailure>& failures) {
  ojson counts = {{"empty_donor_pool", 0}, {"alignment", 0}, {"nonconverged", 0}};
  ojson list = ojson::array();
  for (const auto& f : failures) {
    counts[failure_name(f.reason)] = counts[failure_name(f.reason)].get<int>() + 1;
    list.push_back({{"unit_id", f.treated_id}, {"reason", failure_name(f.reason)}, {"message", f.message}});
  }
  return {{"counts", counts}, {"cases", list}};
}

bool has_tested_pre(const EffectSeries& s, const std::vector<int>& exclude) {
  return std::any_of(s.relative_times.begin(), s.relative_times.end(), [&](int t) {
    return t < 0 && std::find(exclude.begin(), exclude.end(), t) == exclude.end();
  });
}

ojson pretrend_json(const PretrendResult& p) {
  return {{"statistic", p.statistic}, {"df", p.df}, {"p_value", p.p_value}, {"singular", p.singular}, {"tested_times", p.tested_times}};
}

void write_report(const RunConfig& c, const std::string& name, const ojson& report) {
  fs::create_directories(c.output_dir);
  std::ofstream out(c.output_dir / name, std::ios::binary);
  if (!out) throw DataError("cannot write " + (c.output_dir / name).string());
  out << report.dump(2) << '\n';
}

ojson report_header(const RunConfig& c, const std::string& command, const Source& src) {
  ojson r;
  r["command"] = command;
  if (c.seed) r["seed"] = *c.seed;
  r["input"] = src.simulated ? "simulation" : c.input.string();
  return r;
}

}  // namespace

void cmd_estimate(const RunConfig& c, std::ostream& log) {
  const std::uint64_t seed = c.require_seed("estimate");
  const Source src = load_source(c);
  const IscOptions opts = isc_options(c);
  ojson report = report_header(c, "estimate", src);
  report["groups"] = ojson::array();
  std::size_t total_eligible = 0;

  for (const auto& outcome : src.outcomes) {
    for (const auto& group : c.subgroups) {
      Banded b = band_and_filter(c, prepare(c, src, outcome, group), outcome, group);
      total_eligible += b.eligible.size();
      ojson bands = ojson::array();
      std::vector<io::BandColumn> columns;
      for (int band = 0; band < static_cast<int>(c.treatment.n_bands()); ++band) {
        const std::string short_label = c.treatment.band_short_label(band);
        io::BandColumn col{short_label + "-Intensity", std::nullopt, {}, std::nan("")};
        const auto ids = band_members(b.dataset, b.eligible, band);
        ojson br{{"band", c.treatment.band_label(band)}, {"n_eligible", ids.size()}};
        if (ids.empty()) {
          br["n_estimated"] = 0;
          bands.push_back(br);
          columns.push_back(col);
          continue;
        }
        log << "estimate " << outcome << " / " << group.name << " / " << short_label << ": " << ids.size() << " cases\n";
        const IscRun run = run_isc(b.dataset, ids, opts);
        br["n_estimated"] = run.cases.size();
        br["failures"] = failures_json(run.failures);
        if (!run.cases.empty()) {
          double lo = run.cases.front().fit.rmspe_pre, hi = lo;
          for (const auto& cr : run.cases) {
            lo = std::min(lo, cr.fit.rmspe_pre);
            hi = std::max(hi, cr.fit.rmspe_pre);
          }
          br["rmspe"] = {{"mean", run.mean_rmspe()}, {"min", lo}, {"max", hi}};
          const std::string tag = outcome + "|" + group.name + "|" + short_label;
          const BootstrapResult boot = bootstrap_ci(run.effects(), bootstrap_for(c, seed, "isc|" + tag), Method::ISC);
          br["ci_defined"] = boot.ci_defined;
          if (boot.ci_defined && has_tested_pre(boot.series, {}))
            br["pretrend"] = pretrend_json(pretrend_test(boot.series, boot.replicates));
          io::write_table(out_file(c, "isc", outcome, short_label, group.name), io::effect_series_table(boot.series));
          io::write_table(out_file(c, "weights", outcome, short_label, group.name), io::weights_table(run.cases));
          io::write_table(out_file(c, "unit_effects", outcome, short_label, group.name), io::unit_effects_table(run.effects()));
          col.series = boot.series;
          col.se = boot.se;
          col.rmspe = run.mean_rmspe();
          if (c.within_bootstrap) {
            const WithinRun within = run_within_bootstrap(b.dataset, ids, opts, bootstrap_for(c, seed, "within|" + tag));
            const EffectSeries nested = nested_bootstrap_ci(within.cases, bootstrap_for(c, seed, "nested|" + tag));
            io::write_table(out_file(c, "isc_nested", outcome, short_label, group.name), io::effect_series_table(nested));
            int nonconv = 0;
            for (const auto& w : within.cases) nonconv += w.nonconverged;
            br["within_bootstrap"] = {{"n_cases", within.cases.size()}, {"nonconverged_solves", nonconv}};
          }
        }
        bands.push_back(br);
        columns.push_back(col);
      }
      b.summary["bands"] = bands;
      io::write_table(c.output_dir / ("band_summary_" + file_token(outcome) + "_" + file_token(group.name) + ".csv"),
                      io::band_summary_table(columns, c.window.pre_max, c.window.post_max));
      report["groups"].push_back(b.summary);
    }
  }
  write_report(c, "run_report.json", report);
  if (total_eligible == 0) throw DegenerateError("no eligible treated units");
}

void cmd_baselines(const RunConfig& c, std::ostream& log) {
  const std::uint64_t seed = c.require_seed("baselines");
  const Source src = load_source(c);
  ojson report = report_header(c, "baselines", src);
  report["groups"] = ojson::array();
  std::size_t total_eligible = 0;

  for (const auto& outcome : src.outcomes) {
    for (const auto& group : c.subgroups) {
      Banded b = band_and_filter(c, prepare(c, src, outcome, group), outcome, group);
      total_eligible += b.eligible.size();
      ojson methods = ojson::object();
      for (Method m : c.methods) {
        const std::string mname = method_name(m);
        ojson bands = ojson::array();
        for (int band = 0; band < static_cast<int>(c.treatment.n_bands()); ++band) {
          const std::string short_label = c.treatment.band_short_label(band);
          const auto ids = band_members(b.dataset, b.eligible, band);
          ojson br{{"band", c.treatment.band_label(band)}, {"n_eligible", ids.size()}};
          if (ids.empty()) {
            bands.push_back(br);
            continue;
          }
          log << "baselines " << mname << " " << outcome << " / " << group.name << " / " << short_label << "\n";
          std::vector<UnitEffect> effects;
          if (m == Method::PSM) {
            const PsmResult r = psm_att(b.dataset, ids, c.psm);
            effects = r.effects;
            br["psm"] = {{"n_treated", r.report.n_treated},
                         {"n_matched", r.report.n_matched},
                         {"n_off_support", r.report.n_off_support},
                         {"n_unmatched_caliper", r.report.n_unmatched_caliper},
                         {"n_missing_covariates", r.report.n_missing_covariates},
                         {"converged", r.report.converged},
                         {"separation", r.report.separation}};
          } else if (m == Method::DID) {
            const DidResult r = did_att(b.dataset, ids, c.window);
            effects = r.effects;
            br["did"] = {{"n_missing_base", r.n_missing_base}};
          } else if (m == Method::SDID) {
            const SdidResult r = sdid_att(b.dataset, ids, c.sdid);
            effects = r.effects;
            ojson cohorts = ojson::array();
            for (const auto& [t0, n] : r.cohorts) cohorts.push_back({{"t0", t0}, {"n_treated", n}});
            br["sdid"] = {{"cohorts", cohorts}, {"n_dropped", r.n_dropped}, {"all_converged", r.all_converged}};
          } else {
            throw ConfigError("baselines accepts PSM, DID and SDID, not " + mname);
          }
          br["n_estimated"] = effects.size();
          const std::string tag = mname + "|" + outcome + "|" + group.name + "|" + short_label;
          const BootstrapResult boot = bootstrap_ci(effects, bootstrap_for(c, seed, tag), m);
          br["ci_defined"] = boot.ci_defined;
          const std::vector<int> exclude = m == Method::DID ? std::vector<int>{-1} : std::vector<int>{};
          if (boot.ci_defined && has_tested_pre(boot.series, exclude))
            br["pretrend"] = pretrend_json(pretrend_test(boot.series, boot.replicates, exclude));
          io::write_table(out_file(c, mname, outcome, short_label, group.name), io::effect_series_table(boot.series));
          bands.push_back(br);
        }
        methods[mname] = bands;
      }
      b.summary["methods"] = methods;
      report["groups"].push_back(b.summary);
    }
  }
  write_report(c, "baselines_report.json", report);
  if (total_eligible == 0) throw DegenerateError("no eligible treated units");
}

void cmd_placebo(const RunConfig& c, std::ostream& log) {
  const std::uint64_t seed = c.require_seed("placebo");
  const Source src = load_source(c);
  const IscOptions opts = isc_options(c);
  ojson report = report_header(c, "placebo", src);
  report["groups"] = ojson::array();
  std::size_t total_eligible = 0;

  for (const auto& outcome : src.outcomes) {
    for (const auto& group : c.subgroups) {
      Banded b = band_and_filter(c, prepare(c, src, outcome, group), outcome, group);
      total_eligible += b.eligible.size();
      ojson bands = ojson::array();
      for (int band = 0; band < static_cast<int>(c.treatment.n_bands()); ++band) {
        const std::string short_label = c.treatment.band_short_label(band);
        const auto ids = band_members(b.dataset, b.eligible, band);
        ojson br{{"band", c.treatment.band_label(band)}, {"n_eligible", ids.size()}};
        if (ids.empty()) {
          bands.push_back(br);
          continue;
        }
        log << "placebo " << outcome << " / " << group.name << " / " << short_label << "\n";
        const PlaceboRun run = run_placebo(b.dataset, ids, opts);
        const std::string tag = "placebo|" + outcome + "|" + group.name + "|" + short_label;
        const BootstrapResult boot = placebo_test(run.cases, bootstrap_for(c, seed, tag));
        br["n_estimated"] = run.cases.size();
        br["n_solves"] = run.n_solves;
        br["failures"] = failures_json(run.failures);
        br["ci_defined"] = boot.ci_defined;
        io::write_table(out_file(c, "placebo", outcome, short_label, group.name), io::effect_series_table(boot.series));
        bands.push_back(br);
      }
      b.summary["bands"] = bands;
      report["groups"].push_back(b.summary);
    }
  }
  write_report(c, "placebo_report.json", report);
  if (total_eligible == 0) throw DegenerateError("no eligible treated units");
}

void cmd_profile(const RunConfig& c, std::ostream& log) {
  const Source src = load_source(c);
  PanelDataset ds = prepare(c, src, src.outcomes.front(), c.subgroups.front());
  ds = assign_bands(ds, c.treatment).dataset;
  IscOptions opts = isc_options(c);
  opts.threads = c.profile.parallel ? c.threads : 1;
  const ProfileResult p = profile_k_grid(ds, c.profile.k_grid, c.profile.reps, opts);
  ojson report = report_header(c, "profile", src);
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < p.k_grid.size(); ++i) {
    if (p.n_clamped[i] > 0)
      log << "warning: K=" << p.k_grid[i] << " exceeds the control pool for " << p.n_clamped[i] << " cases; clamped\n";
    ojson hist = ojson::object();
    for (const auto& [n, units] : frequency_histogram(p.donor_frequency[i])) hist[std::to_string(n)] = units;
    rows.push_back({{"k", p.k_grid[i]},
                    {"mean_rmspe", p.mean_rmspe[i]},
                    {"n_clamped", p.n_clamped[i]},
                    {"frequency_mode", frequency_mode(p.donor_frequency[i])},
                    {"frequency_histogram", hist}});
  }
  report["reps"] = c.profile.reps;
  report["grid"] = rows;
  io::write_table(c.output_dir / "profile.csv", io::profile_table(p));
  io::write_table(c.output_dir / "donor_frequency.csv", io::donor_frequency_table(p));
  write_report(c, "profile_report.json", report);
}

void cmd_simulate(const RunConfig& c, std::ostream& log) {
  const std::uint64_t seed = c.require_seed("simulate");
  SimConfig sim = c.simulation.value_or(SimConfig{});
  if (!c.simulation) sim.seed = seed;
  const PanelDataset ds = generate_population(sim);
  io::write_table(c.output_dir / "simulated_panel.csv", io::panel_table(ds));
  ojson report;
  report["command"] = "simulate";
  report["seed"] = seed;
  report["simulation_seed"] = sim.seed;
  report["n_units"] = ds.n_units();
  report["n_observations"] = ds.n_observations();
  report["n_treated"] = sim.n_treated;
  write_report(c, "simulate_report.json", report);
  log << "simulate: wrote " << ds.n_observations() << " rows\n";
}

void cmd_validate(const RunConfig& c, std::ostream& log) {
  const Source src = load_source(c);
  ojson report = report_header(c, "validate", src);
  report["groups"] = ojson::array();
  std::size_t total_eligible = 0;
  for (const auto& outcome : src.outcomes) {
    for (const auto& group : c.subgroups) {
      Banded b = band_and_filter(c, prepare(c, src, outcome, group), outcome, group);
      total_eligible += b.eligible.size();
      ojson bands = ojson::array();
      for (int band = 0; band < static_cast<int>(c.treatment.n_bands()); ++band)
        bands.push_back({{"band", c.treatment.band_label(band)},
                         {"n_eligible", band_members(b.dataset, b.eligible, band).size()}});
      b.summary["bands"] = bands;
      report["groups"].push_back(b.summary);
    }
  }
  write_report(c, "validation_report.json", report);
  log << "validate: " << total_eligible << " eligible treated cases\n";
  if (total_eligible == 0) throw DegenerateError("no eligible treated units");
}

int run_command(const std::string& name, const RunConfig& config, std::ostream& log) {
  try {
    if (name == "estimate") cmd_estimate(config, log);
    else if (name == "baselines") cmd_baselines(config, log);
    else if (name == "placebo") cmd_placebo(config, log);
    else if (name == "profile") cmd_profile(config, log);
    else if (name == "simulate") cmd_simulate(config, log);
    else if (name == "validate") cmd_validate(config, log);
    else throw ConfigError("unknown command '" + name + "'");
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DegenerateError& e) {
    log << "degenerate: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const DataError& e) {
    log << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run_command_file(const std::string& name, const std::string& config_path, std::ostream& log) {
  RunConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return run_command(name, config, log);
}

}  // namespace isc
