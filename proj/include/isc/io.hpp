#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isc/effects.hpp"
#include "isc/panel.hpp"
#include "isc/pipeline.hpp"
#include "isc/simulation.hpp"

namespace isc::io {

/// A referenced column is absent, or a cell does not parse.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// Delimited text held as strings. Fields may be double-quoted.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws SchemaError
  std::optional<std::size_t> find_column(const std::string& name) const;
};

Table read_table(const std::filesystem::path& path, char delim = ',');
Table parse_table(const std::string& text, char delim = ',');
void write_table(const std::filesystem::path& path, const Table& table, char delim = ',');
std::string format_table(const Table& table, char delim = ',');

/// Shortest decimal text that parses back to the same double; "NA" for NaN.
std::string format_double(double v);
/// Empty, "NA", "NaN" and "." read as NaN.
double parse_double(const std::string& s);
int parse_int(const std::string& s);

/// Column roles in a long-format input table.
struct Schema {
  std::string unit = "pidp";
  std::string period = "wave";
  std::string outcome = "income";
  std::vector<std::string> covariates;
  std::string hours = "care_hours";
  /// Explicit 0/1 treatment column; when empty, treated means hours > 0.
  std::string treated;
  std::string stratum;
};

PanelDataset load_panel(const Table& table, const Schema& schema);

/// Rows whose `column` value is in `allowed`.
Table filter_rows(const Table& table, const std::string& column, const std::vector<std::string>& allowed);

/// Appends numerator / denominator as a new column (NaN when either is
/// missing or the denominator is zero).
Table add_ratio_column(const Table& table, const std::string& name, const std::string& numerator,
                       const std::string& denominator);

/// Per-period index from a deflator column. Every period must carry one
/// consistent value.
std::map<int, double> deflator_index(const Table& table, const std::string& period_column,
                                     const std::string& deflator_column);

/// Long panel as a table with unit, period, outcome, covariates, treated,
/// hours and stratum columns.
Table panel_table(const PanelDataset& dataset);
Schema panel_table_schema(const PanelDataset& dataset);

// --- estimator output ---------------------------------------------------------

/// Columns: method, relative_time, point, ci_low, ci_high, n_cases.
Table effect_series_table(const EffectSeries& series);
EffectSeries effect_series_from_table(const Table& table);

/// Columns: treated_id, donor_id, weight, objective, rmspe_pre.
Table weights_table(const std::vector<CaseResult>& cases);

/// Columns: unit_id, relative_time, effect.
Table unit_effects_table(const std::vector<UnitEffect>& effects);

/// Columns: k, mean_rmspe, mean_exec_time_s.
Table profile_table(const ProfileResult& profile);
/// Columns: k, donor_id, count.
Table donor_frequency_table(const ProfileResult& profile);

/// Event-time by intensity-band summary: one row per relative time from -pre
/// to +post (labels Tm8 .. Tm1, Tp0 .. Tp6), each followed by a row of
/// t-statistics in parentheses, and a closing RMSPE row. Point estimates
/// carry significance stars from the normal two-sided p of the t-statistic.
struct BandColumn {
  std::string label;  // e.g. "H-Intensity"
  std::optional<EffectSeries> series;
  std::vector<double> se;  // aligned with series->relative_times
  double rmspe = std::nan("");
};
Table band_summary_table(const std::vector<BandColumn>& bands, int pre, int post);

std::string relative_time_label(int t);
std::string significance_stars(double p);

}  // namespace isc::io
