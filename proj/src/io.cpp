#include "isc/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "isc/stats.hpp"

namespace isc::io {

std::optional<std::size_t> Table::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::column(const std::string& name) const {
  if (auto i = find_column(name)) return *i;
  throw SchemaError("column '" + name + "' not found");
}

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text, char delim) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == delim) {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      any = false;
    } else {
      field += ch;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string quote(const std::string& s, char delim) {
  if (s.find_first_of(std::string{delim, '"', '\n', '\r'}) == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Table parse_table(const std::string& text, char delim) {
  auto records = parse_records(text, delim);
  if (records.empty()) throw DataError("empty table");
  Table t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw DataError("row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) + " fields, expected " +
                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

Table read_table(const std::filesystem::path& path, char delim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str(), delim);
}

std::string format_table(const Table& table, char delim) {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += delim;
      out += quote(fields[i], delim);
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

void write_table(const std::filesystem::path& path, const Table& table, char delim) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << format_table(table, delim);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") return std::nan("");
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw SchemaError("not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw SchemaError("not an integer: '" + s + "'");
  return v;
}

namespace {

bool parse_flag(const std::string& s) {
  if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
  if (s == "0" || s == "false" || s == "FALSE" || s == "False" || s.empty() || s == "NA") return false;
  throw SchemaError("not a 0/1 flag: '" + s + "'");
}

}  // namespace

PanelDataset load_panel(const Table& table, const Schema& schema) {
  const std::size_t c_unit = table.column(schema.unit);
  const std::size_t c_period = table.column(schema.period);
  const std::size_t c_outcome = table.column(schema.outcome);
  std::vector<std::size_t> c_cov;
  for (const auto& name : schema.covariates) c_cov.push_back(table.column(name));
  const auto c_hours = schema.hours.empty() ? std::nullopt : std::optional(table.column(schema.hours));
  const auto c_treated = schema.treated.empty() ? std::nullopt : std::optional(table.column(schema.treated));
  const auto c_stratum = schema.stratum.empty() ? std::nullopt : std::optional(table.column(schema.stratum));
  if (!c_hours && !c_treated) throw SchemaError("schema needs a hours or treated column");

  std::vector<Observation> obs;
  obs.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      Observation o;
      o.unit_id = row[c_unit];
      o.period = parse_int(row[c_period]);
      o.outcome = parse_double(row[c_outcome]);
      for (auto c : c_cov) o.covariates.push_back(parse_double(row[c]));
      o.hours = c_hours ? parse_double(row[*c_hours]) : std::nan("");
      o.treated_flag = c_treated ? parse_flag(row[*c_treated]) : (o.hours > 0.0);
      if (c_stratum) o.stratum = row[*c_stratum];
      obs.push_back(std::move(o));
    } catch (const SchemaError& e) {
      throw SchemaError("data row " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  return PanelDataset(std::move(obs), schema.covariates);
}

Table filter_rows(const Table& table, const std::string& column, const std::vector<std::string>& allowed) {
  const std::size_t c = table.column(column);
  const std::set<std::string> keep(allowed.begin(), allowed.end());
  Table out{table.header, {}};
  for (const auto& row : table.rows)
    if (keep.count(row[c])) out.rows.push_back(row);
  return out;
}

Table add_ratio_column(const Table& table, const std::string& name, const std::string& numerator,
                       const std::string& denominator) {
  if (table.find_column(name)) throw SchemaError("column '" + name + "' already exists");
  const std::size_t cn = table.column(numerator), cd = table.column(denominator);
  Table out = table;
  out.header.push_back(name);
  for (auto& row : out.rows) {
    const double n = parse_double(row[cn]), d = parse_double(row[cd]);
    row.push_back(format_double(d != 0.0 ? n / d : std::nan("")));
  }
  return out;
}

std::map<int, double> deflator_index(const Table& table, const std::string& period_column,
                                     const std::string& deflator_column) {
  const std::size_t cp = table.column(period_column), cd = table.column(deflator_column);
  std::map<int, double> out;
  for (const auto& row : table.rows) {
    const double v = parse_double(row[cd]);
    if (std::isnan(v)) continue;
    const int p = parse_int(row[cp]);
    auto [it, inserted] = out.emplace(p, v);
    if (!inserted && it->second != v)
      throw DataError("deflator differs within period " + std::to_string(p) + ": " + format_double(it->second) +
                      " vs " + format_double(v));
  }
  return out;
}

Schema panel_table_schema(const PanelDataset& dataset) {
  Schema s;
  s.unit = "unit_id";
  s.period = "period";
  s.outcome = "outcome";
  s.covariates = dataset.covariate_names();
  for (std::size_t i = s.covariates.size(); i < dataset.covariate_dim(); ++i) s.covariates.push_back("x" + std::to_string(i));
  s.hours = "hours";
  s.treated = "treated";
  s.stratum = "stratum";
  return s;
}

Table panel_table(const PanelDataset& dataset) {
  const Schema s = panel_table_schema(dataset);
  Table t;
  t.header = {s.unit, s.period, s.outcome};
  t.header.insert(t.header.end(), s.covariates.begin(), s.covariates.end());
  t.header.insert(t.header.end(), {s.treated, s.hours, s.stratum});
  for (const auto& o : dataset.observations()) {
    std::vector<std::string> row{o.unit_id, std::to_string(o.period), format_double(o.outcome)};
    for (double x : o.covariates) row.push_back(format_double(x));
    row.push_back(o.treated_flag ? "1" : "0");
    row.push_back(format_double(o.hours));
    row.push_back(o.stratum);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table effect_series_table(const EffectSeries& s) {
  Table t{{"method", "relative_time", "point", "ci_low", "ci_high", "n_cases"}, {}};
  for (std::size_t i = 0; i < s.relative_times.size(); ++i) {
    t.rows.push_back({method_name(s.method), std::to_string(s.relative_times[i]), format_double(s.point[i]),
                      s.has_ci() ? format_double(s.ci_low[i]) : "NA", s.has_ci() ? format_double(s.ci_high[i]) : "NA",
                      std::to_string(s.n_cases[i])});
  }
  return t;
}

EffectSeries effect_series_from_table(const Table& table) {
  const std::size_t cm = table.column("method"), ct = table.column("relative_time"), cp = table.column("point"),
                    cl = table.column("ci_low"), ch = table.column("ci_high"), cn = table.column("n_cases");
  EffectSeries s;
  bool any_ci = false;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const Method m = parse_method(row[cm]);
    if (r == 0) s.method = m;
    else if (m != s.method) throw DataError("mixed methods in one effect series");
    s.relative_times.push_back(parse_int(row[ct]));
    s.point.push_back(parse_double(row[cp]));
    s.ci_low.push_back(parse_double(row[cl]));
    s.ci_high.push_back(parse_double(row[ch]));
    s.n_cases.push_back(parse_int(row[cn]));
    any_ci = any_ci || row[cl] != "NA" || row[ch] != "NA";
  }
  if (!any_ci) {
    s.ci_low.clear();
    s.ci_high.clear();
  }
  return s;
}

Table weights_table(const std::vector<CaseResult>& cases) {
  Table t{{"treated_id", "donor_id", "weight", "objective", "rmspe_pre"}, {}};
  for (const auto& c : cases)
    for (std::size_t i = 0; i < c.donors.size(); ++i)
      t.rows.push_back({c.treated_id, c.donors.donor_ids[i], format_double(c.weights.weights[static_cast<Eigen::Index>(i)]),
                        format_double(c.weights.objective), format_double(c.fit.rmspe_pre)});
  return t;
}

Table unit_effects_table(const std::vector<UnitEffect>& effects) {
  Table t{{"unit_id", "relative_time", "effect"}, {}};
  for (const auto& e : effects)
    for (std::size_t i = 0; i < e.values.size(); ++i)
      t.rows.push_back({e.unit_id, std::to_string(e.relative_times[i]), format_double(e.values[i])});
  return t;
}

Table profile_table(const ProfileResult& p) {
  Table t{{"k", "mean_rmspe", "mean_exec_time_s"}, {}};
  for (std::size_t i = 0; i < p.k_grid.size(); ++i)
    t.rows.push_back({std::to_string(p.k_grid[i]), format_double(p.mean_rmspe[i]), format_double(p.mean_exec_time[i])});
  return t;
}

Table donor_frequency_table(const ProfileResult& p) {
  Table t{{"k", "donor_id", "count"}, {}};
  for (std::size_t i = 0; i < p.k_grid.size(); ++i)
    for (const auto& [id, n] : p.donor_frequency[i]) t.rows.push_back({std::to_string(p.k_grid[i]), id, std::to_string(n)});
  return t;
}

std::string relative_time_label(int t) { return (t < 0 ? "Tm" : "Tp") + std::to_string(t < 0 ? -t : t); }

std::string significance_stars(double p) {
  if (!(p < 0.05)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  return "*";
}

Table band_summary_table(const std::vector<BandColumn>& bands, int pre, int post) {
  Table t;
  t.header.push_back("");
  for (const auto& b : bands) t.header.push_back(b.label);
  for (int rt = -pre; rt <= post; ++rt) {
    std::vector<std::string> est{relative_time_label(rt)}, tstat{""};
    for (const auto& b : bands) {
      std::optional<std::size_t> i;
      if (b.series) i = b.series->index_of(rt);
      if (!i) {
        est.push_back("NA");
        tstat.push_back("NA");
        continue;
      }
      const double point = b.series->point[*i];
      const double se = *i < b.se.size() ? b.se[*i] : std::nan("");
      const double z = se > 0.0 ? point / se : std::nan("");
      est.push_back(fixed(point, 2) + (std::isfinite(z) ? significance_stars(stats::normal_two_sided_p(z)) : ""));
      tstat.push_back("(" + fixed(z, 2) + ")");
    }
    t.rows.push_back(std::move(est));
    t.rows.push_back(std::move(tstat));
  }
  std::vector<std::string> rmspe{"RMSPE"};
  for (const auto& b : bands) rmspe.push_back(fixed(b.rmspe, 2));
  t.rows.push_back(std::move(rmspe));
  return t;
}

}  // namespace isc::io
