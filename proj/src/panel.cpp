#include "isc/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "isc/stats.hpp"

namespace isc {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::optional<std::size_t> UnitRecord::find(int period) const {
  const auto it = std::lower_bound(periods.begin(), periods.end(), period);
  if (it == periods.end() || *it != period) return std::nullopt;
  return static_cast<std::size_t>(it - periods.begin());
}

double UnitRecord::outcome_at(int period) const {
  const auto i = find(period);
  return i ? outcomes[*i] : std::nan("");
}

PanelDataset::PanelDataset(std::vector<Observation> observations, std::vector<std::string> covariate_names)
    : covariate_names_(std::move(covariate_names)) {
  if (!observations.empty()) {
    covariate_dim_ = observations.front().covariates.size();
  } else {
    covariate_dim_ = covariate_names_.size();
  }
  if (!covariate_names_.empty() && covariate_names_.size() != covariate_dim_) {
    throw DataError("covariate names do not match covariate vector length");
  }

  std::map<UnitId, std::size_t> order;
  for (const auto& obs : observations) {
    if (obs.covariates.size() != covariate_dim_) {
      std::ostringstream msg;
      msg << "covariate arity mismatch at (" << obs.unit_id << ", " << obs.period << "): expected "
          << covariate_dim_ << ", got " << obs.covariates.size();
      throw DataError(msg.str());
    }
    if (order.emplace(obs.unit_id, order.size()).second) {
      UnitRecord rec;
      rec.id = obs.unit_id;
      units_.push_back(std::move(rec));
    }
  }

  // Stable sort by (unit order, period) then fill records.
  std::vector<std::size_t> idx(observations.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ua = order.at(observations[a].unit_id);
    const auto ub = order.at(observations[b].unit_id);
    if (ua != ub) return ua < ub;
    return observations[a].period < observations[b].period;
  });

  std::vector<std::pair<UnitId, int>> duplicates;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto& obs = observations[idx[k]];
    auto& rec = units_[order.at(obs.unit_id)];
    if (!rec.periods.empty() && rec.periods.back() == obs.period) {
      duplicates.emplace_back(obs.unit_id, obs.period);
      continue;
    }
    if (rec.periods.empty()) rec.stratum = obs.stratum;
    rec.periods.push_back(obs.period);
    rec.outcomes.push_back(obs.outcome);
    rec.covariates.push_back(std::move(obs.covariates));
    rec.treated_flags.push_back(obs.treated_flag);
    rec.hours.push_back(obs.hours);
    if (obs.treated_flag && !rec.t0) rec.t0 = obs.period;
  }
  if (!duplicates.empty()) {
    std::ostringstream msg;
    msg << "duplicate (unit, period) keys:";
    for (const auto& [u, p] : duplicates) msg << " (" << u << ", " << p << ")";
    throw DataError(msg.str());
  }
  n_observations_ = observations.size();
  rebuild_index();
}

void PanelDataset::rebuild_index() {
  index_.clear();
  n_observations_ = 0;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    index_[units_[i].id] = i;
    n_observations_ += units_[i].periods.size();
  }
}

const UnitRecord* PanelDataset::find_unit(const UnitId& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &units_[it->second];
}

const UnitRecord& PanelDataset::unit(const UnitId& id) const {
  const auto* u = find_unit(id);
  if (!u) throw DataError("unknown unit: " + id);
  return *u;
}

std::vector<Observation> PanelDataset::observations() const {
  std::vector<Observation> out;
  out.reserve(n_observations_);
  for (const auto& u : units_) {
    for (std::size_t i = 0; i < u.periods.size(); ++i) {
      out.push_back(Observation{u.id, u.periods[i], u.outcomes[i], u.covariates[i], u.treated_flags[i],
                                u.hours[i], u.stratum});
    }
  }
  return out;
}

PanelDataset PanelDataset::with_units(std::vector<UnitRecord> units) const {
  PanelDataset out;
  out.units_ = std::move(units);
  out.covariate_names_ = covariate_names_;
  out.covariate_dim_ = covariate_dim_;
  out.rebuild_index();
  return out;
}

// ---------------------------------------------------------------------------

void TreatmentSpec::validate() const {
  for (double e : band_edges) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("band edges must be finite and nonnegative");
  }
  if (std::adjacent_find(band_edges.begin(), band_edges.end(), std::greater_equal<>()) != band_edges.end()) {
    throw std::invalid_argument("band edges must be strictly increasing");
  }
  if (min_pre_periods < 1) throw std::invalid_argument("min_pre_periods must be >= 1");
  if (min_consecutive_treated < 0) throw std::invalid_argument("min_consecutive_treated must be >= 0");
}

int TreatmentSpec::band_of(double hours) const {
  const auto it = std::upper_bound(band_edges.begin(), band_edges.end(), hours);
  return static_cast<int>(it - band_edges.begin());
}

std::string TreatmentSpec::band_label(int band) const {
  if (band_edges.size() == 3) {
    static const char* names[] = {"Low", "Medium-Low", "Medium-High", "High"};
    return names[band];
  }
  return "band" + std::to_string(band);
}

std::string TreatmentSpec::band_short_label(int band) const {
  if (band_edges.size() == 3) {
    static const char* names[] = {"L", "ML", "MH", "H"};
    return names[band];
  }
  return "B" + std::to_string(band);
}

BandAssignment assign_bands(const PanelDataset& dataset, const TreatmentSpec& spec) {
  spec.validate();
  BandAssignment out;
  std::vector<UnitRecord> kept;
  kept.reserve(dataset.n_units());
  for (auto u : dataset.units()) {
    if (u.treated()) {
      const double h = u.hours[*u.find(*u.t0)];
      if (!std::isfinite(h) || h < 0.0) {
        out.dropped.push_back(u.id);
        continue;
      }
      u.band = spec.band_of(h);
    }
    kept.push_back(std::move(u));
  }
  out.dataset = dataset.with_units(std::move(kept));
  return out;
}

std::vector<UnitId> filter_eligible(const PanelDataset& dataset, const TreatmentSpec& spec) {
  spec.validate();
  std::vector<UnitId> out;
  for (const auto& u : dataset.units()) {
    if (!u.treated()) continue;
    const int t0 = *u.t0;
    int pre = 0;
    for (std::size_t i = 0; i < u.periods.size() && u.periods[i] < t0; ++i) {
      if (std::isfinite(u.outcomes[i])) ++pre;
    }
    if (pre < spec.min_pre_periods) continue;
    if (spec.min_consecutive_treated > 0) {
      int run = 0;
      for (int p = t0;; ++p) {
        const auto i = u.find(p);
        if (!i || !u.treated_flags[*i]) break;
        ++run;
      }
      if (run < spec.min_consecutive_treated) continue;
    }
    out.push_back(u.id);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t AlignedCase::n_pre() const {
  return static_cast<std::size_t>(
      std::count_if(relative_times.begin(), relative_times.end(), [](int t) { return t < 0; }));
}

std::optional<std::size_t> AlignedCase::column_of(int t) const {
  const auto it = std::lower_bound(relative_times.begin(), relative_times.end(), t);
  if (it == relative_times.end() || *it != t) return std::nullopt;
  return static_cast<std::size_t>(it - relative_times.begin());
}

AlignedCase align_case(const PanelDataset& dataset, const UnitId& treated_id, const AlignOptions& options) {
  if (options.pre_max < 1 || options.post_max < 0) throw std::invalid_argument("alignment window must be positive");
  const UnitRecord& tr = dataset.unit(treated_id);
  if (!tr.treated()) throw AlignmentError("unit " + treated_id + " is not treated");
  const int t0 = *tr.t0;

  std::vector<int> calendar;
  for (std::size_t i = 0; i < tr.periods.size(); ++i) {
    const int rel = tr.periods[i] - t0;
    if (rel < -options.pre_max || rel > options.post_max) continue;
    if (std::isfinite(tr.outcomes[i])) calendar.push_back(tr.periods[i]);
  }
  if (!std::binary_search(calendar.begin(), calendar.end(), t0)) {
    throw AlignmentError("unit " + treated_id + " has no outcome at T0");
  }
  const auto n_pre = static_cast<int>(std::lower_bound(calendar.begin(), calendar.end(), t0) - calendar.begin());
  if (n_pre < std::max(1, options.min_pre_periods)) {
    throw AlignmentError("unit " + treated_id + " has " + std::to_string(n_pre) +
                         " pre-treatment periods in the window");
  }
  const int ref_period = calendar[static_cast<std::size_t>(n_pre) - 1];
  const std::size_t dim = dataset.covariate_dim();

  AlignedCase c;
  c.treated_id = treated_id;
  c.t0_period = t0;
  c.treated_outcomes.resize(static_cast<Eigen::Index>(calendar.size()));
  for (std::size_t j = 0; j < calendar.size(); ++j) {
    c.relative_times.push_back(calendar[j] - t0);
    c.treated_outcomes[static_cast<Eigen::Index>(j)] = tr.outcome_at(calendar[j]);
  }
  const auto& tcov = tr.covariates[*tr.find(ref_period)];
  if (!all_finite(tcov)) throw AlignmentError("unit " + treated_id + " has missing covariates before T0");
  c.treated_covariates = Eigen::Map<const Eigen::VectorXd>(tcov.data(), static_cast<Eigen::Index>(dim));

  std::vector<const UnitRecord*> usable;
  for (const auto& u : dataset.units()) {
    if (u.treated()) continue;
    if (options.match_stratum && u.stratum != tr.stratum) continue;
    const bool complete = std::all_of(calendar.begin(), calendar.end(),
                                      [&](int p) { return std::isfinite(u.outcome_at(p)); });
    if (!complete) continue;
    if (!all_finite(u.covariates[*u.find(ref_period)])) continue;
    usable.push_back(&u);
  }
  if (usable.empty()) {
    throw EmptyDonorPoolError(treated_id, "no control observed over the window of unit " + treated_id);
  }

  const auto n_ctrl = static_cast<Eigen::Index>(usable.size());
  c.control_outcomes.resize(n_ctrl, static_cast<Eigen::Index>(calendar.size()));
  c.control_covariates.resize(n_ctrl, static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < n_ctrl; ++r) {
    const UnitRecord& u = *usable[static_cast<std::size_t>(r)];
    c.control_ids.push_back(u.id);
    for (std::size_t j = 0; j < calendar.size(); ++j) {
      c.control_outcomes(r, static_cast<Eigen::Index>(j)) = u.outcome_at(calendar[j]);
    }
    const auto& cov = u.covariates[*u.find(ref_period)];
    for (std::size_t k = 0; k < dim; ++k) c.control_covariates(r, static_cast<Eigen::Index>(k)) = cov[k];
  }
  return c;
}

PanelDataset case_to_panel(const AlignedCase& c) {
  std::vector<Observation> obs;
  const auto dim = static_cast<std::size_t>(c.treated_covariates.size());
  const std::vector<double> tcov(c.treated_covariates.data(), c.treated_covariates.data() + dim);
  for (std::size_t j = 0; j < c.relative_times.size(); ++j) {
    const int rel = c.relative_times[j];
    obs.push_back(Observation{c.treated_id, c.t0_period + rel, c.treated_outcomes[static_cast<Eigen::Index>(j)],
                              tcov, rel >= 0, rel >= 0 ? 1.0 : 0.0, ""});
  }
  for (std::size_t r = 0; r < c.control_ids.size(); ++r) {
    std::vector<double> cov(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      cov[k] = c.control_covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
    }
    for (std::size_t j = 0; j < c.relative_times.size(); ++j) {
      obs.push_back(Observation{c.control_ids[r], c.t0_period + c.relative_times[j],
                                c.control_outcomes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)), cov,
                                false, 0.0, ""});
    }
  }
  return PanelDataset(std::move(obs));
}

PanelDataset apply_deflator(const PanelDataset& dataset, const std::map<int, double>& index_by_period,
                            int base_period) {
  for (const auto& [period, value] : index_by_period) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw DataError("deflator index must be positive, got " + std::to_string(value) + " at period " +
                      std::to_string(period));
    }
  }
  const auto base = index_by_period.find(base_period);
  if (base == index_by_period.end()) {
    throw DataError("deflator has no value for base period " + std::to_string(base_period));
  }
  std::vector<UnitRecord> units = dataset.units();
  for (auto& u : units) {
    for (std::size_t i = 0; i < u.periods.size(); ++i) {
      const auto it = index_by_period.find(u.periods[i]);
      if (it == index_by_period.end()) {
        throw DataError("deflator missing for observed period " + std::to_string(u.periods[i]));
      }
      u.outcomes[i] *= base->second / it->second;
    }
  }
  return dataset.with_units(std::move(units));
}

PanelDataset trim_outcomes(const PanelDataset& dataset, double lower_q, double upper_q) {
  if (!(lower_q >= 0.0 && lower_q < upper_q && upper_q <= 1.0)) {
    throw std::invalid_argument("trim quantiles must satisfy 0 <= lower < upper <= 1");
  }
  std::vector<double> pooled;
  for (const auto& u : dataset.units()) {
    for (double y : u.outcomes) {
      if (std::isfinite(y)) pooled.push_back(y);
    }
  }
  if (pooled.empty()) return dataset;
  std::sort(pooled.begin(), pooled.end());
  const double lo = stats::quantile_sorted(pooled, lower_q);
  const double hi = stats::quantile_sorted(pooled, upper_q);
  std::vector<UnitRecord> units = dataset.units();
  for (auto& u : units) {
    for (double& y : u.outcomes) {
      if (std::isfinite(y) && (y < lo || y > hi)) y = std::nan("");
    }
  }
  return dataset.with_units(std::move(units));
}

}  // namespace isc
