#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace isc {

using UnitId = std::string;

/// Raised when input data violate the panel invariants (duplicate keys,
/// ragged covariates, bad deflator values, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A treated unit with no control observed over its whole retained window.
class EmptyDonorPoolError : public std::runtime_error {
 public:
  EmptyDonorPoolError(UnitId treated, const std::string& what)
      : std::runtime_error(what), treated_id(std::move(treated)) {}
  UnitId treated_id;
};

/// Treated unit that cannot be aligned (too few pre periods, T0 outcome
/// missing, covariates missing at the reference period).
class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of a long-format panel. Missing outcome/covariate/hours values are
/// stored as NaN.
struct Observation {
  UnitId unit_id;
  int period = 0;
  double outcome = 0.0;
  std::vector<double> covariates;
  bool treated_flag = false;
  double hours = 0.0;
  std::string stratum;
};

/// All observations of one unit, sorted by period.
struct UnitRecord {
  UnitId id;
  std::vector<int> periods;
  std::vector<double> outcomes;
  std::vector<std::vector<double>> covariates;
  std::vector<bool> treated_flags;
  std::vector<double> hours;
  std::string stratum;
  std::optional<int> t0;    // first flagged period; empty for controls
  std::optional<int> band;  // intensity band index, set by assign_bands

  bool treated() const { return t0.has_value(); }
  /// Index of `period` in `periods`, if observed.
  std::optional<std::size_t> find(int period) const;
  /// Outcome at `period`, NaN when unobserved or missing.
  double outcome_at(int period) const;
};

/// Immutable long-format panel. Construction validates the invariants:
/// unique (unit, period) keys and identical covariate arity.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<Observation> observations,
               std::vector<std::string> covariate_names = {});

  const std::vector<UnitRecord>& units() const { return units_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  std::size_t covariate_dim() const { return covariate_dim_; }
  std::size_t n_observations() const { return n_observations_; }
  std::size_t n_units() const { return units_.size(); }

  const UnitRecord* find_unit(const UnitId& id) const;
  const UnitRecord& unit(const UnitId& id) const;

  /// Flattened view, units in first-appearance order, periods ascending.
  std::vector<Observation> observations() const;

  /// Copy with a different unit list. Used by the transforms below.
  PanelDataset with_units(std::vector<UnitRecord> units) const;

 private:
  std::vector<UnitRecord> units_;
  std::vector<std::string> covariate_names_;
  std::map<UnitId, std::size_t> index_;
  std::size_t covariate_dim_ = 0;
  std::size_t n_observations_ = 0;

  void rebuild_index();
};

/// Intensity banding and eligibility rules for treated units.
struct TreatmentSpec {
  std::vector<double> band_edges{5.0, 20.0, 50.0};
  int min_pre_periods = 3;
  int min_consecutive_treated = 0;

  void validate() const;
  std::size_t n_bands() const { return band_edges.size() + 1; }
  /// Band index for a weekly-hours value; edges are inclusive lower bounds.
  int band_of(double hours) const;
  std::string band_label(int band) const;
  std::string band_short_label(int band) const;
};

struct BandAssignment {
  PanelDataset dataset;
  std::vector<UnitId> dropped;  // treated units with unusable hours at T0
};

/// Gives each treated unit the band of its hours at T0. Units whose T0 hours
/// are not finite are removed from the returned dataset.
BandAssignment assign_bands(const PanelDataset& dataset, const TreatmentSpec& spec);

/// Treated units with at least `min_pre_periods` observed pre-T0 outcomes and,
/// when `min_consecutive_treated` > 0, that many consecutive flagged periods
/// starting at T0. Result follows dataset unit order.
std::vector<UnitId> filter_eligible(const PanelDataset& dataset, const TreatmentSpec& spec);

struct AlignOptions {
  int pre_max = 8;
  int post_max = 6;
  int min_pre_periods = 1;
  /// Keep only controls whose stratum equals the treated unit's.
  bool match_stratum = false;
};

/// One treated unit with its usable controls on relative time.
struct AlignedCase {
  UnitId treated_id;
  int t0_period = 0;
  std::vector<int> relative_times;
  Eigen::VectorXd treated_outcomes;
  Eigen::VectorXd treated_covariates;
  std::vector<UnitId> control_ids;
  Eigen::MatrixXd control_outcomes;    // controls x relative_times
  Eigen::MatrixXd control_covariates;  // controls x covariate dim

  std::size_t n_pre() const;
  std::size_t n_controls() const { return control_ids.size(); }
  /// Column of relative time `t`, if retained.
  std::optional<std::size_t> column_of(int t) const;
};

/// Maps the treated unit's window onto relative time (calendar gaps kept as
/// index gaps) and gathers controls observed at every retained period with
/// covariates present at the last retained pre period.
AlignedCase align_case(const PanelDataset& dataset, const UnitId& treated_id,
                       const AlignOptions& options = {});

/// Inverse of alignment: a dataset holding just this case on calendar periods
/// t0_period + relative_time. Covariates are repeated at every period.
PanelDataset case_to_panel(const AlignedCase& c);

/// outcome * base_index / index(period). Every observed period needs a
/// positive index.
PanelDataset apply_deflator(const PanelDataset& dataset, const std::map<int, double>& index_by_period,
                            int base_period);

/// Marks outcomes outside the pooled [lower, upper] quantiles as missing.
PanelDataset trim_outcomes(const PanelDataset& dataset, double lower_q, double upper_q);

}  // namespace isc
