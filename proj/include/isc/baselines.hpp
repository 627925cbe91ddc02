#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "isc/effects.hpp"
#include "isc/panel.hpp"
#include "isc/synth_optimizer.hpp"

namespace isc {

/// SDID needs every unit observed at every period.
class UnbalancedPanelError : public DataError {
 public:
  using DataError::DataError;
};

// --- propensity score matching ---------------------------------------------

struct LogisticFit {
  Eigen::VectorXd coef;  // intercept first
  int iterations = 0;
  bool converged = false;
  bool separation = false;  // fitted probabilities at 0 or 1, or divergence
};

/// Maximum-likelihood logistic regression by Newton-Raphson. `x` excludes the
/// intercept column. Converged when the largest coefficient step is below `tol`.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tol = 1e-8, int max_iter = 100);

Eigen::VectorXd predict_logistic(const LogisticFit& fit, const Eigen::MatrixXd& x);

struct PsmOptions {
  double caliper = 0.01;  // on the probability scale
  int post_max = 6;
};

struct PsmReport {
  int n_treated = 0;
  int n_matched = 0;
  int n_off_support = 0;
  int n_unmatched_caliper = 0;
  int n_missing_covariates = 0;
  bool converged = false;
  bool separation = false;
};

struct PsmResult {
  std::vector<UnitEffect> effects;
  EffectSeries series;
  PsmReport report;
  std::vector<std::pair<UnitId, UnitId>> matches;  // (treated, control)
};

/// One-to-one nearest-neighbour matching on the propensity score, with
/// replacement, common support and caliper. Treated covariates come from the
/// last pre-T0 period with complete covariates, control covariates from the
/// last such observed period. Effects at t >= 0 are treated minus matched
/// control outcome at calendar period T0 + t.
PsmResult psm_att(const PanelDataset& dataset, const std::vector<UnitId>& treated, const PsmOptions& options = {});

// --- difference in differences ----------------------------------------------

struct DidResult {
  std::vector<UnitEffect> effects;  // per treated unit
  EffectSeries series;
  int n_missing_base = 0;  // treated units unobserved at t = -1
};

/// Event-study DID with base period t = -1 and an equally weighted control
/// group. For each treated unit and relative time t the control change is the
/// mean of y(T0 + t) - y(T0 - 1) over controls observed at both periods.
DidResult did_att(const PanelDataset& dataset, const std::vector<UnitId>& treated, const AlignOptions& window = {});

// --- synthetic difference in differences ------------------------------------

struct TimeWeights {
  Eigen::VectorXd lambda;
  double intercept = 0.0;
  double objective = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

/// Pre-period weights on the simplex plus a free intercept that best
/// reproduce each control's post-period mean from its pre-period outcomes.
/// The intercept is profiled out by centering across units, which leaves a
/// simplex least-squares problem for the shared solver.
TimeWeights sdid_time_weights(const Eigen::MatrixXd& control_pre, const Eigen::MatrixXd& control_post,
                              const SolverOptions& options = {});

/// Treated and control outcomes on one common relative-time grid.
struct BalancedPanel {
  std::vector<int> relative_times;
  Eigen::MatrixXd treated;   // treated units x times
  Eigen::MatrixXd controls;  // controls x times
  std::vector<UnitId> treated_ids;
  std::vector<UnitId> control_ids;

  Eigen::Index n_pre() const;
};

struct SdidFit {
  SimplexWeights unit_weights;
  TimeWeights time_weights;
  std::vector<UnitEffect> effects;  // per treated unit, every relative time
  double att = 0.0;                 // average over post periods
};

SdidFit sdid_fit(const BalancedPanel& panel, const SolverOptions& options = {});

struct SdidOptions {
  int pre = 5;
  int post = 5;
  SolverOptions solver;
};

struct SdidResult {
  std::vector<UnitEffect> effects;
  EffectSeries series;
  std::vector<std::pair<int, int>> cohorts;  // (T0, treated count) estimated
  int n_dropped = 0;                         // treated in cohorts lacking the window
  bool all_converged = true;
};

/// Rejects panels that are not strongly balanced. Treated units are grouped by
/// T0; each cohort is fitted on T0 - pre .. T0 + post - 1 against all
/// never-treated units.
SdidResult sdid_att(const PanelDataset& dataset, const std::vector<UnitId>& treated, const SdidOptions& options = {});

}  // namespace isc
