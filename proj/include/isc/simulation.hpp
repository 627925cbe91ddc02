#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "isc/panel.hpp"
#include "isc/pipeline.hpp"

namespace isc {

struct SubpopParams {
  double drift = 0.0;
  double step_sd = 1.0;
};

struct SimConfig {
  int n_units = 1000;
  int n_subpops = 25;
  int n_treated = 100;
  int n_steps = 100;
  int t0_step = 50;
  std::uint64_t seed = 0;
  /// Empty means drifts evenly spaced in [-0.5, 0.5] and step_sd evenly
  /// spaced in [0.5, 2.0].
  std::vector<SubpopParams> subpop_params;
  /// Probability of an extra downward step of one step_sd after T0.
  double treatment_down_prob_shift = 0.5;
  /// Extra per-step drift of treated units before T0. Zero under the null.
  double treated_pre_trend = 0.0;
  /// Weekly-hours values assigned uniformly at random to treated units.
  std::vector<double> hours_levels{2.0, 10.0, 30.0, 60.0};

  void validate() const;
  std::vector<SubpopParams> resolved_params() const;
};

/// Random-walk panel: unit ids "u0000"... on periods 0 .. n_steps - 1, all
/// starting at 0. Covariates are the unit's subpopulation drift and step_sd
/// plus N(0, 0.1) noise. Treated units are flagged from t0_step on.
PanelDataset generate_population(const SimConfig& config);

struct ProfileResult {
  std::vector<int> k_grid;
  std::vector<double> mean_rmspe;
  std::vector<double> mean_exec_time;  // seconds per full pipeline run
  std::vector<std::map<UnitId, int>> donor_frequency;  // per K
  std::vector<int> n_clamped;                          // cases with K above the pool, per K
};

/// Runs the two-stage pipeline `reps` times for every K in the grid over all
/// treated units of `dataset`. Timing uses options.threads workers.
ProfileResult profile_k_grid(const PanelDataset& dataset, const std::vector<int>& k_grid, int reps,
                             const IscOptions& options = {});

/// Number of donors selected exactly n times, keyed by n.
std::map<int, int> frequency_histogram(const std::map<UnitId, int>& frequency);

/// Smallest count with the largest number of donors.
int frequency_mode(const std::map<UnitId, int>& frequency);

}  // namespace isc
