#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "isc/donor_selection.hpp"
#include "isc/effects.hpp"
#include "isc/panel.hpp"
#include "isc/synth_optimizer.hpp"

namespace isc {

struct BootstrapConfig {
  int replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;

  void validate() const;
  double lower_prob() const { return (1.0 - level) / 2.0; }
  double upper_prob() const { return 1.0 - (1.0 - level) / 2.0; }
};

struct BootstrapResult {
  EffectSeries series;          // CI filled when ci_defined
  Eigen::MatrixXd replicates;   // replicate x relative time, NaN where undefined
  std::vector<double> se;       // sd of the replicate means
  bool ci_defined = false;      // false with fewer than two cases
};

/// Between-unit percentile bootstrap. Each replicate draws L cases with
/// replacement (the same draw for every relative time, so replicate columns
/// carry the joint covariance) and averages the drawn cases observed at t.
BootstrapResult bootstrap_ci(const std::vector<UnitEffect>& effects, const BootstrapConfig& config,
                             Method method = Method::ISC);

struct WithinOptions {
  bool standardize = true;
  SolverOptions solver;
};

/// Donor-resampling bootstrap for one case.
struct WithinBootstrap {
  UnitEffect estimate;          // effect with the original donor set
  Eigen::MatrixXd replicates;   // replicate x relative time effects
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  int nonconverged = 0;
};

/// Resamples the donor set with replacement, re-solves the weights on the
/// resampled donors and collects the case effect at every relative time.
WithinBootstrap within_bootstrap_ci(const AlignedCase& c, const DonorSet& donors, const BootstrapConfig& config,
                                    const WithinOptions& options = {});

/// ATT interval combining both sources: replicate b draws cases with
/// replacement and uses each drawn case's b-th donor-resampled effect.
EffectSeries nested_bootstrap_ci(const std::vector<WithinBootstrap>& cases, const BootstrapConfig& config);

struct PlaceboCase {
  UnitEffect mean_effect;  // average over the pseudo-treated donors
  int n_solves = 0;
  int n_nonconverged = 0;
};

/// Every donor in turn is pseudo-treated at the case's T0 and synthesized from
/// the other donors plus the real treated unit.
PlaceboCase placebo_case(const AlignedCase& c, const DonorSet& donors, const WithinOptions& options = {});

/// Placebo series for each case, then ATT and bootstrap tagged PLACEBO.
BootstrapResult placebo_test(const std::vector<PlaceboCase>& cases, const BootstrapConfig& config);

struct PretrendResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool singular = false;  // covariance rank below df; pseudo-inverse used
  std::vector<int> tested_times;
};

/// Wald test that all pre-period effects are zero, with the covariance of the
/// bootstrap replicate means. Relative times in `exclude` (e.g. a DID base
/// period) are not tested.
PretrendResult pretrend_test(const EffectSeries& series, const Eigen::MatrixXd& replicates,
                             const std::vector<int>& exclude = {});

}  // namespace isc
