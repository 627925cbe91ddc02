#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isc/donor_selection.hpp"
#include "isc/panel.hpp"
#include "isc/synth_optimizer.hpp"

namespace isc {

enum class Method { ISC, PSM, DID, SDID, PLACEBO };

std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Effect of one treated unit on its own relative-time grid.
struct UnitEffect {
  UnitId unit_id;
  std::vector<int> relative_times;
  std::vector<double> values;
};

/// Per-relative-time estimates, optionally with confidence bands.
struct EffectSeries {
  Method method = Method::ISC;
  std::vector<int> relative_times;
  std::vector<double> point;
  std::vector<int> n_cases;
  std::vector<double> ci_low;   // empty when no CI
  std::vector<double> ci_high;  // empty when no CI

  bool has_ci() const { return !ci_low.empty(); }
  std::optional<std::size_t> index_of(int t) const;
};

/// Treated outcome minus synthetic outcome at every retained relative time.
/// `donors.rows` index the case's controls; `weights` are over those donors.
UnitEffect isc_effect(const AlignedCase& c, const DonorSet& donors, const SimplexWeights& weights);

/// Synthetic outcomes of the case over all its relative times.
Eigen::VectorXd case_synthetic(const AlignedCase& c, const DonorSet& donors, const SimplexWeights& weights);

/// Unweighted mean across the units observed at each relative time.
EffectSeries att(const std::vector<UnitEffect>& effects, Method method = Method::ISC);

}  // namespace isc
