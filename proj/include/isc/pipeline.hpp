#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isc/donor_selection.hpp"
#include "isc/effects.hpp"
#include "isc/inference.hpp"
#include "isc/panel.hpp"
#include "isc/synth_optimizer.hpp"

namespace isc {

struct IscOptions {
  AlignOptions align;
  DistanceConfig distance;
  SolverOptions solver;
  int threads = 1;
};

/// Stage-1 and stage-2 output for one treated unit.
struct CaseResult {
  UnitId treated_id;
  std::optional<int> band;
  DonorSet donors;
  SimplexWeights weights;
  UnitEffect effect;
  FitDiagnostics fit;
};

enum class FailureReason { empty_donor_pool, alignment, nonconverged };
std::string failure_name(FailureReason r);

struct CaseFailure {
  UnitId treated_id;
  FailureReason reason;
  std::string message;
};

struct IscRun {
  std::vector<CaseResult> cases;  // in input order, failures removed
  std::vector<CaseFailure> failures;

  std::vector<UnitEffect> effects() const;
  double mean_rmspe() const;
  int count(FailureReason r) const;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions from fn
/// are rethrown after all workers finish.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// align -> select donors -> solve weights -> effect for one treated unit.
/// Throws the alignment errors of align_case.
CaseResult run_case(const PanelDataset& dataset, const UnitId& treated_id, const IscOptions& options);

/// run_case over many units in parallel; alignment failures and
/// non-converged solves are reported instead of thrown.
IscRun run_isc(const PanelDataset& dataset, const std::vector<UnitId>& treated, const IscOptions& options);

struct PlaceboRun {
  std::vector<PlaceboCase> cases;
  std::vector<CaseFailure> failures;
  int n_solves = 0;
};

/// Placebo series of every treated unit on its own donor set.
PlaceboRun run_placebo(const PanelDataset& dataset, const std::vector<UnitId>& treated, const IscOptions& options);

struct WithinRun {
  std::vector<WithinBootstrap> cases;
  std::vector<CaseFailure> failures;
};

/// Donor-resampling bootstrap of every treated unit.
WithinRun run_within_bootstrap(const PanelDataset& dataset, const std::vector<UnitId>& treated,
                               const IscOptions& options, const BootstrapConfig& config);

}  // namespace isc
