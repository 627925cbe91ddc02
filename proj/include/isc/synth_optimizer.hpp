#pragma once

#include <vector>

#include <Eigen/Dense>

namespace isc {

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  bool record_history = false;
};

/// Nonnegative weights summing to one, with the solver's report.
struct SimplexWeights {
  Eigen::VectorXd weights;
  double objective = 0.0;  // ||target - donors^T w||
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each iteration, when recorded
};

/// Minimizes ||target - donors^T w||_2 over the unit simplex. `donors` holds
/// one donor per row. Fully-corrective Frank-Wolfe in the form of Wolfe's
/// minimum-norm-point method: the active set is re-optimized exactly over its
/// affine hull after each vertex is added, so the iterate is exact once the
/// optimal support is found. Starts from uniform weights; stops when the
/// Frank-Wolfe gap of the squared objective drops below `tol`.
///
/// When several weight vectors attain the optimum the result is whichever one
/// the (deterministic) solver path reaches.
SimplexWeights solve_weights(const Eigen::Ref<const Eigen::VectorXd>& target,
                             const Eigen::Ref<const Eigen::MatrixXd>& donors, const SolverOptions& options = {});

/// Weight-convex combination of donor rows at every column.
Eigen::VectorXd synthetic_trajectory(const SimplexWeights& weights,
                                     const Eigen::Ref<const Eigen::MatrixXd>& donor_outcomes);

struct FitDiagnostics {
  double rmspe_pre = 0.0;
  std::vector<double> per_period_residuals;  // treated - synthetic, t < 0
};

FitDiagnostics fit_diagnostics(const Eigen::Ref<const Eigen::VectorXd>& treated_outcomes,
                               const Eigen::Ref<const Eigen::VectorXd>& synthetic,
                               const std::vector<int>& relative_times);

}  // namespace isc
