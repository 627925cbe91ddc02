#include "isc/synth_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace isc {

namespace {

// Point of minimum norm in the affine hull of the rows of `points` listed in
// `active`, returned as affine coefficients (sum to one).
Eigen::VectorXd affine_minimizer(const Eigen::MatrixXd& points, const std::vector<Eigen::Index>& active) {
  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::VectorXd alpha(m);
  if (m == 1) {
    alpha[0] = 1.0;
    return alpha;
  }
  const Eigen::VectorXd p0 = points.row(active[0]).transpose();
  Eigen::MatrixXd diffs(points.cols(), m - 1);
  for (Eigen::Index i = 1; i < m; ++i) {
    diffs.col(i - 1) = points.row(active[static_cast<std::size_t>(i)]).transpose() - p0;
  }
  const Eigen::VectorXd beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(diffs).solve(-p0);
  alpha[0] = 1.0 - beta.sum();
  alpha.tail(m - 1) = beta;
  return alpha;
}

}  // namespace

SimplexWeights solve_weights(const Eigen::Ref<const Eigen::VectorXd>& target,
                             const Eigen::Ref<const Eigen::MatrixXd>& donors, const SolverOptions& options) {
  const Eigen::Index k = donors.rows();
  if (k < 1) throw std::invalid_argument("solve_weights needs at least one donor");
  if (donors.cols() != target.size()) throw std::invalid_argument("donor and target dimensions disagree");
  if (!target.allFinite() || !donors.allFinite()) throw std::invalid_argument("non-finite solver input");

  // Donors relative to the target: the residual is -points^T w.
  const Eigen::MatrixXd points = donors.rowwise() - target.transpose();

  SimplexWeights out;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  std::vector<Eigen::Index> active(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) active[static_cast<std::size_t>(i)] = i;

  const auto current_point = [&]() -> Eigen::VectorXd { return points.transpose() * w; };
  const auto record = [&](const Eigen::VectorXd& x) {
    if (options.record_history) out.history.push_back(x.norm());
  };

  if (k == 1 || points.cols() == 0) {
    out.converged = true;
  } else {
    bool fresh_vertex = false;  // the last active entry was just added at weight 0
    while (out.iterations < options.max_iter) {
      // Minor cycle: move to the affine minimizer of the active set, dropping
      // vertices whose weight would turn negative.
      bool stalled = false;
      while (out.iterations < options.max_iter) {
        ++out.iterations;
        const Eigen::VectorXd alpha = affine_minimizer(points, active);
        if ((alpha.array() > 0.0).all()) {
          for (std::size_t i = 0; i < active.size(); ++i) w[active[i]] = alpha[static_cast<Eigen::Index>(i)];
          record(current_point());
          break;
        }
        double theta = 1.0;
        std::size_t blocking = active.size();  // none: the full step is feasible
        for (std::size_t i = 0; i < active.size(); ++i) {
          const double a = alpha[static_cast<Eigen::Index>(i)];
          if (a > 0.0) continue;
          const double wi = w[active[i]];
          const double step = wi / (wi - a);
          if (step < theta) {
            theta = step;
            blocking = i;
          }
        }
        if (theta <= 0.0 && fresh_vertex && blocking + 1 == active.size()) {
          // The new vertex cannot enter: no descent available numerically.
          stalled = true;
        }
        for (std::size_t i = 0; i < active.size(); ++i) {
          const Eigen::Index j = active[i];
          w[j] = theta * alpha[static_cast<Eigen::Index>(i)] + (1.0 - theta) * w[j];
        }
        if (blocking < active.size()) w[active[blocking]] = 0.0;
        std::vector<Eigen::Index> kept;
        kept.reserve(active.size());
        for (Eigen::Index j : active) {
          if (w[j] > 0.0) {
            kept.push_back(j);
          } else {
            w[j] = 0.0;
          }
        }
        active.swap(kept);
        fresh_vertex = false;
        record(current_point());
        if (stalled) break;
      }
      if (stalled) {
        out.converged = true;
        break;
      }

      // Major cycle: Frank-Wolfe vertex and gap of ||x||^2.
      const Eigen::VectorXd x = current_point();
      const Eigen::VectorXd inner = points * x;
      Eigen::Index best = 0;
      const double min_inner = inner.minCoeff(&best);
      const double gap = 2.0 * (x.squaredNorm() - min_inner);
      if (gap < options.tol) {
        out.converged = true;
        break;
      }
      if (std::find(active.begin(), active.end(), best) != active.end()) {
        // Improvement below round-off of the affine solve.
        out.converged = true;
        break;
      }
      if (out.iterations >= options.max_iter) break;
      active.push_back(best);
      fresh_vertex = true;
    }
  }

  w = w.cwiseMax(0.0);
  w /= w.sum();
  out.weights = w;
  out.objective = (target - donors.transpose() * w).norm();
  return out;
}

Eigen::VectorXd synthetic_trajectory(const SimplexWeights& weights,
                                     const Eigen::Ref<const Eigen::MatrixXd>& donor_outcomes) {
  if (weights.weights.size() != donor_outcomes.rows()) {
    throw std::invalid_argument("weights and donor outcome rows disagree");
  }
  return donor_outcomes.transpose() * weights.weights;
}

FitDiagnostics fit_diagnostics(const Eigen::Ref<const Eigen::VectorXd>& treated_outcomes,
                               const Eigen::Ref<const Eigen::VectorXd>& synthetic,
                               const std::vector<int>& relative_times) {
  if (treated_outcomes.size() != synthetic.size() ||
      static_cast<std::size_t>(treated_outcomes.size()) != relative_times.size()) {
    throw std::invalid_argument("fit_diagnostics: length mismatch");
  }
  FitDiagnostics out;
  double ss = 0.0;
  for (std::size_t j = 0; j < relative_times.size(); ++j) {
    if (relative_times[j] >= 0) continue;
    const auto i = static_cast<Eigen::Index>(j);
    const double r = treated_outcomes[i] - synthetic[i];
    out.per_period_residuals.push_back(r);
    ss += r * r;
  }
  if (out.per_period_residuals.empty()) throw std::invalid_argument("fit_diagnostics: no pre-treatment periods");
  out.rmspe_pre = std::sqrt(ss / static_cast<double>(out.per_period_residuals.size()));
  return out;
}

}  // namespace isc
