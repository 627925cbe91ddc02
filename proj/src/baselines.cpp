#include "isc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace isc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool finite_all(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Covariates at the last period before `limit` (exclusive) with all values present.
const std::vector<double>* last_complete_covariates(const UnitRecord& u, int limit) {
  for (std::size_t i = u.periods.size(); i-- > 0;) {
    if (u.periods[i] >= limit) continue;
    if (finite_all(u.covariates[i])) return &u.covariates[i];
  }
  return nullptr;
}

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double tol, int max_iter) {
  const Eigen::Index n = x.rows();
  if (y.size() != n) throw std::invalid_argument("logistic regression: row mismatch");
  Eigen::MatrixXd design(n, x.cols() + 1);
  design << Eigen::VectorXd::Ones(n), x;

  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(design.cols());
  for (fit.iterations = 1; fit.iterations <= max_iter; ++fit.iterations) {
    const Eigen::VectorXd p = (design * fit.coef).unaryExpr(&logistic);
    const Eigen::VectorXd w = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    const Eigen::VectorXd grad = design.transpose() * (y - p);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite()) break;
    fit.coef += step;
    if (step.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = std::min(fit.iterations, max_iter);
  const Eigen::VectorXd eta = design * fit.coef;
  const bool saturated = (eta.array().abs() > 18.0).any();
  fit.separation = saturated || !fit.converged || !fit.coef.allFinite();
  if (fit.separation) fit.converged = fit.converged && !saturated;
  return fit;
}

Eigen::VectorXd predict_logistic(const LogisticFit& fit, const Eigen::MatrixXd& x) {
  if (x.cols() + 1 != fit.coef.size()) throw std::invalid_argument("logistic prediction: column mismatch");
  return ((x * fit.coef.tail(x.cols())).array() + fit.coef[0]).matrix().unaryExpr(&logistic);
}

PsmResult psm_att(const PanelDataset& dataset, const std::vector<UnitId>& treated, const PsmOptions& options) {
  if (!(options.caliper > 0.0)) throw std::invalid_argument("caliper must be positive");
  PsmResult out;
  out.report.n_treated = static_cast<int>(treated.size());
  const auto dim = static_cast<Eigen::Index>(dataset.covariate_dim());

  std::vector<const UnitRecord*> t_units, c_units;
  std::vector<const std::vector<double>*> t_cov, c_cov;
  for (const auto& id : treated) {
    const UnitRecord& u = dataset.unit(id);
    if (!u.treated()) throw std::invalid_argument("psm: unit " + id + " is not treated");
    const auto* cov = last_complete_covariates(u, *u.t0);
    if (!cov) {
      ++out.report.n_missing_covariates;
      continue;
    }
    t_units.push_back(&u);
    t_cov.push_back(cov);
  }
  for (const auto& u : dataset.units()) {
    if (u.treated()) continue;
    const auto* cov = last_complete_covariates(u, std::numeric_limits<int>::max());
    if (!cov) continue;
    c_units.push_back(&u);
    c_cov.push_back(cov);
  }
  if (t_units.empty() || c_units.empty()) {
    out.series = att(out.effects, Method::PSM);
    return out;
  }

  const auto n1 = static_cast<Eigen::Index>(t_units.size());
  const auto n0 = static_cast<Eigen::Index>(c_units.size());
  Eigen::MatrixXd x(n1 + n0, dim);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n1 + n0);
  for (Eigen::Index i = 0; i < n1; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) x(i, k) = (*t_cov[static_cast<std::size_t>(i)])[static_cast<std::size_t>(k)];
    y[i] = 1.0;
  }
  for (Eigen::Index i = 0; i < n0; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) x(n1 + i, k) = (*c_cov[static_cast<std::size_t>(i)])[static_cast<std::size_t>(k)];
  }
  const LogisticFit fit = fit_logistic(x, y);
  out.report.converged = fit.converged;
  out.report.separation = fit.separation;
  const Eigen::VectorXd score = predict_logistic(fit, x);
  const Eigen::VectorXd ctrl_score = score.tail(n0);
  const double lo = ctrl_score.minCoeff();
  const double hi = ctrl_score.maxCoeff();

  for (Eigen::Index i = 0; i < n1; ++i) {
    const double pt = score[i];
    if (pt < lo || pt > hi) {
      ++out.report.n_off_support;
      continue;
    }
    Eigen::Index best = 0;
    const double gap = (ctrl_score.array() - pt).abs().minCoeff(&best);
    if (gap > options.caliper) {
      ++out.report.n_unmatched_caliper;
      continue;
    }
    const UnitRecord& tu = *t_units[static_cast<std::size_t>(i)];
    const UnitRecord& cu = *c_units[static_cast<std::size_t>(best)];
    out.matches.emplace_back(tu.id, cu.id);
    ++out.report.n_matched;

    UnitEffect e;
    e.unit_id = tu.id;
    for (int t = 0; t <= options.post_max; ++t) {
      const int period = *tu.t0 + t;
      const double diff = tu.outcome_at(period) - cu.outcome_at(period);
      if (!std::isfinite(diff)) continue;
      e.relative_times.push_back(t);
      e.values.push_back(diff);
    }
    out.effects.push_back(std::move(e));
  }
  out.series = att(out.effects, Method::PSM);
  return out;
}

DidResult did_att(const PanelDataset& dataset, const std::vector<UnitId>& treated, const AlignOptions& window) {
  DidResult out;
  std::vector<const UnitRecord*> controls;
  for (const auto& u : dataset.units()) {
    if (!u.treated()) controls.push_back(&u);
  }
  // Mean control change between two calendar periods; NaN when no control
  // is observed at both.
  std::map<std::pair<int, int>, double> cache;
  const auto control_change = [&](int base, int period) {
    const auto key = std::make_pair(base, period);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
    double sum = 0.0;
    int n = 0;
    for (const auto* c : controls) {
      const double d = c->outcome_at(period) - c->outcome_at(base);
      if (std::isfinite(d)) {
        sum += d;
        ++n;
      }
    }
    const double v = n > 0 ? sum / n : kNaN;
    cache.emplace(key, v);
    return v;
  };

  for (const auto& id : treated) {
    const UnitRecord& u = dataset.unit(id);
    if (!u.treated()) throw std::invalid_argument("did: unit " + id + " is not treated");
    const int base = *u.t0 - 1;
    const double y_base = u.outcome_at(base);
    if (!std::isfinite(y_base)) {
      ++out.n_missing_base;
      continue;
    }
    UnitEffect e;
    e.unit_id = id;
    for (int t = -window.pre_max; t <= window.post_max; ++t) {
      const int period = *u.t0 + t;
      const double y = u.outcome_at(period);
      if (!std::isfinite(y)) continue;
      const double cc = control_change(base, period);
      if (!std::isfinite(cc)) continue;
      e.relative_times.push_back(t);
      e.values.push_back((y - y_base) - cc);
    }
    out.effects.push_back(std::move(e));
  }
  out.series = att(out.effects, Method::DID);
  return out;
}

TimeWeights sdid_time_weights(const Eigen::MatrixXd& control_pre, const Eigen::MatrixXd& control_post,
                              const SolverOptions& options) {
  if (control_pre.rows() < 1 || control_pre.cols() < 1 || control_post.cols() < 1) {
    throw std::invalid_argument("time weights need >= 1 control, pre period and post period");
  }
  if (control_pre.rows() != control_post.rows()) throw std::invalid_argument("time weights: control count mismatch");
  const Eigen::VectorXd post_mean = control_post.rowwise().mean();
  const Eigen::RowVectorXd pre_col_mean = control_pre.colwise().mean();
  const double post_center = post_mean.mean();
  const Eigen::VectorXd target = post_mean.array() - post_center;
  const Eigen::MatrixXd centered = control_pre.rowwise() - pre_col_mean;

  const SimplexWeights w = solve_weights(target, centered.transpose(), options);
  TimeWeights out;
  out.lambda = w.weights;
  out.intercept = post_center - pre_col_mean.dot(w.weights);
  out.iterations = w.iterations;
  out.converged = w.converged;
  const Eigen::VectorXd resid = (control_pre * out.lambda).array() + out.intercept - post_mean.array();
  out.objective = resid.squaredNorm();
  return out;
}

Eigen::Index BalancedPanel::n_pre() const {
  return static_cast<Eigen::Index>(
      std::count_if(relative_times.begin(), relative_times.end(), [](int t) { return t < 0; }));
}

SdidFit sdid_fit(const BalancedPanel& panel, const SolverOptions& options) {
  const Eigen::Index n_pre = panel.n_pre();
  const auto T = static_cast<Eigen::Index>(panel.relative_times.size());
  const Eigen::Index n_post = T - n_pre;
  if (n_pre < 1 || n_post < 1) throw std::invalid_argument("SDID needs pre and post periods");
  if (panel.treated.rows() < 1 || panel.controls.rows() < 1) throw std::invalid_argument("SDID needs treated and controls");
  if (!panel.treated.allFinite() || !panel.controls.allFinite()) {
    throw UnbalancedPanelError("SDID requires a strongly balanced panel (no missing outcomes)");
  }

  SdidFit fit;
  const Eigen::VectorXd treated_pre_mean = panel.treated.leftCols(n_pre).colwise().mean().transpose();
  fit.unit_weights = solve_weights(treated_pre_mean, panel.controls.leftCols(n_pre), options);
  fit.time_weights = sdid_time_weights(panel.controls.leftCols(n_pre), panel.controls.rightCols(n_post), options);

  const Eigen::VectorXd& lambda = fit.time_weights.lambda;
  const Eigen::RowVectorXd synthetic = fit.unit_weights.weights.transpose() * panel.controls;
  const double synthetic_pre = synthetic.head(n_pre).dot(lambda);

  double total = 0.0;
  for (Eigen::Index l = 0; l < panel.treated.rows(); ++l) {
    const double treated_pre = panel.treated.row(l).head(n_pre).dot(lambda);
    UnitEffect e;
    e.unit_id = panel.treated_ids.empty() ? std::to_string(l) : panel.treated_ids[static_cast<std::size_t>(l)];
    e.relative_times = panel.relative_times;
    for (Eigen::Index s = 0; s < T; ++s) {
      const double v = (panel.treated(l, s) - treated_pre) - (synthetic[s] - synthetic_pre);
      e.values.push_back(v);
      if (s >= n_pre) total += v;
    }
    fit.effects.push_back(std::move(e));
  }
  fit.att = total / static_cast<double>(panel.treated.rows() * n_post);
  return fit;
}

SdidResult sdid_att(const PanelDataset& dataset, const std::vector<UnitId>& treated, const SdidOptions& options) {
  if (options.pre < 1 || options.post < 1) throw std::invalid_argument("SDID window must be positive");
  std::set<int> all_periods;
  for (const auto& u : dataset.units()) all_periods.insert(u.periods.begin(), u.periods.end());
  for (const auto& u : dataset.units()) {
    if (u.periods.size() != all_periods.size()) {
      throw UnbalancedPanelError("SDID requires a strongly balanced panel: unit " + u.id + " is observed in " +
                                 std::to_string(u.periods.size()) + " of " + std::to_string(all_periods.size()) +
                                 " periods");
    }
    for (std::size_t i = 0; i < u.outcomes.size(); ++i) {
      if (!std::isfinite(u.outcomes[i])) {
        throw UnbalancedPanelError("SDID requires a strongly balanced panel: unit " + u.id +
                                   " has a missing outcome at period " + std::to_string(u.periods[i]));
      }
    }
  }

  std::map<int, std::vector<const UnitRecord*>> cohorts;
  for (const auto& id : treated) {
    const UnitRecord& u = dataset.unit(id);
    if (!u.treated()) throw std::invalid_argument("sdid: unit " + id + " is not treated");
    cohorts[*u.t0].push_back(&u);
  }
  std::vector<const UnitRecord*> controls;
  for (const auto& u : dataset.units()) {
    if (!u.treated()) controls.push_back(&u);
  }

  SdidResult out;
  for (const auto& [t0, members] : cohorts) {
    const bool covered = all_periods.count(t0 - options.pre) && all_periods.count(t0 + options.post - 1);
    if (!covered || controls.empty()) {
      out.n_dropped += static_cast<int>(members.size());
      continue;
    }
    BalancedPanel panel;
    for (int t = -options.pre; t < options.post; ++t) panel.relative_times.push_back(t);
    const auto T = static_cast<Eigen::Index>(panel.relative_times.size());
    panel.treated.resize(static_cast<Eigen::Index>(members.size()), T);
    panel.controls.resize(static_cast<Eigen::Index>(controls.size()), T);
    for (std::size_t i = 0; i < members.size(); ++i) {
      panel.treated_ids.push_back(members[i]->id);
      for (Eigen::Index s = 0; s < T; ++s) {
        panel.treated(static_cast<Eigen::Index>(i), s) = members[i]->outcome_at(t0 + panel.relative_times[static_cast<std::size_t>(s)]);
      }
    }
    for (std::size_t i = 0; i < controls.size(); ++i) {
      panel.control_ids.push_back(controls[i]->id);
      for (Eigen::Index s = 0; s < T; ++s) {
        panel.controls(static_cast<Eigen::Index>(i), s) = controls[i]->outcome_at(t0 + panel.relative_times[static_cast<std::size_t>(s)]);
      }
    }
    SdidFit fit = sdid_fit(panel, options.solver);
    out.all_converged = out.all_converged && fit.unit_weights.converged && fit.time_weights.converged;
    out.cohorts.emplace_back(t0, static_cast<int>(members.size()));
    for (auto& e : fit.effects) out.effects.push_back(std::move(e));
  }
  out.series = att(out.effects, Method::SDID);
  return out;
}

}  // namespace isc
