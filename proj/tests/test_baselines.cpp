#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "isc/baselines.hpp"
#include "isc/inference.hpp"
#include "oracles.hpp"

using namespace isc;
using fixture::add_unit;
using fixture::range;

namespace {

// Two periods, one treated and one control: treated gains 5 beyond the control.
PanelDataset two_by_two(double shift_treated = 0.0, double shift_control = 0.0) {
  std::vector<Observation> obs;
  add_unit(obs, "t", {0, 1}, {10 + shift_treated, 20 + shift_treated}, 1);
  add_unit(obs, "c", {0, 1}, {3 + shift_control, 8 + shift_control});
  return PanelDataset(obs);
}

}  // namespace

TEST_CASE("did on a 2x2 panel") {
  AlignOptions w;
  w.pre_max = 1;
  w.post_max = 0;
  const DidResult r = did_att(two_by_two(), {"t"}, w);
  REQUIRE(r.series.index_of(0).has_value());
  CHECK(r.series.point[*r.series.index_of(0)] == doctest::Approx(5.0));
  CHECK(r.series.point[*r.series.index_of(-1)] == 0.0);

  const DidResult shifted = did_att(two_by_two(100.0, -7.0), {"t"}, w);
  CHECK(shifted.series.point[*shifted.series.index_of(0)] == doctest::Approx(5.0));
}

TEST_CASE("did with exactly parallel pre-trends") {
  std::vector<Observation> obs;
  const auto p = range(0, 10);
  // integer-valued so every difference is exact
  const std::vector<double> common{0, 3, 1, 4, 1, 5, 9, 2, 6, 5};
  for (int u = 0; u < 12; ++u) {
    const double level = u * 1.5;
    std::vector<double> y;
    const int t0 = u < 4 ? 6 : -1;
    for (int t : p) y.push_back(level + common[static_cast<std::size_t>(t)] + (t0 >= 0 && t >= t0 ? 2.0 + u : 0.0));
    add_unit(obs, "u" + std::to_string(u), p, y, t0);
  }
  const PanelDataset ds(obs);
  const std::vector<UnitId> treated{"u0", "u1", "u2", "u3"};
  AlignOptions w;
  w.pre_max = 5;
  w.post_max = 3;
  const DidResult r = did_att(ds, treated, w);
  for (std::size_t j = 0; j < r.series.relative_times.size(); ++j) {
    const int t = r.series.relative_times[j];
    if (t < 0) CHECK(r.series.point[j] == 0.0);
    if (t >= 0) CHECK(r.series.point[j] == doctest::Approx(2.0 + 1.5));
  }
  BootstrapConfig cfg;
  cfg.replicates = 200;
  const auto boot = bootstrap_ci(r.effects, cfg, Method::DID);
  const PretrendResult pt = pretrend_test(r.series, boot.replicates, {-1});
  CHECK(pt.statistic == 0.0);
  CHECK(pt.p_value == 1.0);
}

TEST_CASE("logistic score equations hold at the fit") {
  std::mt19937_64 rng(43);
  const Eigen::MatrixXd x = oracle::random_matrix(rng, 400, 2);
  Eigen::VectorXd y(400);
  std::uniform_real_distribution<double> u(0, 1);
  for (Eigen::Index i = 0; i < 400; ++i) y[i] = u(rng) < 1.0 / (1.0 + std::exp(-(0.3 + x(i, 0) - 0.5 * x(i, 1)))) ? 1 : 0;
  const LogisticFit fit = fit_logistic(x, y);
  REQUIRE(fit.converged);
  CHECK_FALSE(fit.separation);
  const Eigen::VectorXd p = predict_logistic(fit, x);
  CHECK(std::abs((y - p).sum()) < 1e-8);
  CHECK(std::abs(x.col(0).dot(y - p)) < 1e-8);
  CHECK(std::abs(x.col(1).dot(y - p)) < 1e-8);

  Eigen::VectorXd sep(400);
  for (Eigen::Index i = 0; i < 400; ++i) sep[i] = x(i, 0) > 0 ? 1 : 0;
  CHECK(fit_logistic(x, sep).separation);
}

TEST_CASE("psm pairs treated with the nearest score") {
  std::vector<Observation> obs;
  const auto p = range(0, 6);
  // treated covariate 1.0; controls at 1.0 and 3.0
  add_unit(obs, "t", p, {0, 0, 0, 10, 11, 12}, 3, 10, {1.0});
  add_unit(obs, "near", p, {0, 0, 0, 1, 1, 1}, -1, 0, {1.0});
  add_unit(obs, "far", p, {0, 0, 0, 7, 7, 7}, -1, 0, {3.0});
  add_unit(obs, "mid", p, {0, 0, 0, 5, 5, 5}, -1, 0, {0.0});
  const PanelDataset ds(obs, {"x"});
  PsmOptions opt;
  opt.post_max = 2;
  const PsmResult r = psm_att(ds, {"t"}, opt);
  REQUIRE(r.matches.size() == 1);
  CHECK(r.matches[0].second == "near");
  CHECK(r.series.relative_times == std::vector<int>{0, 1, 2});
  CHECK(r.series.point == std::vector<double>{9, 10, 11});
  CHECK(r.report.n_matched == 1);
}

TEST_CASE("psm counts caliper misses and off-support units") {
  std::vector<Observation> obs;
  const auto p = range(0, 4);
  add_unit(obs, "t_in", p, {0, 0, 1, 1}, 2, 10, {0.5});
  add_unit(obs, "t_out", p, {0, 0, 1, 1}, 2, 10, {9.0});
  for (int i = 0; i < 6; ++i) add_unit(obs, "c" + std::to_string(i), p, {0, 0, 0, 0}, -1, 0, {static_cast<double>(i)});
  const PanelDataset ds(obs, {"x"});
  PsmOptions opt;
  opt.caliper = 1e-12;
  const PsmResult r = psm_att(ds, {"t_in", "t_out"}, opt);
  CHECK(r.report.n_off_support + r.report.n_unmatched_caliper == 2);
  CHECK(r.report.n_off_support >= 1);
  CHECK(r.effects.empty());
  opt.caliper = 0.0;
  CHECK_THROWS(psm_att(ds, {"t_in"}, opt));
}

TEST_CASE("sdid time weights match a grid search") {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 20; ++rep) {
    const int n_pre = 2 + rep % 2;
    const Eigen::MatrixXd pre = oracle::random_matrix(rng, 30, n_pre);
    const Eigen::MatrixXd post = oracle::random_matrix(rng, 30, 2) + pre.col(0).replicate(1, 2);
    const TimeWeights tw = sdid_time_weights(pre, post);
    CHECK(tw.converged);
    CHECK(tw.objective == doctest::Approx(oracle::time_weight_objective(pre, post, tw.lambda)).epsilon(1e-10));
    CHECK(tw.objective <= oracle::time_weight_grid(pre, post, n_pre == 2 ? 2000 : 300) + 1e-9);
  }
}

TEST_CASE("sdid recovers a constant effect on a factor panel") {
  std::mt19937_64 rng(53);
  BalancedPanel panel;
  panel.relative_times = {-3, -2, -1, 0, 1};
  const Eigen::MatrixXd factor = oracle::random_matrix(rng, 1, 5);
  const Eigen::MatrixXd load = oracle::random_matrix(rng, 40, 1);
  panel.controls = load * factor + oracle::random_matrix(rng, 40, 1).replicate(1, 5);
  // treated units are convex mixtures of controls plus a unit shift after T0
  panel.treated = 0.5 * (panel.controls.row(0) + panel.controls.row(1));
  panel.treated.rightCols(2).array() += 4.0;
  const SdidFit fit = sdid_fit(panel);
  CHECK(fit.att == doctest::Approx(4.0).epsilon(1e-6));

  panel.controls(3, 2) = std::nan("");
  CHECK_THROWS_AS(sdid_fit(panel), UnbalancedPanelError);
}

TEST_CASE("sdid rejects unbalanced panels and groups cohorts") {
  std::vector<Observation> obs;
  const auto p = range(0, 12);
  add_unit(obs, "t1", p, fixture::line(p, 0, 1), 6);
  add_unit(obs, "t2", p, fixture::line(p, 1, 1), 7);
  add_unit(obs, "t3", p, fixture::line(p, 2, 1), 11);
  for (int i = 0; i < 5; ++i) add_unit(obs, "c" + std::to_string(i), p, fixture::line(p, i, 1));
  const PanelDataset ds(obs);
  SdidOptions opt;
  opt.pre = 3;
  opt.post = 2;
  const SdidResult r = sdid_att(ds, {"t1", "t2", "t3"}, opt);
  CHECK(r.cohorts == std::vector<std::pair<int, int>>{{6, 1}, {7, 1}});
  CHECK(r.n_dropped == 1);

  std::vector<Observation> gap = obs;
  gap.pop_back();
  CHECK_THROWS_AS(sdid_att(PanelDataset(gap), {"t1"}, opt), UnbalancedPanelError);
}
