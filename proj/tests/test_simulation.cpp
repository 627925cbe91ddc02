#include "doctest.h"

#include <cmath>

#include "isc/simulation.hpp"

using namespace isc;

namespace {

SimConfig small_config(std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_units = 120;
  cfg.n_subpops = 4;
  cfg.n_treated = 20;
  cfg.n_steps = 30;
  cfg.t0_step = 15;
  cfg.seed = seed;
  return cfg;
}

bool same_panel(const PanelDataset& a, const PanelDataset& b) {
  if (a.n_units() != b.n_units()) return false;
  for (std::size_t i = 0; i < a.n_units(); ++i) {
    const auto &u = a.units()[i], &v = b.units()[i];
    if (u.id != v.id || u.periods != v.periods || u.outcomes != v.outcomes || u.covariates != v.covariates ||
        u.hours != v.hours || u.t0 != v.t0 || u.stratum != v.stratum) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("same seed, same panel; different seed, different panel") {
  const PanelDataset a = generate_population(small_config(5));
  const PanelDataset b = generate_population(small_config(5));
  const PanelDataset c = generate_population(small_config(6));
  CHECK(same_panel(a, b));
  CHECK_FALSE(same_panel(a, c));
  CHECK(a.n_units() == 120);
  CHECK(a.n_observations() == 120u * 30u);
  CHECK(a.covariate_names() == std::vector<std::string>{"drift_proxy", "volatility_proxy"});
}

TEST_CASE("treated count, onset and hours levels") {
  const SimConfig cfg = small_config(1);
  const PanelDataset ds = generate_population(cfg);
  int treated = 0;
  for (const auto& u : ds.units()) {
    CHECK(u.outcomes.front() == 0.0);
    CHECK((u.stratum == "female" || u.stratum == "male"));
    if (!u.treated()) continue;
    ++treated;
    CHECK(*u.t0 == 15);
    const double h = u.hours[15];
    CHECK(std::find(cfg.hours_levels.begin(), cfg.hours_levels.end(), h) != cfg.hours_levels.end());
  }
  CHECK(treated == 20);
}

TEST_CASE("zero drift and zero volatility give flat trajectories") {
  SimConfig cfg = small_config(2);
  cfg.subpop_params.assign(4, SubpopParams{0.0, 0.0});
  cfg.treatment_down_prob_shift = 0.0;
  const PanelDataset ds = generate_population(cfg);
  for (const auto& u : ds.units())
    for (double y : u.outcomes) CHECK(y == 0.0);
}

TEST_CASE("treated units fall behind after onset") {
  SimConfig cfg;
  cfg.seed = 3;
  const PanelDataset ds = generate_population(cfg);
  double treated_sum = 0.0, control_sum = 0.0;
  int nt = 0, nc = 0;
  for (const auto& u : ds.units()) {
    const double gain = u.outcomes.back() - u.outcome_at(cfg.t0_step - 1);
    if (u.treated()) {
      treated_sum += gain;
      ++nt;
    } else {
      control_sum += gain;
      ++nc;
    }
  }
  CHECK(treated_sum / nt < control_sum / nc);
}

TEST_CASE("configuration checks") {
  SimConfig cfg = small_config(0);
  cfg.n_treated = 200;
  CHECK_THROWS(cfg.validate());
  cfg = small_config(0);
  cfg.t0_step = 0;
  CHECK_THROWS(cfg.validate());
  cfg = small_config(0);
  cfg.subpop_params.assign(3, SubpopParams{});
  CHECK_THROWS(cfg.validate());
  cfg = small_config(0);
  const auto p = cfg.resolved_params();
  REQUIRE(p.size() == 4);
  CHECK(p.front().drift == doctest::Approx(-0.5));
  CHECK(p.back().drift == doctest::Approx(0.5));
  CHECK(p.front().step_sd == doctest::Approx(0.5));
  CHECK(p.back().step_sd == doctest::Approx(2.0));
}

TEST_CASE("profiling a K grid") {
  const PanelDataset ds = generate_population(small_config(8));
  IscOptions opt;
  opt.align.pre_max = 8;
  opt.align.post_max = 4;
  const ProfileResult r = profile_k_grid(ds, {1, 5, 500}, 2, opt);
  REQUIRE(r.k_grid == std::vector<int>{1, 5, 500});
  CHECK(r.mean_rmspe[0] >= r.mean_rmspe[1] - 1e-9);
  CHECK(r.n_clamped[2] == 20);
  CHECK(r.n_clamped[0] == 0);
  int total = 0;
  for (const auto& [id, n] : r.donor_frequency[1]) total += n;
  CHECK(total == 20 * 5);
  for (double t : r.mean_exec_time) CHECK(t > 0.0);

  const ProfileResult again = profile_k_grid(ds, {1, 5, 500}, 1, opt);
  CHECK(again.mean_rmspe == r.mean_rmspe);
  CHECK(again.donor_frequency == r.donor_frequency);
  CHECK_THROWS(profile_k_grid(ds, {0}, 1, opt));
}

TEST_CASE("frequency histogram and mode") {
  const std::map<UnitId, int> f{{"a", 1}, {"b", 1}, {"c", 2}, {"d", 2}, {"e", 5}};
  CHECK(frequency_histogram(f) == std::map<int, int>{{1, 2}, {2, 2}, {5, 1}});
  CHECK(frequency_mode(f) == 1);
}
