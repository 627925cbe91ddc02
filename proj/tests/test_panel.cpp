#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "isc/panel.hpp"

using namespace isc;
using fixture::add_unit;
using fixture::range;

namespace {

PanelDataset small_panel() {
  std::vector<Observation> obs;
  const auto p = range(0, 10);
  add_unit(obs, "t1", p, fixture::line(p, 1.0, 0.5), 5, 12.0, {1.0});
  add_unit(obs, "c1", p, fixture::line(p, 0.0, 1.0), -1, 0.0, {2.0});
  add_unit(obs, "c2", p, fixture::line(p, 2.0, 0.0), -1, 0.0, {3.0});
  return PanelDataset(obs, {"x"});
}

}  // namespace

TEST_CASE("duplicate keys are rejected and all listed") {
  std::vector<Observation> obs;
  add_unit(obs, "a", {1, 2}, {0, 0});
  add_unit(obs, "a", {2}, {1});
  add_unit(obs, "b", {3, 3}, {0, 1});
  try {
    PanelDataset ds(obs);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(a, 2)") != std::string::npos);
    CHECK(msg.find("(b, 3)") != std::string::npos);
  }
}

TEST_CASE("covariate arity must agree") {
  std::vector<Observation> obs;
  add_unit(obs, "a", {1}, {0}, -1, 0, {1.0});
  add_unit(obs, "b", {1}, {0}, -1, 0, {1.0, 2.0});
  CHECK_THROWS_AS(PanelDataset(obs, {}), DataError);
}

TEST_CASE("units keep first-appearance order and periods sort") {
  std::vector<Observation> obs;
  add_unit(obs, "z", {3, 1, 2}, {30, 10, 20});
  add_unit(obs, "a", {1}, {5}, 1);
  const PanelDataset ds(obs);
  REQUIRE(ds.n_units() == 2);
  CHECK(ds.units()[0].id == "z");
  CHECK(ds.units()[0].periods == std::vector<int>{1, 2, 3});
  CHECK(ds.units()[0].outcomes == std::vector<double>{10, 20, 30});
  CHECK(ds.unit("a").t0 == 1);
  CHECK_FALSE(ds.unit("z").treated());
  CHECK(ds.n_observations() == 4);
  CHECK_THROWS_AS(ds.unit("nope"), DataError);
}

TEST_CASE("band edges are inclusive lower bounds") {
  TreatmentSpec spec;
  CHECK(spec.band_of(0.0) == 0);
  CHECK(spec.band_of(4.99) == 0);
  CHECK(spec.band_of(5.0) == 1);
  CHECK(spec.band_of(19.9) == 1);
  CHECK(spec.band_of(20.0) == 2);
  CHECK(spec.band_of(49.0) == 2);
  CHECK(spec.band_of(50.0) == 3);
  CHECK(spec.band_label(3) == "High");
  CHECK(spec.band_short_label(1) == "ML");
  spec.band_edges = {5, 5};
  CHECK_THROWS(spec.validate());
}

TEST_CASE("assign_bands uses hours at T0 and drops unusable hours") {
  std::vector<Observation> obs;
  add_unit(obs, "hi", {0, 1, 2}, {1, 1, 1}, 1, 60.0);
  add_unit(obs, "nan", {0, 1, 2}, {1, 1, 1}, 1, std::nan(""));
  add_unit(obs, "c", {0, 1, 2}, {1, 1, 1});
  const auto ba = assign_bands(PanelDataset(obs), TreatmentSpec{});
  CHECK(ba.dropped == std::vector<UnitId>{"nan"});
  CHECK(ba.dataset.n_units() == 2);
  CHECK(ba.dataset.unit("hi").band == 3);
  CHECK_FALSE(ba.dataset.unit("c").band.has_value());
}

TEST_CASE("eligibility filter returns a subset that meets the rules") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution miss(0.3);
  std::vector<Observation> obs;
  for (int u = 0; u < 40; ++u) {
    std::vector<int> periods;
    for (int t = 0; t < 12; ++t)
      if (!miss(rng)) periods.push_back(t);
    if (periods.empty()) periods.push_back(0);
    add_unit(obs, "u" + std::to_string(u), periods, std::vector<double>(periods.size(), 1.0), u % 2 ? 6 : -1);
  }
  const PanelDataset ds(obs);
  TreatmentSpec spec;
  spec.min_pre_periods = 4;
  spec.min_consecutive_treated = 2;
  const auto eligible = filter_eligible(ds, spec);
  for (const auto& id : eligible) {
    const UnitRecord& u = ds.unit(id);
    REQUIRE(u.treated());
    const auto pre = std::count_if(u.periods.begin(), u.periods.end(), [&](int p) { return p < *u.t0; });
    CHECK(pre >= 4);
    CHECK(u.find(*u.t0 + 1).has_value());
  }
  spec.min_consecutive_treated = 0;
  const auto looser = filter_eligible(ds, spec);
  for (const auto& id : eligible) CHECK(std::find(looser.begin(), looser.end(), id) != looser.end());
}

TEST_CASE("alignment maps calendar to relative time and keeps gaps") {
  std::vector<Observation> obs;
  add_unit(obs, "t", {1, 2, 4, 5, 6, 7}, {1, 2, 4, 5, 6, 7}, 5, 10.0);
  add_unit(obs, "c_full", range(0, 10), fixture::line(range(0, 10), 0, 1));
  add_unit(obs, "c_gap", {1, 2, 5, 6, 7}, {1, 2, 5, 6, 7});  // misses 4
  const PanelDataset ds(obs);
  AlignOptions opt;
  opt.pre_max = 3;
  opt.post_max = 1;
  const AlignedCase c = align_case(ds, "t", opt);
  CHECK(c.relative_times == std::vector<int>{-3, -1, 0, 1});
  CHECK(c.n_pre() == 2);
  CHECK(c.treated_outcomes[1] == 4.0);
  REQUIRE(c.control_ids == std::vector<UnitId>{"c_full"});
  CHECK(c.control_outcomes(0, 0) == 2.0);
  CHECK(c.column_of(-2) == std::nullopt);
  CHECK(c.column_of(0) == 2u);
}

TEST_CASE("alignment errors") {
  std::vector<Observation> obs;
  add_unit(obs, "no_t0", {0, 1, 2}, {1, 1, std::nan("")}, 2);
  add_unit(obs, "no_pre", {2, 3}, {1, 1}, 2);
  add_unit(obs, "c", {0, 1}, {1, 1});
  const PanelDataset ds(obs);
  CHECK_THROWS_AS(align_case(ds, "no_t0"), AlignmentError);
  CHECK_THROWS_AS(align_case(ds, "no_pre"), AlignmentError);
  CHECK_THROWS_AS(align_case(ds, "c"), AlignmentError);

  std::vector<Observation> obs2;
  add_unit(obs2, "t", {0, 1, 2}, {1, 1, 1}, 2);
  add_unit(obs2, "c", {0, 1}, {1, 1});
  try {
    align_case(PanelDataset(obs2), "t");
    FAIL("expected EmptyDonorPoolError");
  } catch (const EmptyDonorPoolError& e) {
    CHECK(e.treated_id == "t");
  }
}

TEST_CASE("stratum matching restricts controls") {
  std::vector<Observation> obs;
  const auto p = range(0, 5);
  add_unit(obs, "t", p, {1, 1, 1, 1, 1}, 3, 10, {}, "female");
  add_unit(obs, "cf", p, {1, 1, 1, 1, 1}, -1, 0, {}, "female");
  add_unit(obs, "cm", p, {1, 1, 1, 1, 1}, -1, 0, {}, "male");
  const PanelDataset ds(obs);
  AlignOptions opt;
  CHECK(align_case(ds, "t", opt).n_controls() == 2);
  opt.match_stratum = true;
  CHECK(align_case(ds, "t", opt).control_ids == std::vector<UnitId>{"cf"});
}

TEST_CASE("alignment is idempotent through case_to_panel") {
  const PanelDataset ds = small_panel();
  const AlignedCase a = align_case(ds, "t1");
  const AlignedCase b = align_case(case_to_panel(a), "t1");
  CHECK(a.relative_times == b.relative_times);
  CHECK(a.control_ids == b.control_ids);
  CHECK(a.treated_outcomes == b.treated_outcomes);
  CHECK(a.control_outcomes == b.control_outcomes);
  CHECK(a.treated_covariates == b.treated_covariates);
  CHECK(a.control_covariates == b.control_covariates);
}

TEST_CASE("deflator scales by base over period index") {
  const PanelDataset ds = small_panel();
  std::map<int, double> ones;
  for (int t = 0; t < 10; ++t) ones[t] = 1.0;
  const PanelDataset same = apply_deflator(ds, ones, 3);
  CHECK(same.unit("c1").outcomes == ds.unit("c1").outcomes);

  std::map<int, double> idx = ones;
  idx[7] = 2.0;
  const PanelDataset half = apply_deflator(ds, idx, 3);
  CHECK(half.unit("c1").outcome_at(7) == doctest::Approx(ds.unit("c1").outcome_at(7) / 2.0));
  CHECK(half.unit("c1").outcome_at(6) == ds.unit("c1").outcome_at(6));

  idx[7] = -1.0;
  CHECK_THROWS_AS(apply_deflator(ds, idx, 3), DataError);
  idx.erase(7);
  CHECK_THROWS_AS(apply_deflator(ds, idx, 3), DataError);
  CHECK_THROWS_AS(apply_deflator(ds, ones, 99), DataError);
}

TEST_CASE("trimming marks pooled tails missing") {
  std::vector<Observation> obs;
  std::vector<double> y;
  for (int i = 0; i < 101; ++i) y.push_back(i);
  add_unit(obs, "a", range(0, 101), y);
  const PanelDataset t = trim_outcomes(PanelDataset(obs), 0.01, 0.99);
  const auto& out = t.unit("a").outcomes;
  CHECK(std::isnan(out[0]));
  CHECK(out[1] == 1.0);
  CHECK(out[99] == 99.0);
  CHECK(std::isnan(out[100]));
}
