#include "doctest.h"

#include <random>

#include "isc/synth_optimizer.hpp"
#include "oracles.hpp"

using namespace isc;

namespace {

bool on_simplex(const Eigen::VectorXd& w) {
  return (w.array() >= 0.0).all() && std::abs(w.sum() - 1.0) < 1e-12;
}

}  // namespace

TEST_CASE("fast grid oracle agrees with the exhaustive scan") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 60; ++rep) {
    const int k = 1 + rep % 4;
    const Eigen::MatrixXd donors = oracle::random_matrix(rng, k, 3);
    const Eigen::VectorXd target = oracle::random_matrix(rng, 3, 1);
    CHECK(oracle::simplex_grid(target, donors, 40).objective ==
          doctest::Approx(oracle::simplex_grid_exhaustive(target, donors, 40)).epsilon(1e-12));
  }
}

TEST_CASE("solver is never worse than the simplex grid") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> kd(1, 4), dd(1, 6);
  for (int rep = 0; rep < 200; ++rep) {
    const int k = kd(rng), dim = dd(rng);
    const Eigen::MatrixXd donors = oracle::random_matrix(rng, k, dim);
    const Eigen::VectorXd target = oracle::random_matrix(rng, dim, 1);
    const SimplexWeights w = solve_weights(target, donors);
    CHECK(w.converged);
    CHECK(on_simplex(w.weights));
    CHECK(w.objective == doctest::Approx((target - donors.transpose() * w.weights).norm()));
    CHECK(w.objective <= oracle::simplex_grid(target, donors, 200).objective + 1e-6);
  }
}

TEST_CASE("exact donor match gets all the weight") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd donors = oracle::random_matrix(rng, 10, 8);
    const int j = rep % 10;
    const SimplexWeights w = solve_weights(donors.row(j).transpose(), donors);
    CHECK(w.weights[j] >= 1.0 - 1e-8);
    CHECK(w.objective < 1e-8);
  }
}

TEST_CASE("target inside the hull is reproduced") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd donors = oracle::random_matrix(rng, 12, 3);
  Eigen::VectorXd mix = Eigen::VectorXd::Zero(12);
  mix[0] = 0.2;
  mix[5] = 0.5;
  mix[9] = 0.3;
  const SimplexWeights w = solve_weights(donors.transpose() * mix, donors);
  CHECK(w.objective < 1e-8);
}

TEST_CASE("objective history never increases") {
  std::mt19937_64 rng(8);
  SolverOptions opt;
  opt.record_history = true;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd donors = oracle::random_matrix(rng, 60, 15);
    const Eigen::VectorXd target = oracle::random_matrix(rng, 15, 1, 2.0);
    const SimplexWeights w = solve_weights(target, donors, opt);
    REQUIRE_FALSE(w.history.empty());
    for (std::size_t i = 1; i < w.history.size(); ++i) CHECK(w.history[i] <= w.history[i - 1] + 1e-12);
  }
}

TEST_CASE("degenerate inputs") {
  Eigen::MatrixXd one(1, 2);
  one << 1, 2;
  Eigen::VectorXd target(2);
  target << 0, 0;
  const SimplexWeights w1 = solve_weights(target, one);
  CHECK(w1.weights[0] == 1.0);
  CHECK(w1.objective == doctest::Approx(std::sqrt(5.0)));

  // duplicated donors: any split is optimal, weights must stay on the simplex
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 1, 1, 1, -1, 0;
  target << 1, 1;
  const SimplexWeights w2 = solve_weights(target, dup);
  CHECK(on_simplex(w2.weights));
  CHECK(w2.weights[0] + w2.weights[1] == doctest::Approx(1.0));

  target << std::nan(""), 0;
  CHECK_THROWS(solve_weights(target, dup));
}

TEST_CASE("fit diagnostics over pre periods only") {
  Eigen::VectorXd treated(4), synthetic(4);
  treated << 1, 2, 3, 10;
  synthetic << 0, 2, 5, 0;
  const FitDiagnostics d = fit_diagnostics(treated, synthetic, {-3, -2, -1, 0});
  CHECK(d.rmspe_pre == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(d.per_period_residuals == std::vector<double>{1, 0, -2});
  CHECK_THROWS(fit_diagnostics(treated, synthetic, {0, 1, 2, 3}));
}
