#include "ecc/bt.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace ecc;

TEST_CASE("win probability basics") {
  std::vector<double> even{0.0, 0.0};
  CHECK(win_probability(even, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<double> skewed{0.0, std::log(3.0)};
  CHECK(win_probability(skewed, 0, 1) == doctest::Approx(0.75).epsilon(1e-12));

  // sigma(3) against an independent high-precision evaluation
  std::vector<double> three{2.0, -1.0, 0.0};
  CHECK(win_probability(three, 1, 0) ==
        doctest::Approx(0.9525741268224332).epsilon(1e-12));

  CHECK_THROWS_AS(win_probability(even, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(win_probability(even, 0, 5), std::out_of_range);
}

TEST_CASE("win probability is stable at extreme gaps") {
  std::vector<double> wide{-250.0, 250.0};
  const double p = win_probability(wide, 0, 1);
  CHECK(std::isfinite(p));
  CHECK(p > 0.999999);
  const double q = win_probability(wide, 1, 0);
  CHECK(std::isfinite(q));
  CHECK(q < 1e-100);
  CHECK(q > 0.0);
}

TEST_CASE("comparison nll") {
  std::vector<double> even{0.0, 0.0};
  CHECK(comparison_nll(even, {0, 1, 1.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(comparison_nll(even, {0, 1, 0.5}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<double> skewed{0.0, std::log(3.0)};
  CHECK(comparison_nll(skewed, {0, 1, 1.0}) ==
        doctest::Approx(0.2876820724517809).epsilon(1e-12));

  // softplus form stays finite where log(sigmoid) would underflow
  std::vector<double> wide{-400.0, 400.0};
  CHECK(comparison_nll(wide, {0, 1, 0.0}) == doctest::Approx(800.0).epsilon(1e-9));
}

TEST_CASE("per query loss is the mean of record nlls") {
  std::vector<double> even{0.0, 0.0};
  std::vector<ComparisonRecord> two{{0, 1, 1.0}, {0, 1, 0.0}};
  CHECK(per_query_loss(even, two) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<double> skewed{0.0, std::log(3.0)};
  // (-ln 0.75 - ln 0.25) / 2, both terms verified analytically
  CHECK(per_query_loss(skewed, two) ==
        doctest::Approx(0.8369882167858358).epsilon(1e-12));

  std::vector<ComparisonRecord> one{{0, 1, 1.0}};
  CHECK(per_query_loss(skewed, one) == comparison_nll(skewed, one[0]));

  CHECK_THROWS_AS(per_query_loss(even, std::span<const ComparisonRecord>{}),
                  std::invalid_argument);
}

TEST_CASE("gauge invariance of probabilities and losses") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> theta = test::random_theta(rng, 5, 4.0);
    std::vector<double> shifted = theta;
    std::uniform_real_distribution<double> unif(-10.0, 10.0);
    const double c = unif(rng);
    for (double& t : shifted) t += c;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        if (i == j) continue;
        CHECK(win_probability(theta, i, j) ==
              doctest::Approx(win_probability(shifted, i, j)).epsilon(1e-12));
        ComparisonRecord rec{i, j, 0.5};
        CHECK(comparison_nll(theta, rec) ==
              doctest::Approx(comparison_nll(shifted, rec)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("pair aggregation matches the record-by-record objective") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = test::random_instance(rng, 6, 20, 12, trial % 2 == 1);
    PairStats stats = PairStats::from_groups(inst.groups, inst.weights);
    std::vector<double> theta = test::random_theta(rng, stats.num_models(), 3.0);
    const double via_stats = stats.objective(theta, 1e-4);
    const double via_records =
        test::naive_weighted_objective(inst.groups, inst.weights, theta, 1e-4);
    CHECK(via_stats == doctest::Approx(via_records).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(13);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = test::random_instance(rng, 4 + trial % 5, 25, 8, trial % 3 == 0);
    PairStats stats = PairStats::from_groups(inst.groups, inst.weights);
    const int m = stats.num_models();
    std::vector<double> theta = test::random_theta(rng, m, 2.5);
    std::vector<double> grad(m);
    stats.gradient(theta, 1e-4, grad);
    const double h = 1e-5;
    for (int d = 0; d < m; ++d) {
      std::vector<double> plus = theta, minus = theta;
      plus[d] += h;
      minus[d] -= h;
      const double fd =
          (stats.objective(plus, 1e-4) - stats.objective(minus, 1e-4)) / (2.0 * h);
      const double scale = std::max({1e-6, std::abs(fd), std::abs(grad[d])});
      CHECK(std::abs(grad[d] - fd) / scale < 1e-5);
    }
    ++checked;
  }
  CHECK(checked == 50);
}

TEST_CASE("objective is convex along segments") {
  std::mt19937_64 rng(17);
  auto inst = test::random_instance(rng, 6, 30, 10, true);
  PairStats stats = PairStats::from_groups(inst.groups, inst.weights);
  const int m = stats.num_models();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a = test::random_theta(rng, m, 5.0);
    std::vector<double> b = test::random_theta(rng, m, 5.0);
    std::vector<double> mid(m);
    for (int d = 0; d < m; ++d) mid[d] = 0.5 * (a[d] + b[d]);
    const double lhs = stats.objective(mid, 1e-4);
    const double rhs =
        0.5 * (stats.objective(a, 1e-4) + stats.objective(b, 1e-4));
    CHECK(lhs <= rhs + 1e-10);
  }
}

TEST_CASE("two model fits match a golden-section oracle") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = test::random_instance(rng, 2, 10, 6, trial % 2 == 0);
    PairStats stats = PairStats::from_groups(inst.groups, inst.weights);
    BtFit fit = fit_bt(stats);
    // theta = (-delta/2, +delta/2); scan the gap with an independent 1-D
    // minimizer and compare objective values.
    auto objective_of_gap = [&](double delta) {
      std::vector<double> theta{-0.5 * delta, 0.5 * delta};
      return stats.objective(theta, 1e-4);
    };
    const double best_gap = test::golden_section(objective_of_gap, -60.0, 60.0);
    CHECK(fit.objective <= objective_of_gap(best_gap) + 1e-6);
    CHECK(fit.objective >= objective_of_gap(best_gap) - 1e-6);
  }
}

TEST_CASE("fit examples") {
  SUBCASE("symmetric evidence lands on the gauge origin") {
    std::vector<QueryComparisons> groups{{"q0", {{0, 1, 1.0}, {0, 1, 0.0}}}};
    std::vector<double> weights{1.0};
    BtFit fit = fit_weighted_bt(groups, weights);
    CHECK(fit.converged);
    CHECK(fit.theta[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(fit.theta[1] == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("two wins one loss") {
    std::vector<QueryComparisons> groups{{"q0", {{0, 1, 1.0}, {0, 1, 1.0}, {0, 1, 0.0}}}};
    std::vector<double> weights{1.0};
    BtFit fit = fit_weighted_bt(groups, weights);
    // Frozen from an independent Newton solve of
    // (2 softplus(-d) + softplus(d))/3 + 1e-4 d^2/2.
    CHECK(fit.theta[1] == doctest::Approx(0.3464177104089582).epsilon(1e-6));
    CHECK(fit.theta[0] == doctest::Approx(-0.3464177104089582).epsilon(1e-6));
    CHECK(fit.objective == doctest::Approx(0.6365381801405524).epsilon(1e-9));
  }
  SUBCASE("all ties pin the origin") {
    std::vector<QueryComparisons> groups{
        {"q0", {{0, 1, 0.5}, {1, 2, 0.5}}},
        {"q1", {{0, 2, 0.5}}},
    };
    std::vector<double> weights{1.0, 0.5};
    BtFit fit = fit_weighted_bt(groups, weights);
    for (double t : fit.theta) CHECK(t == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("fit rejects degenerate inputs") {
  std::vector<QueryComparisons> groups{{"q0", {{0, 1, 1.0}}}};
  std::vector<double> zero{0.0};
  CHECK_THROWS_AS(fit_weighted_bt(groups, zero), std::invalid_argument);
  std::vector<double> negative{-1.0};
  CHECK_THROWS_AS(fit_weighted_bt(groups, negative), std::invalid_argument);
}

TEST_CASE("fitted profiles are gauge fixed and finite") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = test::random_instance(rng, 5, 30, 8);
    BtFit fit = fit_weighted_bt(inst.groups, inst.weights);
    double sum = 0.0;
    for (double t : fit.theta) {
      CHECK(std::isfinite(t));
      sum += t;
    }
    CHECK(std::abs(sum) < 1e-9);
  }
}

TEST_CASE("a model that wins everything stays finite under the ridge") {
  std::vector<QueryComparisons> groups{
      {"q0", {{0, 1, 1.0}, {0, 1, 1.0}, {0, 1, 1.0}, {0, 1, 1.0}}}};
  std::vector<double> weights{1.0};
  BtFit fit = fit_weighted_bt(groups, weights);
  CHECK(std::isfinite(fit.theta[1]));
  CHECK(fit.theta[1] > 1.0);
  CHECK(fit.theta[1] < 20.0);  // ridge caps the runaway direction
}

TEST_CASE("appending a win never decreases the fitted gap") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = test::random_instance(rng, 4, 8, 6);
    BtFit before = fit_weighted_bt(inst.groups, inst.weights);
    auto grown = inst;
    grown.groups.push_back({"extra", {{0, 1, 1.0}}});
    grown.weights.push_back(1.0);
    BtFit after = fit_weighted_bt(grown.groups, grown.weights);
    const double gap_before = before.theta[1] - before.theta[0];
    const double gap_after = after.theta[1] - after.theta[0];
    CHECK(gap_after >= gap_before - 1e-9);
  }
}

TEST_CASE("warm starts land on the same optimum") {
  std::mt19937_64 rng(37);
  auto inst = test::random_instance(rng, 5, 20, 8);
  BtFit cold = fit_weighted_bt(inst.groups, inst.weights);
  BtFitConfig warm_cfg;
  warm_cfg.init = test::random_theta(rng, 5, 3.0);
  BtFit warm = fit_weighted_bt(inst.groups, inst.weights, warm_cfg);
  for (int m = 0; m < 5; ++m) {
    CHECK(warm.theta[m] == doctest::Approx(cold.theta[m]).epsilon(1e-5));
  }
}
