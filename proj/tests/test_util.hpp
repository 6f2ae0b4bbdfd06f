// Shared helpers for the test suites: independent oracles and small
// generators. Everything here is deliberately implementation-independent of
// the code under test.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ecc/bt.hpp"

namespace ecc::test {

// Golden-section minimizer for smooth unimodal 1-D functions.
inline double golden_section(const std::function<double(double)>& f, double lo,
                             double hi, double tol = 1e-12) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Weighted BT objective evaluated record by record, without the pair
// aggregation used by the implementation. Serves as the independent route
// for gradient and objective checks.
inline double naive_weighted_objective(std::span<const QueryComparisons> groups,
                                       std::span<const double> weights,
                                       std::span<const double> theta, double ridge) {
  double total = 0.0;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (weights[g] <= 0.0 || groups[g].records.empty()) continue;
    double per_query = 0.0;
    for (const ComparisonRecord& rec : groups[g].records) {
      const double diff = theta[rec.j] - theta[rec.i];
      per_query += rec.y * std::log1p(std::exp(-diff)) +
                   (1.0 - rec.y) * std::log1p(std::exp(diff));
    }
    total += weights[g] * per_query / static_cast<double>(groups[g].records.size());
  }
  double sq = 0.0;
  for (double t : theta) sq += t * t;
  return total + ridge * sq;
}

// Random comparison instance: up to `max_queries` groups over `m` models.
struct RandomInstance {
  std::vector<QueryComparisons> groups;
  std::vector<double> weights;
  int num_models = 0;
};

inline RandomInstance random_instance(std::mt19937_64& rng, int m, int max_queries,
                                      int max_records_per_query, bool soft_targets = false) {
  std::uniform_int_distribution<int> n_queries(1, max_queries);
  std::uniform_int_distribution<int> n_records(1, max_records_per_query);
  std::uniform_int_distribution<int> model_pick(0, m - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RandomInstance inst;
  inst.num_models = m;
  const int q_count = n_queries(rng);
  for (int q = 0; q < q_count; ++q) {
    QueryComparisons group;
    group.query_id = "q" + std::to_string(q);
    const int r_count = n_records(rng);
    for (int r = 0; r < r_count; ++r) {
      int i = model_pick(rng), j = model_pick(rng);
      while (j == i) j = model_pick(rng);
      double y;
      if (soft_targets) {
        y = unif(rng);
      } else {
        const double u = unif(rng);
        y = u < 0.4 ? 0.0 : (u < 0.8 ? 1.0 : 0.5);
      }
      group.records.push_back({i, j, y});
    }
    inst.groups.push_back(std::move(group));
    inst.weights.push_back(unif(rng));
  }
  // Guarantee at least one positive weight.
  inst.weights.front() = std::max(inst.weights.front(), 0.1);
  return inst;
}

inline std::vector<double> random_theta(std::mt19937_64& rng, int m, double scale) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  std::vector<double> theta(m);
  for (double& t : theta) t = unif(rng);
  return theta;
}

}  // namespace ecc::test
