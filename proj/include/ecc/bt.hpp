// Bradley-Terry probabilities, losses and weighted maximum-likelihood fitting.
// This is the convex inner solver used by the clustering, inference and
// insertion code.

#pragma once

#include <span>
#include <string>
#include <vector>

namespace ecc {

// One pairwise outcome between two models on a query. The soft target y
// encodes the judgment: 1 = model j preferred, 0 = model i preferred,
// 0.5 = tie. Any value in [0,1] is accepted.
struct ComparisonRecord {
  int i = 0;
  int j = 0;
  double y = 0.0;
};

// All comparisons of a single query. They are kept together because the
// per-query loss normalizes by the number of records.
struct QueryComparisons {
  std::string query_id;
  std::vector<ComparisonRecord> records;
};

// Numerically stable logistic function; safe for |x| up to several hundred.
double stable_sigmoid(double x);

// log(1 + exp(x)) without overflow or catastrophic cancellation.
double softplus(double x);

// P(model j preferred over model i) = sigmoid(theta[j] - theta[i]).
double win_probability(std::span<const double> theta, int i, int j);

// Negative log-likelihood of one comparison under theta, computed in
// softplus form (never as log of a computed sigmoid).
double comparison_nll(std::span<const double> theta, const ComparisonRecord& rec);

// Mean comparison_nll over the records of one query. Throws on empty input.
double per_query_loss(std::span<const double> theta,
                      std::span<const ComparisonRecord> records);

// Sufficient statistics of a weighted comparison set. The weighted BT loss
// depends on the records only through, per model pair, the accumulated
// "j preferred" and "i preferred" mass, so objective and gradient
// evaluations cost O(M^2) regardless of the number of records.
class PairStats {
 public:
  explicit PairStats(int num_models);

  // weights[g] multiplies the per-query loss of groups[g] (so every record
  // of a group contributes weight/|records| mass).
  static PairStats from_groups(std::span<const QueryComparisons> groups,
                               std::span<const double> weights);

  // Adds one record with the given mass.
  void add(const ComparisonRecord& rec, double mass);

  int num_models() const { return num_models_; }
  double total_mass() const { return total_mass_; }

  // Weighted loss plus ridge * ||theta||^2.
  double objective(std::span<const double> theta, double ridge) const;
  void gradient(std::span<const double> theta, double ridge,
                std::span<double> out) const;
  // Dense M x M Hessian (row-major) of the objective.
  void hessian(std::span<const double> theta, double ridge,
               std::span<double> out) const;

 private:
  int num_models_ = 0;
  double total_mass_ = 0.0;
  std::vector<double> win_mass_;   // [i*M+j], i<j: mass preferring j
  std::vector<double> lose_mass_;  // [i*M+j], i<j: mass preferring i
};

struct BtFitConfig {
  double ridge = 1e-4;
  double grad_tol = 1e-8;
  int max_iters = 500;
  std::vector<double> init;  // warm start; empty means all zeros
};

struct BtFit {
  std::vector<double> theta;  // gauge-fixed: entries sum to zero
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes sum_q weights[q] * per_query_loss(theta, groups[q]) plus
// ridge * ||theta||^2, then projects the solution to sum zero. The problem
// is convex; a damped Newton iteration with backtracking line search is run
// until the gradient norm falls below grad_tol.
BtFit fit_weighted_bt(std::span<const QueryComparisons> groups,
                      std::span<const double> weights,
                      const BtFitConfig& config = {});

BtFit fit_bt(const PairStats& stats, const BtFitConfig& config = {});

}  // namespace ecc
