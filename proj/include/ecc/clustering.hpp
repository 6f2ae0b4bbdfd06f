// Evidence-calibrated clustering: alternating optimization of semantic
// centroids, per-cluster capability profiles and soft responsibilities,
// plus the two degenerate baselines (embedding-only, comparison-only).

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecc/bt.hpp"
#include "ecc/dataset.hpp"

namespace ecc {

enum class ClusterMode { kEcc, kEmbeddingOnly, kComparisonOnly };

std::string to_string(ClusterMode mode);
ClusterMode cluster_mode_from_string(const std::string& name);

// One cluster: unit semantic centroid plus capability profile over models.
struct ClusterModel {
  std::vector<double> centroid;
  std::vector<double> profile;
};

struct EccModel {
  std::vector<ClusterModel> clusters;
  double lambda = 3.0;
  double temperature = 0.1;
  ClusterMode mode = ClusterMode::kEcc;
  int num_models = 0;
  std::vector<std::string> query_ids;                 // training row order
  std::vector<std::vector<double>> responsibilities;  // |Q| x K rows on simplex

  int k() const { return static_cast<int>(clusters.size()); }
  size_t dim() const { return clusters.empty() ? 0 : clusters.front().centroid.size(); }
};

struct FitRound {
  double objective = 0.0;  // optimized objective: weighted combined loss
                           // + profile ridge - temperature * entropy
  double mean_kl = 0.0;    // mean row KL against the previous responsibilities
  double max_centroid_shift = 0.0;
};

struct FitTrace {
  std::vector<FitRound> rounds;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct EccFitConfig {
  ClusterMode mode = ClusterMode::kEcc;
  int max_rounds = 200;
  double kl_tol = 1e-3;        // mean responsibility KL threshold
  double centroid_tol = 1e-4;  // max centroid shift threshold
  std::uint64_t seed = 0;
  BtFitConfig bt;
  // Optional explicit initialization (rows on the simplex); overrides the
  // seeded Dirichlet draw. Used by equivariance tests.
  std::vector<std::vector<double>> initial_responsibilities;
};

// Per-query combined loss against one cluster: mean comparison NLL under the
// cluster profile plus lambda times the negated embedding-centroid cosine.
// An empty record list contributes no comparison term (embedding-only mode).
double combined_loss(const QueryRecord& query,
                     std::span<const ComparisonRecord> records,
                     const ClusterModel& cluster, double lambda);

// Closed-form responsibility update: row-wise softmax of -losses/temperature,
// computed with row-max subtraction. Rows of `losses` are per-query, columns
// per-cluster.
std::vector<std::vector<double>> update_responsibilities(
    const std::vector<std::vector<double>>& losses, double temperature);

// Normalized responsibility-weighted mean of the query embeddings. Returns
// nothing when the weight mass or the mean vector degenerates; callers keep
// the previous centroid in that case.
std::optional<std::vector<double>> update_centroid(
    std::span<const QueryRecord> queries, std::span<const double> weights);

// Runs the full alternating optimization from a seeded random-Dirichlet
// initialization until the responsibilities and centroids stabilize.
std::pair<EccModel, FitTrace> fit(const Dataset& ds, int k, double lambda,
                                  double temperature, const EccFitConfig& config = {});

// Unit-weight BT fit over all queries: the global baseline.
std::vector<double> fit_global_bt(const Dataset& ds, const BtFitConfig& config = {});

// Re-fits every cluster profile against the dataset with the model's stored
// responsibilities frozen. Used to attach capability profiles to an
// embedding-only clustering before mixture evaluation.
void fit_cluster_profiles(EccModel& model, const Dataset& ds,
                          const BtFitConfig& config = {});

// Arg-max responsibility per training query; ties break to the lowest index.
std::map<std::string, int> hard_partition(const EccModel& model);

}  // namespace ecc
