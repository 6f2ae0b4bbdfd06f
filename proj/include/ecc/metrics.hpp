// Evaluation metrics: ranking quality gains, rank correlation, partition
// agreement, and structural analyses of hard partitions.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecc/bt.hpp"
#include "ecc/dataset.hpp"
#include "ecc/inference.hpp"

namespace ecc {

// query_id -> cluster/label id
using Partition = std::map<std::string, int>;

// Kendall tau-a between two score vectors: (concordant - discordant) over
// n choose 2; pairs tied in either vector contribute zero.
double kendall_tau(std::span<const double> a, std::span<const double> b);

// Standard adjusted Rand index from the contingency table.
double adjusted_rand_index(const Partition& a, const Partition& b);

// I(A;B) / sqrt(H(A) H(B)). Two trivial single-cluster partitions score 1;
// one trivial against a non-trivial partition scores 0.
double normalized_mutual_info(const Partition& a, const Partition& b);

// 100 * (mean(global) - mean(method)) / mean(global); requires a positive
// global mean.
double ranking_quality_gain(std::span<const double> method_losses,
                            std::span<const double> global_losses);

// Converts string labels (e.g. human taxonomy) to a dense integer partition.
Partition densify_labels(const std::map<std::string, std::string>& labels);

struct StructureReport {
  std::map<int, double> within_consistency;  // per evaluated cluster
  double within_mean = 0.0;
  double inter_similarity_mean = 0.0;  // mean pairwise profile Kendall tau
  double inter_similarity_p25 = 0.0;
  double inter_similarity_p75 = 0.0;
  std::map<int, double> cross_gap;  // per cluster, other-minus-own loss
  double cross_gap_mean = 0.0;
  double cross_gap_p25 = 0.0;
  double cross_gap_p75 = 0.0;
  std::vector<std::string> warnings;
};

// Within-cluster profile consistency: split each cluster's queries into
// `folds` folds, fit an independent BT profile per fold, average pairwise
// Kendall tau over fold pairs, then over `repeats` reshuffles. Clusters
// with fewer than `folds` queries are skipped with a warning.
std::map<int, double> within_cluster_consistency(
    const Partition& partition, const Dataset& ds, int folds, int repeats,
    std::uint64_t seed, std::vector<std::string>* warnings = nullptr,
    const BtFitConfig& bt = {});

// Per cluster: mean per-query loss of its queries under the other clusters'
// profiles (averaged over clusters) minus the loss under its own profile.
// Larger values mean better capability separation.
std::map<int, double> cross_cluster_gap(const Partition& partition,
                                        const Dataset& ds,
                                        const BtFitConfig& bt = {});

// Full structure analysis of a hard partition.
StructureReport structure_report(const Partition& partition, const Dataset& ds,
                                 int folds = 5, int repeats = 10,
                                 std::uint64_t seed = 0, const BtFitConfig& bt = {});

struct EvalOptions {
  SignalVariant signal = SignalVariant::kEmbeddingPlusProbe;
  int probes_per_query = 1;     // capped at what each test entry provides
  double corrupt_p = 0.0;       // probe label randomization probability
  std::uint64_t seed = 0;       // seeds the probe corruption
};

struct EvalReport {
  std::map<std::string, double> per_query_loss_method;
  std::map<std::string, double> per_query_loss_global;
  double gain_percent = 0.0;
  std::optional<StructureReport> structure;
};

// Evaluates mixture predictions on held-out comparisons of the test entries
// against the global BT baseline.
EvalReport evaluate_ranking(const EccModel& model,
                            std::span<const double> global_profile,
                            std::span<const TestEntry> tests,
                            const EvalOptions& options = {});

}  // namespace ecc
