// Dataset ingestion, splits, comparison sampling, probe holdout, and the
// synthetic planted-cluster generator used by the verification suites.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecc/bt.hpp"

namespace ecc {

// A query with its unit-normalized embedding and an optional human label.
struct QueryRecord {
  std::string query_id;
  std::vector<double> embedding;
  std::string label;  // empty = unlabeled
};

struct Dataset {
  std::vector<std::string> models;            // index -> name
  std::vector<QueryRecord> queries;
  std::vector<QueryComparisons> comparisons;  // aligned with queries

  size_t dim() const { return queries.empty() ? 0 : queries.front().embedding.size(); }
  int num_models() const { return static_cast<int>(models.size()); }
  std::optional<size_t> find_query(const std::string& query_id) const;

  // Checks the structural invariants (alignment, index ranges, shared
  // embedding dimension, unit norms) and throws on violation.
  void validate() const;
};

// Normalizes v to unit L2 norm in place; throws on the zero vector.
void normalize_embedding(std::vector<double>& v);

struct SplitSpec {
  double cluster_fraction = 0.8;
  int comparisons_per_query = 7;
  int probes_per_test_query = 1;
  std::uint64_t seed = 0;
};

// A held-out test query: probes are reserved for responsibility inference,
// the holdout records are what predictions are scored on. The two sets are
// disjoint by construction.
struct TestEntry {
  QueryRecord query;
  std::vector<ComparisonRecord> probes;
  std::vector<ComparisonRecord> holdout;
};

struct SplitResult {
  Dataset cluster_set;  // comparisons subsampled to comparisons_per_query
  std::vector<TestEntry> test_set;
  std::vector<std::string> warnings;
};

// Deterministic (seeded) split into a clustering set and a test set. Test
// queries lacking probes_per_test_query + 1 comparisons are demoted to the
// clustering set with a warning.
SplitResult split_and_sample(const Dataset& ds, const SplitSpec& spec);

enum class TieMode { kDrop, kHalf };

// Per-model judge scores of one query.
struct ScoredQuery {
  std::string query_id;
  std::vector<double> scores;  // aligned with the dataset's model list
};

// Decomposes per-model scores into pairwise comparisons: for each unordered
// model pair (i < j), y = 1 if model j scored higher, y = 0 if lower; equal
// scores are dropped (kDrop) or emitted as ties y = 0.5 (kHalf).
std::vector<QueryComparisons> decompose_scores(std::span<const ScoredQuery> scored,
                                               TieMode tie_mode);

struct PlantedSpec {
  int k_true = 3;
  int num_models = 5;
  int num_queries = 300;
  int comps_per_query = 7;
  int dim = 16;
  double profile_scale = 3.0;
  // Expected cosine between a query embedding and its cluster direction:
  // embedding = alignment * direction + sqrt(1 - alignment^2) * unit noise,
  // renormalized.
  double embed_alignment = 0.8;
  double mixed_fraction = 0.0;  // queries drawing evidence from two clusters
  double tie_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct PlantedTruth {
  std::vector<int> labels;                      // primary cluster per query
  std::vector<int> second_labels;               // -1 unless the query is mixed
  std::vector<std::vector<double>> profiles;    // k_true x M, sum-zero rows
  std::vector<std::vector<double>> directions;  // k_true unit vectors
  // Per-query per-model quality: mean win probability against the other
  // models under the query's planted (or 50/50 mixed) profile.
  std::vector<std::vector<double>> scores;
};

// Draws a synthetic dataset with known cluster structure. Profiles are
// rejection-sampled until all pairwise profile Kendall-tau values are at
// most 0.5, so the planted orderings are genuinely distinct.
std::pair<Dataset, PlantedTruth> generate_planted(const PlantedSpec& spec);

// Replaces each probe's target with a uniform draw from {0,1} with
// probability p; deterministic given the seed.
std::vector<ComparisonRecord> corrupt_probes(std::span<const ComparisonRecord> probes,
                                             double p, std::uint64_t seed);

// ---- file formats (UTF-8, line-delimited JSON) ----
//   queries:     {"query_id": str, "embedding": [..], "label": str?}
//   comparisons: {"query_id": str, "model_i": str, "model_j": str, "y": num}
//   scores:      {"query_id": str, "scores": {model_name: num, ...}}
//   models:      {"models": [name, ...]}   (name -> index by position)

Dataset load_dataset(const std::string& queries_path,
                     const std::string& comparisons_path,
                     const std::string& models_path = "");
void save_dataset(const Dataset& ds, const std::string& queries_path,
                  const std::string& comparisons_path);

std::vector<std::string> load_models(const std::string& path);
void save_models(std::span<const std::string> models, const std::string& path);

std::vector<ScoredQuery> load_scores(const std::string& path,
                                     std::span<const std::string> models);
void save_scores(std::span<const ScoredQuery> scored,
                 std::span<const std::string> models, const std::string& path);

}  // namespace ecc
