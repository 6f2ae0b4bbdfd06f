// Downstream drivers: guided query routing and sample-efficient insertion of
// a new model into an existing clustering.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecc/clustering.hpp"
#include "ecc/inference.hpp"

namespace ecc {

// Strategy keys used in RoutingResult: "ecc", "global_top", "random",
// "oracle_best".
struct RoutingResult {
  std::vector<std::string> query_ids;
  std::map<std::string, std::vector<int>> choices;
  std::map<std::string, std::vector<double>> achieved;
  std::map<std::string, double> mean_quality;
};

// Routes each test query: draws one probe from its held comparisons, infers
// responsibilities (embedding + probe), and picks the top-ranked model.
// `scores` holds the per-model response quality used for grading, aligned
// with `tests`.
RoutingResult route(const EccModel& model, std::span<const double> global_profile,
                    std::span<const TestEntry> tests,
                    std::span<const std::vector<double>> scores, std::uint64_t seed);

// Answers a requested comparison between the new model and an opponent on a
// query; y = 1 means the new model is preferred. Returning nothing makes the
// selection loop move on to another query.
using NewModelOracle =
    std::function<std::optional<double>(const std::string& query_id, int opponent)>;

struct InsertionConfig {
  int budget = 50;
  std::uint64_t seed = 0;
  BtFitConfig bt;
};

struct AcquiredComparison {
  std::string query_id;
  int opponent = 0;
  double y = 0.0;
};

struct InsertionResult {
  EccModel extended;  // clusters and responsibilities untouched; profiles
                      // have one new trailing entry and are refit
  std::vector<double> extended_global;  // budget-matched global BT baseline
  std::vector<AcquiredComparison> acquired;
  int budget_used = 0;
  // Ranking-quality gain on eval entries whose holdout involves the new
  // model; NaN when no eval entries were supplied.
  double gain_percent = std::numeric_limits<double>::quiet_NaN();
};

// Extends every profile with the new model (index M), acquires `budget`
// comparisons one per selected query (opponent = median-ranked old model
// under the query's mixture ranking), then refits profiles with frozen
// responsibilities. eval_entries may be empty; their holdout records should
// reference the new model for the gain to be meaningful.
InsertionResult insert_new_model(const EccModel& model, const Dataset& cluster_set,
                                 const NewModelOracle& oracle,
                                 const InsertionConfig& config,
                                 std::span<const TestEntry> eval_entries = {});

}  // namespace ecc
