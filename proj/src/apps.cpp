#include "ecc/apps.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ecc/metrics.hpp"

namespace ecc {

namespace {

int argmax_low_tie(std::span<const double> values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

RoutingResult route(const EccModel& model, std::span<const double> global_profile,
                    std::span<const TestEntry> tests,
                    std::span<const std::vector<double>> scores, std::uint64_t seed) {
  if (tests.size() != scores.size()) {
    throw std::invalid_argument("route: scores not aligned with test entries");
  }
  const int m = model.num_models;
  RoutingResult result;
  for (const char* key : {"ecc", "global_top", "random", "oracle_best"}) {
    result.choices[key] = {};
    result.achieved[key] = {};
  }
  const int global_top = argmax_low_tie(global_profile);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> model_pick(0, m - 1);

  for (size_t t = 0; t < tests.size(); ++t) {
    const TestEntry& entry = tests[t];
    if (static_cast<int>(scores[t].size()) != m) {
      throw std::invalid_argument("route: query " + entry.query.query_id +
                                  " is missing model scores");
    }
    for (double s : scores[t]) {
      if (!std::isfinite(s)) {
        throw std::invalid_argument("route: non-finite score for " + entry.query.query_id);
      }
    }
    // One probe drawn from the query's held comparisons, never from scores.
    std::vector<ComparisonRecord> pool = entry.probes;
    pool.insert(pool.end(), entry.holdout.begin(), entry.holdout.end());
    if (pool.empty()) {
      throw std::invalid_argument("route: query " + entry.query.query_id +
                                  " has no held comparison for the probe");
    }
    std::uniform_int_distribution<size_t> probe_pick(0, pool.size() - 1);
    InferenceSignal signal;
    signal.variant = SignalVariant::kEmbeddingPlusProbe;
    signal.probes = {pool[probe_pick(rng)]};
    const std::vector<double> r =
        infer_responsibilities(model, entry.query.embedding, signal);
    const int ecc_choice = rank_models(model, r).front();
    const int random_choice = model_pick(rng);
    const int oracle_choice = argmax_low_tie(scores[t]);

    result.query_ids.push_back(entry.query.query_id);
    result.choices["ecc"].push_back(ecc_choice);
    result.choices["global_top"].push_back(global_top);
    result.choices["random"].push_back(random_choice);
    result.choices["oracle_best"].push_back(oracle_choice);
    result.achieved["ecc"].push_back(scores[t][ecc_choice]);
    result.achieved["global_top"].push_back(scores[t][global_top]);
    result.achieved["random"].push_back(scores[t][random_choice]);
    result.achieved["oracle_best"].push_back(scores[t][oracle_choice]);
  }
  for (const auto& [key, values] : result.achieved) {
    double total = 0.0;
    for (double v : values) total += v;
    result.mean_quality[key] = values.empty() ? 0.0 : total / values.size();
  }
  return result;
}

InsertionResult insert_new_model(const EccModel& model, const Dataset& cluster_set,
                                 const NewModelOracle& oracle,
                                 const InsertionConfig& config,
                                 std::span<const TestEntry> eval_entries) {
  const size_t n = cluster_set.queries.size();
  if (model.responsibilities.size() != n) {
    throw std::invalid_argument("insert_new_model: dataset does not match model");
  }
  for (size_t q = 0; q < n; ++q) {
    if (model.query_ids[q] != cluster_set.queries[q].query_id) {
      throw std::invalid_argument("insert_new_model: query order mismatch");
    }
  }
  if (config.budget < 0 || config.budget > static_cast<int>(n)) {
    throw std::invalid_argument("insert_new_model: budget outside [0, |queries|]");
  }
  const int m_old = model.num_models;
  const int new_index = m_old;
  const int median_rank = (m_old - 1) / 2;  // lower median for even counts

  InsertionResult result;

  // Selection loop: queries in seeded shuffled order, one comparison each.
  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(n);
  for (size_t q = 0; q < n; ++q) order[q] = q;
  std::shuffle(order.begin(), order.end(), rng);

  for (size_t q : order) {
    if (static_cast<int>(result.acquired.size()) >= config.budget) break;
    const std::vector<double>& r = model.responsibilities[q];
    const std::vector<int> ranking = rank_models(model, r);
    const int opponent = ranking[median_rank];
    const std::optional<double> y =
        oracle(cluster_set.queries[q].query_id, opponent);
    if (!y.has_value()) continue;
    if (!(*y >= 0.0 && *y <= 1.0)) {
      throw std::invalid_argument("insert_new_model: oracle returned target outside [0,1]");
    }
    result.acquired.push_back({cluster_set.queries[q].query_id, opponent, *y});
  }
  if (static_cast<int>(result.acquired.size()) < config.budget) {
    throw std::runtime_error("insert_new_model: query pool exhausted after " +
                             std::to_string(result.acquired.size()) + " of " +
                             std::to_string(config.budget) + " comparisons");
  }
  result.budget_used = static_cast<int>(result.acquired.size());

  // Extended comparison groups: each acquired record joins its query's list.
  std::vector<QueryComparisons> extended = cluster_set.comparisons;
  for (const AcquiredComparison& acq : result.acquired) {
    const auto idx = cluster_set.find_query(acq.query_id);
    extended[*idx].records.push_back({acq.opponent, new_index, acq.y});
  }

  // Refit profiles with clusters frozen: centroids and responsibilities are
  // copied untouched; only the (extended) BT models move.
  result.extended = model;
  result.extended.num_models = m_old + 1;
  std::vector<double> column(n);
  for (int c = 0; c < model.k(); ++c) {
    for (size_t q = 0; q < n; ++q) column[q] = model.responsibilities[q][c];
    BtFitConfig bt = config.bt;
    bt.init = model.clusters[c].profile;
    bt.init.resize(m_old + 1, 0.0);
    BtFit fitted = fit_weighted_bt(extended, column, bt);
    fitted.theta.resize(m_old + 1, 0.0);
    result.extended.clusters[c].profile = std::move(fitted.theta);
  }

  {
    std::vector<double> unit(n, 1.0);
    BtFitConfig bt = config.bt;
    bt.init.assign(m_old + 1, 0.0);
    BtFit fitted = fit_weighted_bt(extended, unit, bt);
    fitted.theta.resize(m_old + 1, 0.0);
    result.extended_global = std::move(fitted.theta);
  }

  if (!eval_entries.empty()) {
    std::vector<double> method_losses, global_losses;
    for (const TestEntry& entry : eval_entries) {
      if (entry.holdout.empty()) continue;
      InferenceSignal signal;
      if (entry.probes.empty()) {
        signal.variant = SignalVariant::kEmbedding;
      } else {
        signal.variant = SignalVariant::kEmbeddingPlusProbe;
        signal.probes = entry.probes;
      }
      const std::vector<double> r =
          infer_responsibilities(result.extended, entry.query.embedding, signal);
      method_losses.push_back(mixture_per_query_loss(result.extended, r, entry.holdout));
      global_losses.push_back(per_query_loss(result.extended_global, entry.holdout));
    }
    if (!method_losses.empty()) {
      result.gain_percent = ranking_quality_gain(method_losses, global_losses);
    }
  }
  return result;
}

}  // namespace ecc
