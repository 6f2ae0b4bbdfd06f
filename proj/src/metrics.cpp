#include "ecc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace ecc {

double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("kendall_tau: length mismatch");
  }
  const size_t n = a.size();
  if (n < 2) throw std::invalid_argument("kendall_tau: need at least two items");
  long long numerator = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 || db == 0.0) continue;  // ties contribute zero
      numerator += (da > 0.0) == (db > 0.0) ? 1 : -1;
    }
  }
  return static_cast<double>(numerator) / (0.5 * static_cast<double>(n) *
                                           static_cast<double>(n - 1));
}

namespace {

void check_same_keys(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("partition key sets differ in size");
  }
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw std::invalid_argument("partition key mismatch at " + ia->first);
    }
  }
}

// Contingency table plus row/column sums over the shared key set.
struct Contingency {
  std::vector<std::vector<long long>> cells;
  std::vector<long long> row_sums, col_sums;
  long long total = 0;
};

Contingency contingency_table(const Partition& a, const Partition& b) {
  check_same_keys(a, b);
  std::unordered_map<int, int> row_of, col_of;
  for (const auto& [key, label] : a) {
    row_of.emplace(label, static_cast<int>(row_of.size()));
  }
  for (const auto& [key, label] : b) {
    col_of.emplace(label, static_cast<int>(col_of.size()));
  }
  Contingency table;
  table.cells.assign(row_of.size(), std::vector<long long>(col_of.size(), 0));
  table.row_sums.assign(row_of.size(), 0);
  table.col_sums.assign(col_of.size(), 0);
  auto ib = b.begin();
  for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
    const int r = row_of[ia->second];
    const int c = col_of[ib->second];
    ++table.cells[r][c];
    ++table.row_sums[r];
    ++table.col_sums[c];
    ++table.total;
  }
  return table;
}

double choose2(long long n) { return 0.5 * static_cast<double>(n) * (n - 1); }

}  // namespace

double adjusted_rand_index(const Partition& a, const Partition& b) {
  const Contingency table = contingency_table(a, b);
  if (table.total < 2) throw std::invalid_argument("adjusted_rand_index: need >= 2 items");
  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (size_t r = 0; r < table.cells.size(); ++r) {
    sum_rows += choose2(table.row_sums[r]);
    for (size_t c = 0; c < table.cells[r].size(); ++c) {
      sum_cells += choose2(table.cells[r][c]);
    }
  }
  for (long long cs : table.col_sums) sum_cols += choose2(cs);
  const double expected = sum_rows * sum_cols / choose2(table.total);
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;  // both partitions trivial
  return (sum_cells - expected) / (maximum - expected);
}

double normalized_mutual_info(const Partition& a, const Partition& b) {
  const Contingency table = contingency_table(a, b);
  const double n = static_cast<double>(table.total);
  if (table.total < 1) throw std::invalid_argument("normalized_mutual_info: empty input");
  double h_a = 0.0, h_b = 0.0, mi = 0.0;
  for (long long rs : table.row_sums) {
    if (rs > 0) h_a -= rs / n * std::log(rs / n);
  }
  for (long long cs : table.col_sums) {
    if (cs > 0) h_b -= cs / n * std::log(cs / n);
  }
  for (size_t r = 0; r < table.cells.size(); ++r) {
    for (size_t c = 0; c < table.cells[r].size(); ++c) {
      const long long cell = table.cells[r][c];
      if (cell == 0) continue;
      const double p = cell / n;
      mi += p * std::log(cell * n / (static_cast<double>(table.row_sums[r]) *
                                     static_cast<double>(table.col_sums[c])));
    }
  }
  if (h_a <= 0.0 && h_b <= 0.0) return 1.0;  // single cluster vs single cluster
  if (h_a <= 0.0 || h_b <= 0.0) return 0.0;
  return std::clamp(mi / std::sqrt(h_a * h_b), 0.0, 1.0);
}

double ranking_quality_gain(std::span<const double> method_losses,
                            std::span<const double> global_losses) {
  if (method_losses.size() != global_losses.size() || method_losses.empty()) {
    throw std::invalid_argument("ranking_quality_gain: misaligned or empty inputs");
  }
  double method = 0.0, global = 0.0;
  for (double l : method_losses) method += l;
  for (double l : global_losses) global += l;
  method /= static_cast<double>(method_losses.size());
  global /= static_cast<double>(global_losses.size());
  if (!(global > 0.0)) {
    throw std::invalid_argument("ranking_quality_gain: nonpositive global mean");
  }
  return 100.0 * (global - method) / global;
}

Partition densify_labels(const std::map<std::string, std::string>& labels) {
  std::map<std::string, int> ids;
  for (const auto& [key, label] : labels) {
    ids.emplace(label, static_cast<int>(ids.size()));
  }
  Partition out;
  for (const auto& [key, label] : labels) out[key] = ids[label];
  return out;
}

namespace {

// Queries of each cluster, as indices into the dataset, in dataset order.
std::map<int, std::vector<size_t>> cluster_members(const Partition& partition,
                                                   const Dataset& ds) {
  std::map<int, std::vector<size_t>> members;
  for (size_t q = 0; q < ds.queries.size(); ++q) {
    auto it = partition.find(ds.queries[q].query_id);
    if (it != partition.end()) members[it->second].push_back(q);
  }
  return members;
}

std::vector<double> fit_members(const Dataset& ds, std::span<const size_t> members,
                                int num_models, const BtFitConfig& bt) {
  std::vector<QueryComparisons> groups;
  groups.reserve(members.size());
  for (size_t q : members) groups.push_back(ds.comparisons[q]);
  std::vector<double> weights(groups.size(), 1.0);
  BtFitConfig config = bt;
  config.init.assign(num_models, 0.0);
  BtFit fitted = fit_weighted_bt(groups, weights, config);
  fitted.theta.resize(num_models, 0.0);
  return fitted.theta;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double idx = p * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(idx));
  const size_t hi = static_cast<size_t>(std::ceil(idx));
  const double frac = idx - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

std::map<int, double> within_cluster_consistency(
    const Partition& partition, const Dataset& ds, int folds, int repeats,
    std::uint64_t seed, std::vector<std::string>* warnings, const BtFitConfig& bt) {
  if (folds < 2) throw std::invalid_argument("within_cluster_consistency: folds < 2");
  const int m = std::max(ds.num_models(), 2);
  std::map<int, double> out;
  std::mt19937_64 rng(seed);
  for (const auto& [cluster, members] : cluster_members(partition, ds)) {
    if (static_cast<int>(members.size()) < folds) {
      if (warnings) {
        warnings->push_back("cluster " + std::to_string(cluster) +
                            " has fewer queries than folds; skipped");
      }
      continue;
    }
    double tau_sum = 0.0;
    int tau_count = 0;
    for (int rep = 0; rep < repeats; ++rep) {
      std::vector<size_t> shuffled(members.begin(), members.end());
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::vector<std::vector<double>> fold_profiles;
      for (int f = 0; f < folds; ++f) {
        std::vector<size_t> fold;
        for (size_t idx = f; idx < shuffled.size(); idx += folds) {
          fold.push_back(shuffled[idx]);
        }
        fold_profiles.push_back(fit_members(ds, fold, m, bt));
      }
      for (int a = 0; a < folds; ++a) {
        for (int b = a + 1; b < folds; ++b) {
          tau_sum += kendall_tau(fold_profiles[a], fold_profiles[b]);
          ++tau_count;
        }
      }
    }
    out[cluster] = tau_sum / tau_count;
  }
  return out;
}

std::map<int, double> cross_cluster_gap(const Partition& partition, const Dataset& ds,
                                        const BtFitConfig& bt) {
  const auto members = cluster_members(partition, ds);
  if (members.size() < 2) {
    throw std::invalid_argument("cross_cluster_gap: need at least two clusters");
  }
  const int m = std::max(ds.num_models(), 2);
  std::map<int, std::vector<double>> profiles;
  for (const auto& [cluster, idx] : members) {
    profiles[cluster] = fit_members(ds, idx, m, bt);
  }
  std::map<int, double> out;
  for (const auto& [cluster, idx] : members) {
    double own = 0.0;
    for (size_t q : idx) own += per_query_loss(profiles[cluster], ds.comparisons[q].records);
    own /= static_cast<double>(idx.size());
    double others = 0.0;
    int count = 0;
    for (const auto& [other, profile] : profiles) {
      if (other == cluster) continue;
      double loss = 0.0;
      for (size_t q : idx) loss += per_query_loss(profile, ds.comparisons[q].records);
      others += loss / static_cast<double>(idx.size());
      ++count;
    }
    out[cluster] = others / count - own;
  }
  return out;
}

StructureReport structure_report(const Partition& partition, const Dataset& ds,
                                 int folds, int repeats, std::uint64_t seed,
                                 const BtFitConfig& bt) {
  StructureReport report;
  report.within_consistency = within_cluster_consistency(partition, ds, folds, repeats,
                                                         seed, &report.warnings, bt);
  if (!report.within_consistency.empty()) {
    double total = 0.0;
    for (const auto& [cluster, tau] : report.within_consistency) total += tau;
    report.within_mean = total / static_cast<double>(report.within_consistency.size());
  }

  const auto members = cluster_members(partition, ds);
  const int m = std::max(ds.num_models(), 2);
  std::vector<std::vector<double>> profiles;
  for (const auto& [cluster, idx] : members) {
    profiles.push_back(fit_members(ds, idx, m, bt));
  }
  std::vector<double> taus;
  for (size_t a = 0; a < profiles.size(); ++a) {
    for (size_t b = a + 1; b < profiles.size(); ++b) {
      taus.push_back(kendall_tau(profiles[a], profiles[b]));
    }
  }
  if (!taus.empty()) {
    double total = 0.0;
    for (double t : taus) total += t;
    report.inter_similarity_mean = total / static_cast<double>(taus.size());
    report.inter_similarity_p25 = percentile(taus, 0.25);
    report.inter_similarity_p75 = percentile(taus, 0.75);
  }

  if (members.size() >= 2) {
    report.cross_gap = cross_cluster_gap(partition, ds, bt);
    std::vector<double> gaps;
    double total = 0.0;
    for (const auto& [cluster, gap] : report.cross_gap) {
      gaps.push_back(gap);
      total += gap;
    }
    report.cross_gap_mean = total / static_cast<double>(gaps.size());
    report.cross_gap_p25 = percentile(gaps, 0.25);
    report.cross_gap_p75 = percentile(gaps, 0.75);
  }
  return report;
}

EvalReport evaluate_ranking(const EccModel& model,
                            std::span<const double> global_profile,
                            std::span<const TestEntry> tests,
                            const EvalOptions& options) {
  if (tests.empty()) throw std::invalid_argument("evaluate_ranking: no test entries");
  EvalReport report;
  std::vector<double> method_losses, global_losses;
  method_losses.reserve(tests.size());
  global_losses.reserve(tests.size());
  std::mt19937_64 corrupt_seed_stream(options.seed);
  for (const TestEntry& entry : tests) {
    if (entry.holdout.empty()) {
      throw std::invalid_argument("evaluate_ranking: test query " + entry.query.query_id +
                                  " has no holdout comparisons");
    }
    InferenceSignal signal;
    signal.variant = options.signal;
    if (options.signal != SignalVariant::kEmbedding) {
      const int take = std::min<int>(options.probes_per_query,
                                     static_cast<int>(entry.probes.size()));
      if (take < 1) {
        throw std::invalid_argument("evaluate_ranking: test query " +
                                    entry.query.query_id + " has no probes");
      }
      signal.probes.assign(entry.probes.begin(), entry.probes.begin() + take);
      if (options.corrupt_p > 0.0) {
        signal.probes = corrupt_probes(signal.probes, options.corrupt_p,
                                       corrupt_seed_stream());
      }
    }
    const std::vector<double> r =
        infer_responsibilities(model, entry.query.embedding, signal);
    const double method = mixture_per_query_loss(model, r, entry.holdout);
    const double global = per_query_loss(global_profile, entry.holdout);
    report.per_query_loss_method[entry.query.query_id] = method;
    report.per_query_loss_global[entry.query.query_id] = global;
    method_losses.push_back(method);
    global_losses.push_back(global);
  }
  report.gain_percent = ranking_quality_gain(method_losses, global_losses);
  return report;
}

}  // namespace ecc
