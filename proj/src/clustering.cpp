#include "ecc/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ecc {

std::string to_string(ClusterMode mode) {
  switch (mode) {
    case ClusterMode::kEcc: return "ecc";
    case ClusterMode::kEmbeddingOnly: return "emb";
    case ClusterMode::kComparisonOnly: return "comp";
  }
  throw std::invalid_argument("unknown cluster mode");
}

ClusterMode cluster_mode_from_string(const std::string& name) {
  if (name == "ecc") return ClusterMode::kEcc;
  if (name == "emb" || name == "embedding-only") return ClusterMode::kEmbeddingOnly;
  if (name == "comp" || name == "comparison-only") return ClusterMode::kComparisonOnly;
  throw std::invalid_argument("unknown cluster mode: " + name);
}

double combined_loss(const QueryRecord& query,
                     std::span<const ComparisonRecord> records,
                     const ClusterModel& cluster, double lambda) {
  double loss = 0.0;
  if (!records.empty()) {
    loss += per_query_loss(cluster.profile, records);
  }
  if (lambda != 0.0) {
    if (query.embedding.size() != cluster.centroid.size()) {
      throw std::invalid_argument("combined_loss: embedding/centroid dimension mismatch");
    }
    double dot = 0.0;
    for (size_t d = 0; d < query.embedding.size(); ++d) {
      dot += query.embedding[d] * cluster.centroid[d];
    }
    loss += lambda * (-dot);
  }
  return loss;
}

std::vector<std::vector<double>> update_responsibilities(
    const std::vector<std::vector<double>>& losses, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("update_responsibilities: temperature must be positive");
  }
  std::vector<std::vector<double>> out(losses.size());
  for (size_t q = 0; q < losses.size(); ++q) {
    const auto& row = losses[q];
    if (row.empty()) throw std::invalid_argument("update_responsibilities: empty row");
    double best = row[0];
    for (double l : row) {
      if (!std::isfinite(l)) {
        throw std::invalid_argument("update_responsibilities: non-finite loss");
      }
      best = std::min(best, l);
    }
    out[q].resize(row.size());
    double total = 0.0;
    for (size_t c = 0; c < row.size(); ++c) {
      out[q][c] = std::exp(-(row[c] - best) / temperature);
      total += out[q][c];
    }
    for (double& r : out[q]) r /= total;
  }
  return out;
}

std::optional<std::vector<double>> update_centroid(
    std::span<const QueryRecord> queries, std::span<const double> weights) {
  if (queries.size() != weights.size()) {
    throw std::invalid_argument("update_centroid: weights misaligned");
  }
  if (queries.empty()) return std::nullopt;
  double mass = 0.0;
  std::vector<double> mean(queries.front().embedding.size(), 0.0);
  for (size_t q = 0; q < queries.size(); ++q) {
    if (weights[q] <= 0.0) continue;
    mass += weights[q];
    const auto& x = queries[q].embedding;
    for (size_t d = 0; d < mean.size(); ++d) mean[d] += weights[q] * x[d];
  }
  if (mass <= 1e-12) return std::nullopt;
  double sq = 0.0;
  for (double& v : mean) {
    v /= mass;
    sq += v * v;
  }
  if (sq <= 1e-24) return std::nullopt;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : mean) v *= inv;
  return mean;
}

namespace {

double row_entropy(std::span<const double> row) {
  double h = 0.0;
  for (double r : row) {
    if (r > 0.0) h -= r * std::log(r);
  }
  return h;
}

double row_kl(std::span<const double> now, std::span<const double> before) {
  double kl = 0.0;
  for (size_t c = 0; c < now.size(); ++c) {
    if (now[c] > 0.0) {
      kl += now[c] * (std::log(now[c]) - std::log(std::max(before[c], 1e-300)));
    }
  }
  return kl;
}

std::vector<std::vector<double>> dirichlet_rows(size_t n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(k));
  for (auto& row : rows) {
    double total = 0.0;
    for (double& r : row) {
      r = expo(rng);
      total += r;
    }
    for (double& r : row) r /= total;
  }
  return rows;
}

}  // namespace

std::pair<EccModel, FitTrace> fit(const Dataset& ds, int k, double lambda,
                                  double temperature, const EccFitConfig& config) {
  if (k < 1) throw std::invalid_argument("fit: k must be at least 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("fit: temperature must be positive");
  if (lambda < 0.0) throw std::invalid_argument("fit: lambda must be nonnegative");
  if (ds.queries.empty()) throw std::invalid_argument("fit: empty dataset");

  const ClusterMode mode = config.mode;
  const bool use_comparisons = mode != ClusterMode::kEmbeddingOnly;
  const double eff_lambda = mode == ClusterMode::kComparisonOnly ? 0.0 : lambda;
  const size_t n = ds.queries.size();

  if (use_comparisons) {
    for (size_t q = 0; q < n; ++q) {
      if (ds.comparisons[q].records.empty()) {
        throw std::invalid_argument("fit: query " + ds.queries[q].query_id +
                                    " has no comparisons");
      }
    }
  }

  EccModel model;
  model.lambda = eff_lambda;
  model.temperature = temperature;
  model.mode = mode;
  model.num_models = use_comparisons ? std::max(ds.num_models(), 2) : ds.num_models();
  model.clusters.assign(k, ClusterModel{std::vector<double>(ds.dim(), 0.0),
                                        std::vector<double>(model.num_models, 0.0)});
  for (const QueryRecord& q : ds.queries) model.query_ids.push_back(q.query_id);

  if (!config.initial_responsibilities.empty()) {
    if (config.initial_responsibilities.size() != n) {
      throw std::invalid_argument("fit: initial responsibilities misaligned");
    }
    model.responsibilities = config.initial_responsibilities;
  } else {
    model.responsibilities = dirichlet_rows(n, k, config.seed);
  }

  FitTrace trace;
  std::vector<double> column(n);
  std::vector<std::vector<double>> losses(n, std::vector<double>(k, 0.0));
  std::vector<std::vector<double>> prev_centroids;

  for (int round = 0; round < config.max_rounds; ++round) {
    // Stage I: per-cluster centroid and capability profile under the current
    // responsibilities.
    prev_centroids.clear();
    for (const ClusterModel& c : model.clusters) prev_centroids.push_back(c.centroid);

    for (int c = 0; c < k; ++c) {
      double mass = 0.0;
      for (size_t q = 0; q < n; ++q) {
        column[q] = model.responsibilities[q][c];
        mass += column[q];
      }
      if (mass < 1e-8) {
        trace.warnings.push_back("round " + std::to_string(round + 1) + ": cluster " +
                                 std::to_string(c) + " lost all mass; frozen");
        continue;
      }
      if (auto centroid = update_centroid(ds.queries, column)) {
        model.clusters[c].centroid = std::move(*centroid);
      } else {
        trace.warnings.push_back("round " + std::to_string(round + 1) + ": cluster " +
                                 std::to_string(c) + " centroid degenerate; frozen");
      }
      if (use_comparisons) {
        BtFitConfig bt = config.bt;
        bt.init = model.clusters[c].profile;  // warm start keeps descent monotone
        BtFit fitted = fit_weighted_bt(ds.comparisons, column, bt);
        if (static_cast<int>(fitted.theta.size()) < model.num_models) {
          fitted.theta.resize(model.num_models, 0.0);
        }
        model.clusters[c].profile = std::move(fitted.theta);
      }
    }

    // Combined losses for every (query, cluster) pair.
    for (size_t q = 0; q < n; ++q) {
      std::span<const ComparisonRecord> records;
      if (use_comparisons) records = ds.comparisons[q].records;
      for (int c = 0; c < k; ++c) {
        losses[q][c] = combined_loss(ds.queries[q], records, model.clusters[c], eff_lambda);
        if (!std::isfinite(losses[q][c])) {
          throw std::runtime_error("fit: non-finite combined loss at query " +
                                   ds.queries[q].query_id + ", cluster " +
                                   std::to_string(c) + ", round " +
                                   std::to_string(round + 1));
        }
      }
    }

    // Stage II: closed-form responsibility update.
    std::vector<std::vector<double>> updated = update_responsibilities(losses, temperature);

    FitRound record;
    double objective = 0.0;
    double kl_total = 0.0;
    for (size_t q = 0; q < n; ++q) {
      for (int c = 0; c < k; ++c) objective += updated[q][c] * losses[q][c];
      objective -= temperature * row_entropy(updated[q]);
      kl_total += row_kl(updated[q], model.responsibilities[q]);
    }
    if (use_comparisons) {
      // The profile ridge is part of what Stage I actually minimizes; folding
      // it in keeps the traced objective a true descent quantity.
      for (const ClusterModel& c : model.clusters) {
        double sq = 0.0;
        for (double t : c.profile) sq += t * t;
        objective += config.bt.ridge * sq;
      }
    }
    if (!std::isfinite(objective)) {
      throw std::runtime_error("fit: non-finite objective at round " +
                               std::to_string(round + 1));
    }
    record.objective = objective;
    record.mean_kl = kl_total / static_cast<double>(n);
    double max_shift = 0.0;
    for (int c = 0; c < k; ++c) {
      double sq = 0.0;
      for (size_t d = 0; d < model.clusters[c].centroid.size(); ++d) {
        const double delta = model.clusters[c].centroid[d] - prev_centroids[c][d];
        sq += delta * delta;
      }
      max_shift = std::max(max_shift, std::sqrt(sq));
    }
    record.max_centroid_shift = round == 0 ? std::numeric_limits<double>::infinity()
                                           : max_shift;
    model.responsibilities = std::move(updated);
    trace.rounds.push_back(record);

    if (round > 0 && record.mean_kl < config.kl_tol &&
        record.max_centroid_shift < config.centroid_tol) {
      trace.converged = true;
      break;
    }
  }
  return {std::move(model), std::move(trace)};
}

std::vector<double> fit_global_bt(const Dataset& ds, const BtFitConfig& config) {
  std::vector<double> weights(ds.queries.size(), 1.0);
  BtFit fitted = fit_weighted_bt(ds.comparisons, weights, config);
  if (static_cast<int>(fitted.theta.size()) < ds.num_models()) {
    fitted.theta.resize(ds.num_models(), 0.0);
  }
  return fitted.theta;
}

void fit_cluster_profiles(EccModel& model, const Dataset& ds, const BtFitConfig& config) {
  if (model.responsibilities.size() != ds.queries.size()) {
    throw std::invalid_argument("fit_cluster_profiles: dataset does not match model");
  }
  for (size_t q = 0; q < ds.queries.size(); ++q) {
    if (model.query_ids[q] != ds.queries[q].query_id) {
      throw std::invalid_argument("fit_cluster_profiles: query order mismatch at " +
                                  ds.queries[q].query_id);
    }
  }
  const int m = std::max(ds.num_models(), 2);
  std::vector<double> column(ds.queries.size());
  for (int c = 0; c < model.k(); ++c) {
    for (size_t q = 0; q < ds.queries.size(); ++q) {
      column[q] = model.responsibilities[q][c];
    }
    BtFitConfig bt = config;
    bt.init = model.clusters[c].profile;
    bt.init.resize(m, 0.0);
    BtFit fitted = fit_weighted_bt(ds.comparisons, column, bt);
    if (static_cast<int>(fitted.theta.size()) < m) fitted.theta.resize(m, 0.0);
    model.clusters[c].profile = std::move(fitted.theta);
  }
  model.num_models = m;
}

std::map<std::string, int> hard_partition(const EccModel& model) {
  std::map<std::string, int> out;
  for (size_t q = 0; q < model.query_ids.size(); ++q) {
    const auto& row = model.responsibilities[q];
    int best = 0;
    for (int c = 1; c < static_cast<int>(row.size()); ++c) {
      if (row[c] > row[best]) best = c;  // ties keep the lowest index
    }
    out[model.query_ids[q]] = best;
  }
  return out;
}

}  // namespace ecc
