#include "ecc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ecc {

std::string to_string(SignalVariant variant) {
  switch (variant) {
    case SignalVariant::kEmbedding: return "emb";
    case SignalVariant::kProbe: return "probe";
    case SignalVariant::kEmbeddingPlusProbe: return "emb+probe";
  }
  throw std::invalid_argument("unknown signal variant");
}

SignalVariant signal_from_string(const std::string& name) {
  if (name == "emb") return SignalVariant::kEmbedding;
  if (name == "probe") return SignalVariant::kProbe;
  if (name == "emb+probe" || name == "emb_plus_probe") {
    return SignalVariant::kEmbeddingPlusProbe;
  }
  throw std::invalid_argument("unknown signal variant: " + name);
}

std::vector<double> infer_responsibilities(const EccModel& model,
                                           std::span<const double> embedding,
                                           const InferenceSignal& signal) {
  const bool use_probe = signal.variant != SignalVariant::kEmbedding;
  const bool use_embedding = signal.variant != SignalVariant::kProbe;
  if (use_probe && signal.probes.empty()) {
    throw std::invalid_argument("infer_responsibilities: probe signal without probes");
  }
  std::vector<std::vector<double>> losses(1, std::vector<double>(model.k(), 0.0));
  for (int c = 0; c < model.k(); ++c) {
    const ClusterModel& cluster = model.clusters[c];
    double loss = 0.0;
    if (use_probe) {
      loss += per_query_loss(cluster.profile, signal.probes);
    }
    if (use_embedding) {
      if (embedding.size() != cluster.centroid.size()) {
        throw std::invalid_argument("infer_responsibilities: dimension mismatch");
      }
      double dot = 0.0;
      for (size_t d = 0; d < embedding.size(); ++d) {
        dot += embedding[d] * cluster.centroid[d];
      }
      loss += model.lambda * (-dot);
    }
    losses[0][c] = loss;
  }
  return update_responsibilities(losses, model.temperature)[0];
}

double mixture_preference(const EccModel& model, std::span<const double> r,
                          int i, int j) {
  if (static_cast<int>(r.size()) != model.k()) {
    throw std::invalid_argument("mixture_preference: responsibilities misaligned");
  }
  double p = 0.0;
  for (int c = 0; c < model.k(); ++c) {
    p += r[c] * win_probability(model.clusters[c].profile, i, j);
  }
  return p;
}

double mixture_per_query_loss(const EccModel& model, std::span<const double> r,
                              std::span<const ComparisonRecord> records) {
  if (records.empty()) {
    throw std::invalid_argument("mixture_per_query_loss: empty record list");
  }
  double sum = 0.0;
  for (const ComparisonRecord& rec : records) {
    const double p = mixture_preference(model, r, rec.i, rec.j);
    sum += -(rec.y * std::log(p) + (1.0 - rec.y) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(records.size());
}

std::vector<double> rank_scores(const EccModel& model, std::span<const double> r) {
  const int m = model.num_models;
  std::vector<double> borda(m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      borda[i] += mixture_preference(model, r, j, i);  // P(m_i preferred over m_j)
    }
  }
  return borda;
}

std::vector<int> rank_models(const EccModel& model, std::span<const double> r) {
  const std::vector<double> borda = rank_scores(model, r);
  std::vector<int> order(borda.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (borda[a] != borda[b]) return borda[a] > borda[b];
    return a < b;
  });
  return order;
}

QueryRanking infer_ranking(const EccModel& model, std::span<const double> embedding,
                           const InferenceSignal& signal) {
  QueryRanking out;
  out.responsibilities = infer_responsibilities(model, embedding, signal);
  out.borda = rank_scores(model, out.responsibilities);
  out.model_order = rank_models(model, out.responsibilities);
  return out;
}

}  // namespace ecc
