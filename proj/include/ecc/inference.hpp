// Query-specific responsibility inference for unseen queries and mixture
// preference prediction over the cluster profiles.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "ecc/clustering.hpp"

namespace ecc {

enum class SignalVariant { kEmbedding, kProbe, kEmbeddingPlusProbe };

std::string to_string(SignalVariant variant);
SignalVariant signal_from_string(const std::string& name);

// What an unseen query offers for inference: its embedding is always at
// hand; probe comparisons are required for the probe-based variants.
struct InferenceSignal {
  SignalVariant variant = SignalVariant::kEmbeddingPlusProbe;
  std::vector<ComparisonRecord> probes;
};

// Per cluster: loss = mean probe NLL under the cluster profile (when the
// signal uses probes) + lambda * (-x . centroid) (when it uses the
// embedding); responsibilities are softmax(-loss / temperature). The probe
// only variant treats lambda as zero.
std::vector<double> infer_responsibilities(const EccModel& model,
                                           std::span<const double> embedding,
                                           const InferenceSignal& signal);

// P(model j preferred over model i | query) as the responsibility-weighted
// mixture of per-cluster win probabilities.
double mixture_preference(const EccModel& model, std::span<const double> r,
                          int i, int j);

// Mean negative log-likelihood of held-out records under the mixture.
double mixture_per_query_loss(const EccModel& model, std::span<const double> r,
                              std::span<const ComparisonRecord> records);

// Borda score per model: sum over opponents of the mixture preference for
// the model.
std::vector<double> rank_scores(const EccModel& model, std::span<const double> r);

// Models sorted by descending Borda score; ties break to the lower index.
std::vector<int> rank_models(const EccModel& model, std::span<const double> r);

// Everything inference produces for one query.
struct QueryRanking {
  std::vector<double> responsibilities;
  std::vector<double> borda;
  std::vector<int> model_order;
};

QueryRanking infer_ranking(const EccModel& model, std::span<const double> embedding,
                           const InferenceSignal& signal);

}  // namespace ecc
