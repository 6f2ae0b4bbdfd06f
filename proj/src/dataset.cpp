#include "ecc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ecc/metrics.hpp"
#include "json.hpp"

namespace ecc {

using nlohmann::json;

std::optional<size_t> Dataset::find_query(const std::string& query_id) const {
  for (size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].query_id == query_id) return q;
  }
  return std::nullopt;
}

void normalize_embedding(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw std::invalid_argument("embedding has zero or non-finite norm");
  }
  if (std::abs(norm - 1.0) < 1e-12) return;  // already unit; keep bits stable
  for (double& x : v) x /= norm;
}

void Dataset::validate() const {
  if (comparisons.size() != queries.size()) {
    throw std::invalid_argument("dataset: comparisons not aligned with queries");
  }
  const size_t d = dim();
  std::unordered_set<std::string> seen;
  for (size_t q = 0; q < queries.size(); ++q) {
    if (queries[q].embedding.size() != d) {
      throw std::invalid_argument("dataset: inconsistent embedding dimension for " +
                                  queries[q].query_id);
    }
    if (!seen.insert(queries[q].query_id).second) {
      throw std::invalid_argument("dataset: duplicate query_id " + queries[q].query_id);
    }
    double sq = 0.0;
    for (double x : queries[q].embedding) sq += x * x;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) {
      throw std::invalid_argument("dataset: embedding of " + queries[q].query_id +
                                  " is not unit norm");
    }
    if (comparisons[q].query_id != queries[q].query_id) {
      throw std::invalid_argument("dataset: comparison group misaligned at " +
                                  queries[q].query_id);
    }
    for (const ComparisonRecord& rec : comparisons[q].records) {
      if (rec.i < 0 || rec.j < 0 || rec.i >= num_models() || rec.j >= num_models()) {
        throw std::invalid_argument("dataset: model index out of range");
      }
      if (rec.i == rec.j) {
        throw std::invalid_argument("dataset: self-comparison");
      }
      if (!(rec.y >= 0.0 && rec.y <= 1.0)) {
        throw std::invalid_argument("dataset: target outside [0,1]");
      }
    }
  }
}

SplitResult split_and_sample(const Dataset& ds, const SplitSpec& spec) {
  if (!(spec.cluster_fraction > 0.0 && spec.cluster_fraction < 1.0)) {
    throw std::invalid_argument("cluster_fraction must lie in (0,1)");
  }
  if (spec.comparisons_per_query < 1) {
    throw std::invalid_argument("comparisons_per_query must be positive");
  }
  if (spec.probes_per_test_query < 0) {
    throw std::invalid_argument("probes_per_test_query must be nonnegative");
  }
  std::mt19937_64 rng(spec.seed);
  const size_t n = ds.queries.size();
  std::vector<size_t> order(n);
  for (size_t q = 0; q < n; ++q) order[q] = q;
  std::shuffle(order.begin(), order.end(), rng);

  const size_t n_cluster = static_cast<size_t>(
      std::llround(spec.cluster_fraction * static_cast<double>(n)));
  std::vector<size_t> cluster_idx(order.begin(), order.begin() + n_cluster);
  std::vector<size_t> test_idx(order.begin() + n_cluster, order.end());

  SplitResult out;
  // Demote test queries that cannot supply probes plus at least one holdout
  // record.
  std::vector<size_t> kept_test;
  for (size_t q : test_idx) {
    const int available = static_cast<int>(ds.comparisons[q].records.size());
    if (available < spec.probes_per_test_query + 1) {
      cluster_idx.push_back(q);
      out.warnings.push_back("test query " + ds.queries[q].query_id +
                             " demoted to cluster set (too few comparisons)");
    } else {
      kept_test.push_back(q);
    }
  }
  std::sort(cluster_idx.begin(), cluster_idx.end());
  std::sort(kept_test.begin(), kept_test.end());

  out.cluster_set.models = ds.models;
  for (size_t q : cluster_idx) {
    out.cluster_set.queries.push_back(ds.queries[q]);
    QueryComparisons group;
    group.query_id = ds.queries[q].query_id;
    const auto& records = ds.comparisons[q].records;
    if (static_cast<int>(records.size()) <= spec.comparisons_per_query) {
      group.records = records;
    } else {
      // uniform subsample without replacement, original order preserved
      std::vector<size_t> pick(records.size());
      for (size_t r = 0; r < pick.size(); ++r) pick[r] = r;
      std::shuffle(pick.begin(), pick.end(), rng);
      pick.resize(spec.comparisons_per_query);
      std::sort(pick.begin(), pick.end());
      for (size_t r : pick) group.records.push_back(records[r]);
    }
    out.cluster_set.comparisons.push_back(std::move(group));
  }

  for (size_t q : kept_test) {
    TestEntry entry;
    entry.query = ds.queries[q];
    const auto& records = ds.comparisons[q].records;
    std::vector<size_t> pick(records.size());
    for (size_t r = 0; r < pick.size(); ++r) pick[r] = r;
    std::shuffle(pick.begin(), pick.end(), rng);
    std::vector<size_t> probe_rows(pick.begin(), pick.begin() + spec.probes_per_test_query);
    std::sort(probe_rows.begin(), probe_rows.end());
    std::unordered_set<size_t> probe_set(probe_rows.begin(), probe_rows.end());
    for (size_t r : probe_rows) entry.probes.push_back(records[r]);
    for (size_t r = 0; r < records.size(); ++r) {
      if (!probe_set.count(r)) entry.holdout.push_back(records[r]);
    }
    out.test_set.push_back(std::move(entry));
  }
  return out;
}

std::vector<QueryComparisons> decompose_scores(std::span<const ScoredQuery> scored,
                                               TieMode tie_mode) {
  std::vector<QueryComparisons> out;
  out.reserve(scored.size());
  for (const ScoredQuery& sq : scored) {
    int present = 0;
    for (double s : sq.scores) {
      if (std::isfinite(s)) ++present;
    }
    if (present < 2) {
      throw std::invalid_argument("decompose_scores: query " + sq.query_id +
                                  " has fewer than two scored models");
    }
    QueryComparisons group;
    group.query_id = sq.query_id;
    const int m = static_cast<int>(sq.scores.size());
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(sq.scores[i])) continue;
      for (int j = i + 1; j < m; ++j) {
        if (!std::isfinite(sq.scores[j])) continue;
        if (sq.scores[i] == sq.scores[j]) {
          if (tie_mode == TieMode::kHalf) {
            group.records.push_back({i, j, 0.5});
          }
          continue;
        }
        group.records.push_back({i, j, sq.scores[j] > sq.scores[i] ? 1.0 : 0.0});
      }
    }
    out.push_back(std::move(group));
  }
  return out;
}

namespace {

std::vector<double> random_unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  while (true) {
    double sq = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      sq += x * x;
    }
    if (sq > 1e-12) {
      const double inv = 1.0 / std::sqrt(sq);
      for (double& x : v) x *= inv;
      return v;
    }
  }
}

}  // namespace

std::pair<Dataset, PlantedTruth> generate_planted(const PlantedSpec& spec) {
  if (spec.k_true < 1 || spec.num_models < 2 || spec.num_queries < 1 ||
      spec.comps_per_query < 1 || spec.dim < 1) {
    throw std::invalid_argument("generate_planted: invalid spec");
  }
  for (double p : {spec.embed_alignment, spec.mixed_fraction, spec.tie_fraction}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("generate_planted: probability field outside [0,1]");
    }
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  PlantedTruth truth;
  // Profiles with pairwise-distinct orderings.
  const int k = spec.k_true, m = spec.num_models;
  bool accepted = false;
  for (int attempt = 0; attempt < 10000 && !accepted; ++attempt) {
    truth.profiles.assign(k, std::vector<double>(m, 0.0));
    for (auto& row : truth.profiles) {
      double mean = 0.0;
      for (double& t : row) {
        t = (2.0 * unif(rng) - 1.0) * spec.profile_scale;
        mean += t;
      }
      mean /= m;
      for (double& t : row) t -= mean;
    }
    accepted = true;
    for (int a = 0; a < k && accepted; ++a) {
      for (int b = a + 1; b < k && accepted; ++b) {
        if (kendall_tau(truth.profiles[a], truth.profiles[b]) > 0.5) accepted = false;
      }
    }
  }
  if (!accepted) {
    throw std::runtime_error(
        "generate_planted: could not draw profiles with distinct orderings "
        "(spec too constrained)");
  }

  truth.directions.reserve(k);
  for (int c = 0; c < k; ++c) truth.directions.push_back(random_unit_vector(rng, spec.dim));

  Dataset ds;
  ds.models.reserve(m);
  for (int i = 0; i < m; ++i) ds.models.push_back("model_" + std::to_string(i));

  std::uniform_int_distribution<int> cluster_pick(0, k - 1);
  truth.labels.resize(spec.num_queries);
  truth.second_labels.assign(spec.num_queries, -1);
  const double align = spec.embed_alignment;
  const double noise_weight = std::sqrt(std::max(0.0, 1.0 - align * align));

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
  }
  std::uniform_int_distribution<size_t> pair_pick(0, pairs.size() - 1);

  for (int q = 0; q < spec.num_queries; ++q) {
    const int primary = cluster_pick(rng);
    truth.labels[q] = primary;
    int second = -1;
    if (k > 1 && unif(rng) < spec.mixed_fraction) {
      second = cluster_pick(rng);
      while (second == primary) second = cluster_pick(rng);
      truth.second_labels[q] = second;
    }

    QueryRecord query;
    query.query_id = "q" + std::to_string(q);
    query.label = "cluster_" + std::to_string(primary);
    std::vector<double> direction = truth.directions[primary];
    if (second >= 0) {
      for (int d = 0; d < spec.dim; ++d) direction[d] += truth.directions[second][d];
      normalize_embedding(direction);
    }
    std::vector<double> noise = random_unit_vector(rng, spec.dim);
    query.embedding.resize(spec.dim);
    for (int d = 0; d < spec.dim; ++d) {
      query.embedding[d] = align * direction[d] + noise_weight * noise[d];
    }
    normalize_embedding(query.embedding);
    ds.queries.push_back(std::move(query));

    auto preference = [&](int i, int j) {
      double p = stable_sigmoid(truth.profiles[primary][j] - truth.profiles[primary][i]);
      if (second >= 0) {
        p = 0.5 * p +
            0.5 * stable_sigmoid(truth.profiles[second][j] - truth.profiles[second][i]);
      }
      return p;
    };

    QueryComparisons group;
    group.query_id = ds.queries.back().query_id;
    for (int c = 0; c < spec.comps_per_query; ++c) {
      const auto [i, j] = pairs[pair_pick(rng)];
      double y;
      if (unif(rng) < spec.tie_fraction) {
        y = 0.5;
      } else {
        y = unif(rng) < preference(i, j) ? 1.0 : 0.0;
      }
      group.records.push_back({i, j, y});
    }
    ds.comparisons.push_back(std::move(group));

    std::vector<double> score_row(m, 0.0);
    for (int a = 0; a < m; ++a) {
      double total = 0.0;
      for (int b = 0; b < m; ++b) {
        if (a == b) continue;
        total += preference(b, a);  // P(a preferred over b)
      }
      score_row[a] = total / (m - 1);
    }
    truth.scores.push_back(std::move(score_row));
  }
  return {std::move(ds), std::move(truth)};
}

std::vector<ComparisonRecord> corrupt_probes(std::span<const ComparisonRecord> probes,
                                             double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("corrupt_probes: p outside [0,1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ComparisonRecord> out(probes.begin(), probes.end());
  for (ComparisonRecord& rec : out) {
    if (p > 0.0 && unif(rng) < p) {
      rec.y = unif(rng) < 0.5 ? 0.0 : 1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// file I/O

namespace {

[[noreturn]] void fail_at(const std::string& path, size_t line, const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

json parse_line(const std::string& path, size_t line_no, const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fail_at(path, line_no, "malformed JSON record");
  }
  return j;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

std::vector<std::string> load_models(const std::string& path) {
  std::ifstream in = open_in(path);
  json j;
  in >> j;
  if (!j.is_object() || !j.contains("models") || !j["models"].is_array()) {
    throw std::runtime_error(path + ": expected {\"models\": [...]}");
  }
  std::vector<std::string> models;
  for (const auto& name : j["models"]) models.push_back(name.get<std::string>());
  return models;
}

void save_models(std::span<const std::string> models, const std::string& path) {
  std::ofstream out = open_out(path);
  json j;
  j["models"] = std::vector<std::string>(models.begin(), models.end());
  out << j.dump(2) << "\n";
}

Dataset load_dataset(const std::string& queries_path,
                     const std::string& comparisons_path,
                     const std::string& models_path) {
  Dataset ds;
  const bool fixed_models = !models_path.empty();
  if (fixed_models) ds.models = load_models(models_path);

  std::unordered_map<std::string, int> model_index;
  for (size_t i = 0; i < ds.models.size(); ++i) {
    model_index[ds.models[i]] = static_cast<int>(i);
  }

  std::unordered_map<std::string, size_t> query_index;
  {
    std::ifstream in = open_in(queries_path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j = parse_line(queries_path, line_no, line);
      QueryRecord rec;
      try {
        rec.query_id = j.at("query_id").get<std::string>();
        rec.embedding = j.at("embedding").get<std::vector<double>>();
        if (j.contains("label") && !j["label"].is_null()) {
          rec.label = j["label"].get<std::string>();
        }
      } catch (const json::exception& e) {
        fail_at(queries_path, line_no, e.what());
      }
      if (rec.embedding.empty()) fail_at(queries_path, line_no, "empty embedding");
      if (!ds.queries.empty() && rec.embedding.size() != ds.queries.front().embedding.size()) {
        fail_at(queries_path, line_no, "inconsistent embedding dimension");
      }
      try {
        normalize_embedding(rec.embedding);
      } catch (const std::exception& e) {
        fail_at(queries_path, line_no, e.what());
      }
      if (!query_index.emplace(rec.query_id, ds.queries.size()).second) {
        fail_at(queries_path, line_no, "duplicate query_id " + rec.query_id);
      }
      QueryComparisons group;
      group.query_id = rec.query_id;
      ds.queries.push_back(std::move(rec));
      ds.comparisons.push_back(std::move(group));
    }
  }

  {
    std::ifstream in = open_in(comparisons_path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j = parse_line(comparisons_path, line_no, line);
      std::string query_id, name_i, name_j;
      double y;
      try {
        query_id = j.at("query_id").get<std::string>();
        name_i = j.at("model_i").get<std::string>();
        name_j = j.at("model_j").get<std::string>();
        y = j.at("y").get<double>();
      } catch (const json::exception& e) {
        fail_at(comparisons_path, line_no, e.what());
      }
      auto q = query_index.find(query_id);
      if (q == query_index.end()) {
        fail_at(comparisons_path, line_no, "unknown query_id " + query_id);
      }
      auto resolve = [&](const std::string& name) {
        auto it = model_index.find(name);
        if (it != model_index.end()) return it->second;
        if (fixed_models) fail_at(comparisons_path, line_no, "unknown model name " + name);
        const int idx = static_cast<int>(ds.models.size());
        ds.models.push_back(name);
        model_index[name] = idx;
        return idx;
      };
      ComparisonRecord rec;
      rec.i = resolve(name_i);
      rec.j = resolve(name_j);
      rec.y = y;
      if (rec.i == rec.j) {
        fail_at(comparisons_path, line_no, "comparison of a model with itself");
      }
      if (!(rec.y >= 0.0 && rec.y <= 1.0)) {
        fail_at(comparisons_path, line_no, "target y outside [0,1]");
      }
      if (rec.i > rec.j) {  // canonical orientation
        std::swap(rec.i, rec.j);
        rec.y = 1.0 - rec.y;
      }
      ds.comparisons[q->second].records.push_back(rec);
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& queries_path,
                  const std::string& comparisons_path) {
  {
    std::ofstream out = open_out(queries_path);
    for (const QueryRecord& rec : ds.queries) {
      json j;
      j["query_id"] = rec.query_id;
      j["embedding"] = rec.embedding;
      if (!rec.label.empty()) j["label"] = rec.label;
      out << j.dump() << "\n";
    }
  }
  {
    std::ofstream out = open_out(comparisons_path);
    for (const QueryComparisons& group : ds.comparisons) {
      for (const ComparisonRecord& rec : group.records) {
        json j;
        j["query_id"] = group.query_id;
        j["model_i"] = ds.models.at(rec.i);
        j["model_j"] = ds.models.at(rec.j);
        j["y"] = rec.y;
        out << j.dump() << "\n";
      }
    }
  }
}

std::vector<ScoredQuery> load_scores(const std::string& path,
                                     std::span<const std::string> models) {
  std::unordered_map<std::string, int> model_index;
  for (size_t i = 0; i < models.size(); ++i) {
    model_index[models[i]] = static_cast<int>(i);
  }
  std::ifstream in = open_in(path);
  std::vector<ScoredQuery> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(path, line_no, line);
    ScoredQuery sq;
    sq.scores.assign(models.size(), std::numeric_limits<double>::quiet_NaN());
    try {
      sq.query_id = j.at("query_id").get<std::string>();
      for (const auto& [name, val] : j.at("scores").items()) {
        auto it = model_index.find(name);
        if (it == model_index.end()) fail_at(path, line_no, "unknown model name " + name);
        sq.scores[it->second] = val.get<double>();
      }
    } catch (const json::exception& e) {
      fail_at(path, line_no, e.what());
    }
    out.push_back(std::move(sq));
  }
  return out;
}

void save_scores(std::span<const ScoredQuery> scored,
                 std::span<const std::string> models, const std::string& path) {
  std::ofstream out = open_out(path);
  for (const ScoredQuery& sq : scored) {
    json scores = json::object();
    for (size_t m = 0; m < models.size() && m < sq.scores.size(); ++m) {
      if (std::isfinite(sq.scores[m])) scores[models[m]] = sq.scores[m];
    }
    json j;
    j["query_id"] = sq.query_id;
    j["scores"] = scores;
    out << j.dump() << "\n";
  }
}

}  // namespace ecc
