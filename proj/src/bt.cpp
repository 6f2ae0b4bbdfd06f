#include "ecc/bt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ecc {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

namespace {

void check_pair(int num_models, int i, int j) {
  if (i < 0 || j < 0 || i >= num_models || j >= num_models) {
    throw std::out_of_range("model index out of range");
  }
  if (i == j) {
    throw std::invalid_argument("comparison requires two distinct models");
  }
}

}  // namespace

double win_probability(std::span<const double> theta, int i, int j) {
  check_pair(static_cast<int>(theta.size()), i, j);
  return stable_sigmoid(theta[j] - theta[i]);
}

double comparison_nll(std::span<const double> theta, const ComparisonRecord& rec) {
  check_pair(static_cast<int>(theta.size()), rec.i, rec.j);
  const double diff = theta[rec.j] - theta[rec.i];
  // -log sigma(diff) = softplus(-diff); -log sigma(-diff) = softplus(diff)
  return rec.y * softplus(-diff) + (1.0 - rec.y) * softplus(diff);
}

double per_query_loss(std::span<const double> theta,
                      std::span<const ComparisonRecord> records) {
  if (records.empty()) {
    throw std::invalid_argument("per_query_loss: empty record list");
  }
  double sum = 0.0;
  for (const ComparisonRecord& rec : records) {
    sum += comparison_nll(theta, rec);
  }
  return sum / static_cast<double>(records.size());
}

PairStats::PairStats(int num_models)
    : num_models_(num_models),
      win_mass_(static_cast<size_t>(num_models) * num_models, 0.0),
      lose_mass_(static_cast<size_t>(num_models) * num_models, 0.0) {
  if (num_models < 2) {
    throw std::invalid_argument("PairStats requires at least two models");
  }
}

void PairStats::add(const ComparisonRecord& rec, double mass) {
  check_pair(num_models_, rec.i, rec.j);
  int i = rec.i, j = rec.j;
  double y = rec.y;
  if (i > j) {  // canonical orientation i < j
    std::swap(i, j);
    y = 1.0 - y;
  }
  const size_t idx = static_cast<size_t>(i) * num_models_ + j;
  win_mass_[idx] += mass * y;
  lose_mass_[idx] += mass * (1.0 - y);
  total_mass_ += mass;
}

PairStats PairStats::from_groups(std::span<const QueryComparisons> groups,
                                 std::span<const double> weights) {
  if (groups.size() != weights.size()) {
    throw std::invalid_argument("groups and weights length mismatch");
  }
  int max_index = 1;
  for (const QueryComparisons& g : groups) {
    for (const ComparisonRecord& rec : g.records) {
      max_index = std::max({max_index, rec.i, rec.j});
    }
  }
  PairStats stats(max_index + 1);
  for (size_t g = 0; g < groups.size(); ++g) {
    const auto& records = groups[g].records;
    if (weights[g] <= 0.0 || records.empty()) continue;
    const double mass = weights[g] / static_cast<double>(records.size());
    for (const ComparisonRecord& rec : records) {
      stats.add(rec, mass);
    }
  }
  return stats;
}

double PairStats::objective(std::span<const double> theta, double ridge) const {
  double val = 0.0;
  for (int i = 0; i < num_models_; ++i) {
    for (int j = i + 1; j < num_models_; ++j) {
      const size_t idx = static_cast<size_t>(i) * num_models_ + j;
      const double a = win_mass_[idx], b = lose_mass_[idx];
      if (a == 0.0 && b == 0.0) continue;
      const double diff = theta[j] - theta[i];
      val += a * softplus(-diff) + b * softplus(diff);
    }
  }
  double sq = 0.0;
  for (int m = 0; m < num_models_; ++m) sq += theta[m] * theta[m];
  return val + ridge * sq;
}

void PairStats::gradient(std::span<const double> theta, double ridge,
                         std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < num_models_; ++i) {
    for (int j = i + 1; j < num_models_; ++j) {
      const size_t idx = static_cast<size_t>(i) * num_models_ + j;
      const double a = win_mass_[idx], b = lose_mass_[idx];
      if (a == 0.0 && b == 0.0) continue;
      // d/d theta_j of [a*softplus(ti-tj) + b*softplus(tj-ti)]
      const double s = stable_sigmoid(theta[j] - theta[i]);
      const double g = b * s - a * (1.0 - s);
      out[j] += g;
      out[i] -= g;
    }
  }
  for (int m = 0; m < num_models_; ++m) out[m] += 2.0 * ridge * theta[m];
}

void PairStats::hessian(std::span<const double> theta, double ridge,
                        std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const int m = num_models_;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const size_t idx = static_cast<size_t>(i) * m + j;
      const double w = win_mass_[idx] + lose_mass_[idx];
      if (w == 0.0) continue;
      const double s = stable_sigmoid(theta[j] - theta[i]);
      const double curv = w * s * (1.0 - s);
      out[static_cast<size_t>(i) * m + i] += curv;
      out[static_cast<size_t>(j) * m + j] += curv;
      out[static_cast<size_t>(i) * m + j] -= curv;
      out[static_cast<size_t>(j) * m + i] -= curv;
    }
  }
  for (int d = 0; d < m; ++d) out[static_cast<size_t>(d) * m + d] += 2.0 * ridge;
}

namespace {

// Solves H x = g for symmetric positive definite H via Cholesky. Returns
// false if a pivot degenerates (caller falls back to the gradient direction).
bool cholesky_solve(std::vector<double> h, int m, std::span<const double> g,
                    std::vector<double>& x) {
  for (int c = 0; c < m; ++c) {
    double diag = h[static_cast<size_t>(c) * m + c];
    for (int k = 0; k < c; ++k) {
      const double v = h[static_cast<size_t>(c) * m + k];
      diag -= v * v;
    }
    if (diag <= 0.0 || !std::isfinite(diag)) return false;
    diag = std::sqrt(diag);
    h[static_cast<size_t>(c) * m + c] = diag;
    for (int r = c + 1; r < m; ++r) {
      double v = h[static_cast<size_t>(r) * m + c];
      for (int k = 0; k < c; ++k) {
        v -= h[static_cast<size_t>(r) * m + k] * h[static_cast<size_t>(c) * m + k];
      }
      h[static_cast<size_t>(r) * m + c] = v / diag;
    }
  }
  x.assign(m, 0.0);
  for (int r = 0; r < m; ++r) {  // forward: L y = g
    double v = g[r];
    for (int k = 0; k < r; ++k) v -= h[static_cast<size_t>(r) * m + k] * x[k];
    x[r] = v / h[static_cast<size_t>(r) * m + r];
  }
  for (int r = m - 1; r >= 0; --r) {  // backward: L^T x = y
    double v = x[r];
    for (int k = r + 1; k < m; ++k) v -= h[static_cast<size_t>(k) * m + r] * x[k];
    x[r] = v / h[static_cast<size_t>(r) * m + r];
  }
  return true;
}

double norm2(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

BtFit fit_bt(const PairStats& stats, const BtFitConfig& config) {
  const int m = stats.num_models();
  if (stats.total_mass() <= 0.0) {
    throw std::invalid_argument("fit_bt: no positively weighted comparisons");
  }
  BtFit fit;
  fit.theta.assign(m, 0.0);
  if (!config.init.empty()) {
    if (static_cast<int>(config.init.size()) != m) {
      throw std::invalid_argument("fit_bt: warm start has wrong length");
    }
    fit.theta = config.init;
  }

  std::vector<double> grad(m), hess(static_cast<size_t>(m) * m), dir, trial(m);
  double f = stats.objective(fit.theta, config.ridge);
  constexpr double kMaxStepNorm = 50.0;
  constexpr double kArmijoC = 1e-4;

  for (int it = 0; it < config.max_iters; ++it) {
    fit.iterations = it;
    stats.gradient(fit.theta, config.ridge, grad);
    fit.grad_norm = norm2(grad);
    if (fit.grad_norm <= config.grad_tol) {
      fit.converged = true;
      break;
    }
    stats.hessian(fit.theta, config.ridge, hess);
    double descent;
    if (cholesky_solve(hess, m, grad, dir)) {
      descent = std::inner_product(grad.begin(), grad.end(), dir.begin(), 0.0);
      if (descent <= 0.0) {  // numerical breakdown; fall back to gradient
        dir.assign(grad.begin(), grad.end());
        descent = fit.grad_norm * fit.grad_norm;
      }
    } else {
      dir.assign(grad.begin(), grad.end());
      descent = fit.grad_norm * fit.grad_norm;
    }
    const double dir_norm = norm2(dir);
    if (dir_norm > kMaxStepNorm) {
      const double scale = kMaxStepNorm / dir_norm;
      for (double& d : dir) d *= scale;
      descent *= scale;
    }
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (int d = 0; d < m; ++d) trial[d] = fit.theta[d] - step * dir[d];
      const double f_trial = stats.objective(trial, config.ridge);
      if (f_trial <= f - kArmijoC * step * descent) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled at numerical resolution
    fit.theta = trial;
    f = stats.objective(fit.theta, config.ridge);
  }
  if (!fit.converged) {
    stats.gradient(fit.theta, config.ridge, grad);
    fit.grad_norm = norm2(grad);
    fit.converged = fit.grad_norm <= config.grad_tol;
  }

  // Gauge projection. The ridge already pins the sum near zero; this removes
  // the numerical residue.
  const double mean =
      std::accumulate(fit.theta.begin(), fit.theta.end(), 0.0) / m;
  for (double& t : fit.theta) t -= mean;
  fit.objective = stats.objective(fit.theta, config.ridge);
  return fit;
}

BtFit fit_weighted_bt(std::span<const QueryComparisons> groups,
                      std::span<const double> weights,
                      const BtFitConfig& config) {
  bool any_positive = false;
  for (size_t g = 0; g < weights.size(); ++g) {
    if (weights[g] < 0.0) {
      throw std::invalid_argument("fit_weighted_bt: negative weight");
    }
    if (weights[g] > 0.0 && !groups[g].records.empty()) any_positive = true;
  }
  if (!any_positive) {
    throw std::invalid_argument("fit_weighted_bt: all weights are zero");
  }
  PairStats stats = PairStats::from_groups(groups, weights);
  if (!config.init.empty() &&
      static_cast<int>(config.init.size()) > stats.num_models()) {
    // Warm start may name more models than the records mention.
    PairStats widened(static_cast<int>(config.init.size()));
    for (size_t g = 0; g < groups.size(); ++g) {
      const auto& records = groups[g].records;
      if (weights[g] <= 0.0 || records.empty()) continue;
      const double mass = weights[g] / static_cast<double>(records.size());
      for (const ComparisonRecord& rec : records) widened.add(rec, mass);
    }
    return fit_bt(widened, config);
  }
  return fit_bt(stats, config);
}

}  // namespace ecc
