#include "pul/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pul/errors.hpp"

namespace pul {

namespace {

// Nearest centroid, ties to the lowest cluster index.
int nearest_centroid(const Matrix& centroids, std::span<const double> x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.rows; ++k) {
    const double d = squared_distance(centroids.row(k), x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

void recompute_centroid(const Matrix& features, const std::vector<int>& assignments, int k,
                        Matrix& centroids) {
  auto row = centroids.row(static_cast<std::size_t>(k));
  std::fill(row.begin(), row.end(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    if (assignments[i] != k) continue;
    const auto f = features.row(i);
    for (std::size_t j = 0; j < features.cols; ++j) row[j] += f[j];
    ++count;
  }
  for (std::size_t j = 0; j < features.cols; ++j) row[j] /= static_cast<double>(count);
}

}  // namespace

Matrix kmeans_pp_init(const Matrix& features, int k, Rng& rng) {
  const std::size_t n = features.rows;
  if (k < 1) throw InvalidInput("k must be >= 1");
  if (static_cast<std::size_t>(k) > n)
    throw InvalidInput("k = " + std::to_string(k) + " exceeds sample count " + std::to_string(n));

  Matrix centers(static_cast<std::size_t>(k), features.cols);
  std::vector<std::uint8_t> chosen(n, 0);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());

  std::size_t first = rng.uniform_index(n);
  std::copy(features.row(first).begin(), features.row(first).end(), centers.row(0).begin());
  chosen[first] = 1;

  for (int c = 1; c < k; ++c) {
    const auto last = centers.row(static_cast<std::size_t>(c - 1));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], squared_distance(features.row(i), last));
      total += min_d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (min_d2[i] <= 0.0) continue;
        acc += min_d2[i];
        if (acc > r) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // r landed on the rounding tail; take the last weighted sample
        for (std::size_t i = n; i-- > 0;)
          if (min_d2[i] > 0.0) {
            pick = i;
            break;
          }
      }
    } else {
      // Remaining points duplicate the chosen centers; fall back to a
      // uniform draw over unchosen indices so centers stay distinct rows.
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) open.push_back(i);
      pick = open[rng.uniform_index(open.size())];
    }
    std::copy(features.row(pick).begin(), features.row(pick).end(),
              centers.row(static_cast<std::size_t>(c)).begin());
    chosen[pick] = 1;
    min_d2[pick] = 0.0;
  }
  return centers;
}

ClusterState kmeans(const Matrix& features, int k, int max_iters, Rng& rng, KmeansTrace* trace) {
  const std::size_t n = features.rows;
  if (static_cast<std::size_t>(k) > n)
    throw InvalidInput("k = " + std::to_string(k) + " exceeds sample count " + std::to_string(n));
  if (max_iters < 1) throw InvalidInput("max_iters must be >= 1");

  ClusterState state;
  state.k = k;
  state.centroids = kmeans_pp_init(features, k, rng);
  state.assignments.assign(n, -1);

  std::vector<int> next(n);
  std::vector<int> counts(static_cast<std::size_t>(k));

  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) next[i] = nearest_centroid(state.centroids, features.row(i));
    if (next == state.assignments) {
      if (trace) trace->converged = true;
      break;
    }
    state.assignments = next;

    // Update step: centroid = member mean, fixed accumulation order.
    std::fill(state.centroids.data.begin(), state.centroids.data.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int a = state.assignments[i];
      auto row = state.centroids.row(static_cast<std::size_t>(a));
      const auto f = features.row(i);
      for (std::size_t j = 0; j < features.cols; ++j) row[j] += f[j];
      counts[static_cast<std::size_t>(a)] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;
      auto row = state.centroids.row(static_cast<std::size_t>(c));
      for (std::size_t j = 0; j < features.cols; ++j)
        row[j] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }

    // Empty clusters are re-seeded with the sample farthest from its own
    // centroid, stolen from a cluster that keeps at least one member.
    for (int empty = 0; empty < k; ++empty) {
      if (counts[static_cast<std::size_t>(empty)] > 0) continue;
      std::size_t victim = n;
      double worst = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const int a = state.assignments[i];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        const double d = squared_distance(features.row(i), state.centroids.row(a));
        if (d > worst) {
          worst = d;
          victim = i;
        }
      }
      if (victim == n) throw InternalError("empty-cluster repair found no donor");
      const int donor = state.assignments[victim];
      state.assignments[victim] = empty;
      counts[static_cast<std::size_t>(donor)] -= 1;
      counts[static_cast<std::size_t>(empty)] = 1;
      std::copy(features.row(victim).begin(), features.row(victim).end(),
                state.centroids.row(static_cast<std::size_t>(empty)).begin());
      recompute_centroid(features, state.assignments, donor, state.centroids);
    }

    if (trace) {
      trace->objective.push_back(kmeans_objective(features, state));
      trace->iterations = iter + 1;
    }
  }
  return state;
}

double kmeans_objective(const Matrix& features, const ClusterState& state) {
  if (state.assignments.size() != features.rows)
    throw InvalidInput("assignments length must equal feature row count");
  double total = 0.0;
  for (std::size_t i = 0; i < features.rows; ++i)
    total += squared_distance(features.row(i), state.centroids.row(state.assignments[i]));
  return total;
}

}  // namespace pul
