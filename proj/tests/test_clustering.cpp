#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "oracles.hpp"
#include "pul/clustering.hpp"
#include "pul/errors.hpp"
#include "pul/selection.hpp"
#include "test_helpers.hpp"

using namespace pul;

namespace {

// k tight blobs with far-apart centers; at least one point per blob.
Matrix separated_blobs(int k, int n, std::size_t dim, std::uint64_t seed,
                       std::vector<int>* truth = nullptr) {
  Rng rng(seed);
  Matrix centers(static_cast<std::size_t>(k), dim);
  for (int c = 0; c < k; ++c)
    for (std::size_t j = 0; j < dim; ++j) centers.at(c, j) = (c + 1) * 10.0 * (j == 0 ? 1.0 : 0.3);
  Matrix xs(static_cast<std::size_t>(n), dim);
  if (truth) truth->resize(n);
  for (int i = 0; i < n; ++i) {
    const int c = i < k ? i : static_cast<int>(rng.uniform_index(k));
    if (truth) (*truth)[i] = c;
    for (std::size_t j = 0; j < dim; ++j) xs.at(i, j) = centers.at(c, j) + rng.normal(0.0, 0.2);
  }
  return xs;
}

}  // namespace

TEST_CASE("kmeans_pp_init: k equal to n returns a permutation of the rows") {
  const Matrix xs = testutil::random_matrix(6, 3, 91);
  Rng rng(5);
  const Matrix centers = kmeans_pp_init(xs, 6, rng);
  std::multiset<std::vector<double>> want, got;
  for (std::size_t i = 0; i < 6; ++i) {
    want.insert({xs.row(i).begin(), xs.row(i).end()});
    got.insert({centers.row(i).begin(), centers.row(i).end()});
  }
  CHECK(want == got);
}

TEST_CASE("kmeans_pp_init: k = 1 picks one input row") {
  const Matrix xs = testutil::random_matrix(5, 2, 13);
  Rng rng(3);
  const Matrix centers = kmeans_pp_init(xs, 1, rng);
  bool found = false;
  for (std::size_t i = 0; i < xs.rows; ++i)
    found |= std::equal(xs.row(i).begin(), xs.row(i).end(), centers.row(0).begin());
  CHECK(found);
}

TEST_CASE("kmeans_pp_init: k greater than n is rejected") {
  const Matrix xs = testutil::random_matrix(3, 2, 1);
  Rng rng(1);
  CHECK_THROWS_AS(kmeans_pp_init(xs, 4, rng), InvalidInput);
}

TEST_CASE("kmeans_pp_init: three separated blobs get one seed each almost surely") {
  // Squared-distance weighting makes a same-blob second seed vanishingly
  // unlikely; expect at least 95 of 100 trials to cover all three blobs.
  int covered = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    std::vector<int> truth;
    const Matrix xs = separated_blobs(3, 12, 2, 1000 + trial, &truth);
    Rng rng(2000 + trial);
    const Matrix centers = kmeans_pp_init(xs, 3, rng);
    std::set<int> blobs;
    for (int c = 0; c < 3; ++c) {
      // map each center back to the blob of its source row
      for (std::size_t i = 0; i < xs.rows; ++i)
        if (std::equal(xs.row(i).begin(), xs.row(i).end(), centers.row(c).begin()))
          blobs.insert(truth[i]);
    }
    covered += blobs.size() == 3;
  }
  CHECK(covered >= 95);
}

TEST_CASE("kmeans: two distant points split into singleton clusters") {
  Matrix xs(2, 1);
  xs.at(0, 0) = 0.0;
  xs.at(1, 0) = 10.0;
  Rng rng(4);
  const ClusterState state = kmeans(xs, 2, 300, rng);
  CHECK(state.assignments[0] != state.assignments[1]);
  CHECK(kmeans_objective(xs, state) == 0.0);
}

TEST_CASE("kmeans: identical points with several clusters still end at objective zero") {
  Matrix xs(7, 3);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 3; ++j) xs.at(i, j) = 2.5;
  Rng rng(6);
  const ClusterState state = kmeans(xs, 3, 50, rng);
  CHECK(kmeans_objective(xs, state) == 0.0);
  validate(state, xs);
}

TEST_CASE("kmeans: objective never beats the brute-force optimum and usually matches it") {
  int optimal = 0;
  for (std::uint64_t trial = 0; trial < 40; ++trial) {
    const int k = 2 + static_cast<int>(trial % 2);
    const int n = 6 + static_cast<int>(trial % 4);
    std::vector<int> truth;
    const Matrix xs = separated_blobs(k, n, 2, 3000 + trial, &truth);
    Rng rng(4000 + trial);
    KmeansTrace trace;
    const ClusterState state = kmeans(xs, k, 300, rng, &trace);
    const double lloyd = kmeans_objective(xs, state);
    const double best = oracle::brute_force_kmeans_objective(xs, k);
    CHECK(lloyd >= best - 1e-9);
    for (std::size_t t = 1; t < trace.objective.size(); ++t)
      CHECK(trace.objective[t] <= trace.objective[t - 1] + 1e-12);
    optimal += lloyd <= best + 1e-6 * (1.0 + best);
  }
  CHECK(optimal >= 36);  // 90%
}

TEST_CASE("kmeans: converged states assign every sample to its nearest centroid") {
  const Matrix xs = testutil::random_matrix(40, 3, 71);
  Rng rng(8);
  KmeansTrace trace;
  const ClusterState state = kmeans(xs, 4, 300, rng, &trace);
  CHECK(trace.converged);
  for (std::size_t i = 0; i < xs.rows; ++i) {
    double best = 1e300;
    int best_k = 0;
    for (int k = 0; k < state.k; ++k) {
      const double d = squared_distance(xs.row(i), state.centroids.row(k));
      if (d < best) {
        best = d;
        best_k = k;
      }
    }
    CHECK(state.assignments[i] == best_k);
  }
  validate(state, xs);  // includes centroid-consistency within 1e-9
}

TEST_CASE("kmeans: clustering un-normalized features differs from normalized input") {
  // Two narrow arcs at radii 1 and 5 sharing their directions. Without
  // normalization the radius separates them; after normalization both arcs
  // collapse onto the unit circle and only the angle is left.
  Matrix xs(16, 2);
  for (int i = 0; i < 8; ++i) {
    const double angle = i * 0.05;
    xs.at(i, 0) = std::cos(angle);
    xs.at(i, 1) = std::sin(angle);
    xs.at(i + 8, 0) = 5.0 * std::cos(angle);
    xs.at(i + 8, 1) = 5.0 * std::sin(angle);
  }
  Rng rng_a(12), rng_b(12);
  const ClusterState raw = kmeans(xs, 2, 300, rng_a);
  const ClusterState normalized = kmeans(l2_normalize(xs), 2, 300, rng_b);

  auto same_partition = [&](const ClusterState& a, const ClusterState& b) {
    bool direct = true, flipped = true;
    for (std::size_t i = 0; i < xs.rows; ++i) {
      direct &= a.assignments[i] == b.assignments[i];
      flipped &= a.assignments[i] == 1 - b.assignments[i];
    }
    return direct || flipped;
  };
  // Raw clustering separates the rings.
  for (int i = 1; i < 8; ++i) {
    CHECK(raw.assignments[i] == raw.assignments[0]);
    CHECK(raw.assignments[i + 8] == raw.assignments[8]);
  }
  CHECK(raw.assignments[0] != raw.assignments[8]);
  CHECK_FALSE(same_partition(raw, normalized));
}

TEST_CASE("kmeans_objective: duplicated points cluster to zero cost") {
  Matrix xs(4, 2);
  xs.at(0, 0) = 1.0;
  xs.at(1, 0) = 1.0;
  xs.at(2, 1) = 3.0;
  xs.at(3, 1) = 3.0;
  Rng rng(9);
  const ClusterState state = kmeans(xs, 2, 300, rng);
  CHECK(kmeans_objective(xs, state) == 0.0);
}

TEST_CASE("kmeans_objective: hand case {0,2} in one cluster costs 2") {
  Matrix xs(2, 1);
  xs.at(0, 0) = 0.0;
  xs.at(1, 0) = 2.0;
  ClusterState state;
  state.k = 1;
  state.assignments = {0, 0};
  state.centroids = Matrix(1, 1);
  state.centroids.at(0, 0) = 1.0;
  CHECK(kmeans_objective(xs, state) == 2.0);
}

TEST_CASE("kmeans_objective: matches a naive double-loop recomputation") {
  const Matrix xs = testutil::random_matrix(25, 4, 17);
  Rng rng(10);
  const ClusterState state = kmeans(xs, 3, 300, rng);
  double naive = 0.0;
  for (std::size_t i = 0; i < xs.rows; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < xs.cols; ++j) {
      const double diff = xs.at(i, j) - state.centroids.at(state.assignments[i], j);
      d += diff * diff;
    }
    naive += d;
  }
  CHECK(kmeans_objective(xs, state) == doctest::Approx(naive).epsilon(1e-12));
}
