#pragma once

#include <vector>

#include "pul/rng.hpp"
#include "pul/types.hpp"

namespace pul {

// D^2-weighted seeding. Every returned row is an input row; rows are distinct
// as long as enough distinct inputs exist.
Matrix kmeans_pp_init(const Matrix& features, int k, Rng& rng);

struct KmeansTrace {
  std::vector<double> objective;  // after each Lloyd iteration, non-increasing
  int iterations = 0;
  bool converged = false;  // assignments stabilized before the cap
};

// Lloyd iterations over un-normalized features until assignments stop
// changing or max_iters is hit. Nearest-centroid ties break to the lowest
// cluster index; empty clusters are repaired by re-seeding them with the
// sample farthest from its current centroid.
ClusterState kmeans(const Matrix& features, int k, int max_iters, Rng& rng,
                    KmeansTrace* trace = nullptr);

// Sum of squared distances of each sample to its assigned centroid.
double kmeans_objective(const Matrix& features, const ClusterState& state);

}  // namespace pul
