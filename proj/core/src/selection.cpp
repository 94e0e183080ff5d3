#include "pul/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pul/errors.hpp"

namespace pul {

Matrix l2_normalize(const Matrix& rows, std::vector<int>* zero_rows) {
  Matrix out = rows;
  if (zero_rows) zero_rows->clear();
  for (std::size_t i = 0; i < out.rows; ++i) {
    auto row = out.row(i);
    const double len = norm(row);
    if (len == 0.0) {
      if (zero_rows) zero_rows->push_back(static_cast<int>(i));
      continue;
    }
    for (double& v : row) v /= len;
  }
  return out;
}

void select_center_features(const Matrix& features, ClusterState& state) {
  const std::size_t n = features.rows;
  if (state.assignments.size() != n)
    throw InvalidInput("assignments length must equal feature row count");

  state.center_indices.assign(static_cast<std::size_t>(state.k), -1);
  std::vector<double> best(static_cast<std::size_t>(state.k),
                           std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const int k = state.assignments[i];
    const double d = squared_distance(features.row(i), state.centroids.row(k));
    if (d < best[static_cast<std::size_t>(k)]) {  // strict: ties keep the lowest index
      best[static_cast<std::size_t>(k)] = d;
      state.center_indices[static_cast<std::size_t>(k)] = static_cast<int>(i);
    }
  }
  for (int idx : state.center_indices)
    if (idx < 0) throw InternalError("cluster has no members to pick a center from");

  state.center_features = Matrix(static_cast<std::size_t>(state.k), features.cols);
  for (int k = 0; k < state.k; ++k) {
    const auto src = features.row(static_cast<std::size_t>(state.center_indices[k]));
    auto dst = state.center_features.row(static_cast<std::size_t>(k));
    const double len = norm(src);
    for (std::size_t j = 0; j < features.cols; ++j) dst[j] = len > 0.0 ? src[j] / len : 0.0;
  }
}

SelectionMask select_reliable(const Matrix& unit_features, const ClusterState& state,
                              double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw InvalidInput("lambda must be in [0, 1]");
  if (state.center_features.rows != static_cast<std::size_t>(state.k))
    throw InvalidInput("cluster state has no center features");
  const std::size_t n = unit_features.rows;
  if (state.assignments.size() != n)
    throw InvalidInput("assignments length must equal feature row count");

  SelectionMask mask;
  mask.lambda = lambda;
  mask.v.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = state.assignments[i];
    const double delta = dot(unit_features.row(i), state.center_features.row(k));
    mask.v[i] = delta > lambda ? 1 : 0;
  }
  // The center sample itself always stays in, which keeps every cluster
  // represented even at lambda = 1.
  for (int idx : state.center_indices) mask.v[static_cast<std::size_t>(idx)] = 1;

  mask.selected_count = 0;
  for (auto bit : mask.v) mask.selected_count += bit;
  return mask;
}

double selected_fraction(const SelectionMask& mask, int n) {
  if (n < 1) throw InvalidInput("n must be >= 1");
  return static_cast<double>(mask.selected_count) / static_cast<double>(n);
}

}  // namespace pul
